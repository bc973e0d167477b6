#pragma once

// JSON experiment configuration.
//
// Schema (every key optional unless marked required; unknown keys are errors):
//
//   {
//     "seeds": [0, 1, 2],                       required, non-empty
//     "output_dir": "out",
//     "stream": {                               required
//       "csv": "path.csv",                      replaces the synthetic generator
//       "scenario": "class-il" | "task-il",
//       "tasks": 3, "classes_per_task": 2, "samples_per_class": 100,
//       "input_dim": 20, "cluster_spread": 0.4, "mean_rank": 0,
//       "seed": 7                               fixed data seed; default: the run seed
//     },
//     "augment": {"noise_std", "scale_jitter": [lo, hi], "rotation", "max_rotation"},
//     "model":   {"hidden": [64, 32], "embedding_dim": 16},
//     "train": {
//       "epochs_first_task", "epochs_later", "batch_size", "lr", "momentum",
//       "tau", "gamma", "kappa_past", "kappa_current", "zeta_past", "zeta_current",
//       "warmup_epochs"                          default round(0.3 * epochs_later),
//       "buffer", "probe_epochs", "probe_lr", "probe_batch_size",
//       "classifier": "linear-probe" | "nc4", "probe_features": "backbone" | "projector",
//       "skip_degenerate_anchors", "track_nc"
//     },
//     "ablation": {"plasticity": "fnc2" | "supcon-asym",
//                  "stability": "none" | "ird" | "sprd" | "hsd",
//                  "pseudo_replay": true}
//   }

#include "ncl/stream.hpp"
#include "ncl/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ncl {

struct StreamSource {
  std::optional<std::filesystem::path> csv;
  Scenario scenario = Scenario::class_il;
  SyntheticStreamConfig synthetic;
  /// When unset the synthetic data seed follows the run seed.
  std::optional<std::uint64_t> data_seed;

  friend bool operator==(const StreamSource&, const StreamSource&) = default;
};

struct ExperimentConfig {
  StreamSource stream;
  /// `seed` is overwritten per run.
  TrainConfig train;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError on an invalid ablation combination or parameter.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Errors carry "<source>:<line>: <key path>: <reason>".
ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
std::string serialize_config(const ExperimentConfig& cfg);

/// Train config with the run seed applied.
TrainConfig train_config_for_seed(const ExperimentConfig& cfg, std::uint64_t seed);
TaskStream build_stream(const ExperimentConfig& cfg, std::uint64_t seed);

/// "0,1,2" or "0-4".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace ncl
