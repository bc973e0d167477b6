#pragma once

#include "ncl/config.hpp"
#include "ncl/report.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ncl {

struct RunOptions {
  /// Override the config's output directory / seed list.
  std::optional<std::filesystem::path> out;
  std::optional<std::vector<std::uint64_t>> seeds;
  bool dump_relations = false;
  bool checkpoints = false;
  bool dump_buffer = false;
};

ExperimentConfig apply_options(ExperimentConfig cfg, const RunOptions& opts);

struct CellResult {
  AblationCell cell;
  std::vector<MetricsReport> reports;  // seed order
  SummaryRow summary;
};

/// Runs every seed of `cfg` with `cell` applied. Writes per-seed files into `out_dir` when given.
CellResult run_cell(const ExperimentConfig& cfg, const AblationCell& cell,
                    const std::optional<std::filesystem::path>& out_dir);

/// Grid spec: a preset name ("plasticity-stability", "pseudo-replay") or a JSON document,
/// either {"cells": [{...}, ...]} or axes {"plasticity": [...], "stability": [...],
/// "pseudo_replay": [...], "buffer": [...]} expanded as a cartesian product. Axes left out take
/// the base config's value. Invalid axis combinations are dropped and duplicates removed,
/// each with a warning.
std::vector<AblationCell> parse_grid(const std::string& spec, const TrainConfig& base, std::ostream& warn);
std::vector<AblationCell> load_grid(const std::string& spec_or_path, const TrainConfig& base, std::ostream& warn);

// Subcommands. Return process exit codes; diagnostics go to `err`.
int cmd_run(const std::filesystem::path& config, const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_ablate(const std::filesystem::path& config, const std::string& grid, const RunOptions& opts,
               std::ostream& out, std::ostream& err);
/// Rebuilds summary.csv from the report_*.json files in `dir`.
int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

}  // namespace ncl
