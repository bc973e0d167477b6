#include "ncl/config.hpp"
#include "ncl/errors.hpp"

#include <doctest.h>

#include <string>

using namespace ncl;

namespace {

const char* kFull = R"({
  "seeds": [0, 1, 2],
  "output_dir": "out/x",
  "stream": {
    "scenario": "task-il",
    "tasks": 4,
    "classes_per_task": 3,
    "samples_per_class": 50,
    "input_dim": 12,
    "cluster_spread": 0.25,
    "mean_rank": 5,
    "seed": 9
  },
  "augment": {"noise_std": 0.02, "scale_jitter": [0.8, 1.2], "rotation": true, "max_rotation": 0.3},
  "model": {"hidden": [32, 16], "embedding_dim": 12},
  "train": {
    "epochs_first_task": 20, "epochs_later": 10, "batch_size": 32, "lr": 0.1, "momentum": 0.8,
    "tau": 0.3, "gamma": 4, "kappa_past": 0.02, "kappa_current": 0.3, "zeta_past": 0.05,
    "zeta_current": 0.4, "warmup_epochs": 2, "buffer": 100, "probe_epochs": 7, "probe_lr": 0.2,
    "probe_batch_size": 8, "classifier": "nc4", "probe_features": "projector",
    "skip_degenerate_anchors": true, "track_nc": true
  },
  "ablation": {"plasticity": "supcon-asym", "stability": "ird", "pseudo_replay": false}
})";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("every field is parsed") {
  const ExperimentConfig c = parse_config(kFull);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(c.output_dir == "out/x");
  CHECK(c.stream.scenario == Scenario::task_il);
  CHECK(c.stream.synthetic.tasks == 4);
  CHECK(c.stream.synthetic.classes_per_task == 3);
  CHECK(c.stream.synthetic.mean_rank == 5);
  CHECK(c.stream.data_seed == 9u);
  CHECK(c.train.augment.scale_lo == 0.8);
  CHECK(c.train.augment.rotation);
  CHECK(c.train.model.hidden == std::vector<int>{32, 16});
  CHECK(c.train.plasticity.gamma == 4.0);
  CHECK(c.train.distill.zeta_current == 0.4);
  CHECK(c.train.distill.warmup_epochs == 2);
  CHECK(c.train.buffer_capacity == 100);
  CHECK(c.train.classifier == ClassifierMode::nc4);
  CHECK(c.train.probe_features == FeatureSource::projector);
  CHECK(c.train.plasticity_loss == PlasticityLoss::supcon_asym);
  CHECK(c.train.stability_loss == StabilityLoss::ird);
  CHECK_FALSE(c.train.pseudo_replay);
}

TEST_CASE("parse, serialize, parse is the identity") {
  const ExperimentConfig a = parse_config(kFull);
  const ExperimentConfig b = parse_config(serialize_config(a));
  CHECK(a == b);
  CHECK(serialize_config(a) == serialize_config(b));

  const ExperimentConfig minimal = parse_config(R"({"seeds": [4], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}})");
  CHECK(parse_config(serialize_config(minimal)) == minimal);
}

TEST_CASE("defaults follow the documented values") {
  const ExperimentConfig c = parse_config(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "train": {"epochs_later": 40}})");
  CHECK(c.train.plasticity.tau == 0.5);
  CHECK(c.train.plasticity.gamma == 1.0);
  CHECK(c.train.distill.kappa_past == 0.01);
  CHECK(c.train.distill.kappa_current == 0.2);
  CHECK(c.train.distill.zeta_past == 0.01);
  CHECK(c.train.distill.zeta_current == 0.2);
  CHECK(c.train.distill.warmup_epochs == 12);
  CHECK(c.train.stability_loss == StabilityLoss::hsd);
  CHECK(c.train.pseudo_replay);
  CHECK(c.stream.synthetic.cluster_spread == 0.4);
  CHECK_FALSE(c.stream.data_seed.has_value());
}

TEST_CASE("unknown keys are errors with a line number") {
  const std::string text = "{\n  \"seeds\": [0],\n  \"stream\": {\n    \"taks\": 3\n  }\n}\n";
  const std::string err = error_of(text);
  CHECK(err.find("cfg.json:4:") == 0);
  CHECK(err.find("stream.taks") != std::string::npos);
  CHECK(err.find("unknown key") != std::string::npos);
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "extra": 1})").find("extra") != std::string::npos);
}

TEST_CASE("missing required fields are named") {
  CHECK(error_of(R"({"stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}})").find("seeds: missing required field") != std::string::npos);
  CHECK(error_of(R"({"seeds": [1]})").find("stream: missing required field") != std::string::npos);
  CHECK(error_of(R"({"seeds": [], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}})").find("seeds") != std::string::npos);
}

TEST_CASE("type and range errors point at the key") {
  const std::string text = "{\n\"seeds\": [0],\n\"stream\": {\"tasks\": 3, \"classes_per_task\": 2, \"samples_per_class\": 20, \"input_dim\": 8},\n\"train\": {\n\"lr\": \"fast\"\n}\n}";
  const std::string err = error_of(text);
  CHECK(err.find("cfg.json:5: train.lr: expected a number") == 0);
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "train": {"momentum": 1.5}})").find("momentum") != std::string::npos);
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 0, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}})").find("stream") != std::string::npos);
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "train": {"buffer": -1}})").find("train.buffer") !=
        std::string::npos);
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "ablation": {"stability": "lwf"}})").find("ablation.stability") !=
        std::string::npos);
}

TEST_CASE("malformed JSON reports the offending line") {
  const std::string err = error_of("{\n\"seeds\": [0],\n\"stream\": {,}\n}");
  CHECK(err.find("cfg.json:3:") == 0);
  CHECK(err.find("malformed JSON") != std::string::npos);
}

TEST_CASE("supcon-asym cannot be combined with prototype distillation") {
  for (const char* s : {"sprd", "hsd"}) {
    const std::string text =
        std::string(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "ablation": {"plasticity": "supcon-asym", "stability": ")") + s +
        "\"}}";
    const std::string err = error_of(text);
    CHECK(err.find("ablation.stability") != std::string::npos);
  }
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "ablation": {"plasticity": "supcon-asym", "stability": "ird"}})")
            .empty());
}

TEST_CASE("warm-up must fit inside the later-task epochs") {
  CHECK(error_of(R"({"seeds": [0], "stream": {"tasks": 3, "classes_per_task": 2, "samples_per_class": 20, "input_dim": 8}, "train": {"epochs_later": 5, "warmup_epochs": 6}})")
            .find("train.warmup_epochs") != std::string::npos);
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("0,1,2") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(parse_seed_list("0-4") == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(parse_seed_list("7,2-3") == std::vector<std::uint64_t>{7, 2, 3});
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("a"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("4-2"), ConfigError);
}

TEST_CASE("the data seed follows the run seed unless fixed") {
  ExperimentConfig c = parse_config(R"({"seeds": [0], "stream": {"tasks": 2, "classes_per_task": 2, "samples_per_class": 10, "input_dim": 8}})");
  const TaskStream a = build_stream(c, 1);
  const TaskStream b = build_stream(c, 2);
  CHECK_FALSE(a.task(1).train[0].x == b.task(1).train[0].x);
  c.stream.data_seed = 5;
  CHECK(build_stream(c, 1).task(1).train[0].x == build_stream(c, 2).task(1).train[0].x);
  CHECK(train_config_for_seed(c, 8).seed == 8);
}
