#pragma once

#include "ncl/buffer.hpp"
#include "ncl/encoder.hpp"
#include "ncl/etf.hpp"
#include "ncl/losses.hpp"
#include "ncl/metrics.hpp"
#include "ncl/stream.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ncl {

enum class PlasticityLoss { fnc2, supcon_asym };
enum class StabilityLoss { none, ird, sprd, hsd };
enum class ClassifierMode { linear_probe, nc4 };

std::string to_string(PlasticityLoss p);
std::string to_string(StabilityLoss s);
std::string to_string(ClassifierMode c);
std::string to_string(FeatureSource f);
PlasticityLoss plasticity_from_string(const std::string& s);
StabilityLoss stability_from_string(const std::string& s);
ClassifierMode classifier_from_string(const std::string& s);
FeatureSource feature_source_from_string(const std::string& s);

struct ModelConfig {
  std::vector<int> hidden = {64, 32};
  int embedding_dim = 16;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  ModelConfig model;
  AugmentConfig augment;
  int epochs_first_task = 100;
  int epochs_later = 50;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  PlasticityConfig plasticity;
  /// `epochs` is overwritten per task with that task's epoch count.
  DistillationConfig distill;
  std::size_t buffer_capacity = 0;
  int probe_epochs = 100;
  double probe_lr = 0.1;
  int probe_batch_size = 32;
  std::uint64_t seed = 0;
  ClassifierMode classifier = ClassifierMode::linear_probe;
  FeatureSource probe_features = FeatureSource::backbone;

  PlasticityLoss plasticity_loss = PlasticityLoss::fnc2;
  StabilityLoss stability_loss = StabilityLoss::hsd;
  /// Old-task prototypes as extra negatives in the plasticity loss.
  bool pseudo_replay = true;
  bool skip_degenerate_anchors = false;

  /// Record NC diagnostics of the training embeddings after every epoch.
  bool track_nc = false;
  /// Dump teacher/student relation matrices of each task's last batch as CSV.
  std::optional<std::filesystem::path> relation_dump_dir;
  /// Write an encoder checkpoint after every task.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Write the replay buffer contents after every task.
  std::optional<std::filesystem::path> buffer_dump_dir;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochTrace {
  int task = 0;
  int epoch = 0;
  // Per-view means over the epoch's batches.
  double fnc2 = 0;  // plasticity term (SupCon when that loss is selected)
  double ird = 0;
  double sprd = 0;
  double stability = 0;  // weighted stability term actually optimized
  double total = 0;
  double alpha = 0;
  std::optional<double> nc1;
  std::optional<double> nc2;
};

struct TaskTrainStats {
  int plasticity_calls = 0;
  int ird_calls = 0;
  int sprd_calls = 0;
  int teacher_forwards = 0;
  int anchors_r_above_one = 0;
};

/// Everything one continual run owns.
struct LearnerState {
  MlpParams params;
  PrototypeSet<double> prototypes;
  ClassPrototypeMap map;
  ReplayBuffer buffer;
  std::optional<ModelSnapshot> teacher;
  Rng rng;

  static LearnerState create(const TrainConfig& cfg, const TaskStream& stream);
};

struct TaskOutcome {
  ModelSnapshot snapshot;
  TaskTrainStats stats;
  std::vector<EpochTrace> epochs;
};

/// Representation stage for task t: plasticity loss alone on t = 1, plasticity plus
/// stability against `state.teacher` afterwards. Offers the task's training samples to
/// the replay buffer once training ends. Does not replace `state.teacher`.
TaskOutcome train_task_representation(LearnerState& state, const TaskStream& stream, int t, const TrainConfig& cfg);

/// Multinomial logistic regression on frozen features. Row c of `weight` scores
/// `classes[c]`.
struct LinearProbe {
  Matrix weight;
  Vector bias;
  std::vector<ClassId> classes;

  Vector logits(const Vector& feature) const;
  /// Argmax over `candidates` (all classes when empty), lowest label on ties.
  ClassId predict(const Vector& feature, const std::vector<ClassId>& candidates = {}) const;
};

/// Trains on frozen features of `current.train` ∪ buffer entries only.
LinearProbe train_linear_probe(const MlpParams& frozen, const TaskDataset& current, const ReplayBuffer& buffer,
                               const std::vector<ClassId>& seen_classes, const TrainConfig& cfg, Rng& rng);

/// Nearest prototype by inner product among `candidates`; lowest label wins ties.
ClassId nearest_prototype_class(const Vector& z, const PrototypeSet<double>& prototypes,
                                const ClassPrototypeMap& map, const std::vector<ClassId>& candidates);

ClassId nc4_classify(const MlpParams& frozen, const Vector& x, const PrototypeSet<double>& prototypes,
                     const ClassPrototypeMap& map, const std::vector<ClassId>& candidates);

struct NcSummary {
  int after_task = 0;
  std::vector<ClassId> classes;
  std::vector<double> within_traces;
  double between = 0;
  double nc1 = 0;
  double nc2 = 0;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  Scenario scenario = Scenario::class_il;
  AccuracyMatrix accuracy{1};
  double average_accuracy = 0;
  std::optional<double> average_forgetting;
  std::vector<EpochTrace> epochs;
  std::vector<TaskTrainStats> task_stats;
  std::vector<NcSummary> nc;
};

/// Trains tasks 1..T in order, evaluating every seen task after each one.
MetricsReport run_experiment(const TrainConfig& cfg, const TaskStream& stream);

}  // namespace ncl
