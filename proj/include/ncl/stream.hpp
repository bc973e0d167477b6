#pragma once

#include "ncl/buffer.hpp"
#include "ncl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ncl {

enum class Scenario { class_il, task_il };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct TaskDataset {
  int task = 0;  // 1-based
  std::vector<ClassId> classes;  // in order of first appearance
  std::vector<Sample> train;
  std::vector<Sample> test;
};

struct TaskStream {
  std::vector<TaskDataset> tasks;
  Scenario scenario = Scenario::class_il;
  int input_dim = 0;

  int num_tasks() const { return static_cast<int>(tasks.size()); }
  const TaskDataset& task(int t) const { return tasks.at(static_cast<std::size_t>(t - 1)); }
  int num_classes() const;
  /// Class labels per task, in stream order.
  std::vector<std::vector<ClassId>> classes_per_task() const;
  /// Task-IL evaluation may use task ids; class-IL may not.
  bool task_id_available_at_test() const { return scenario == Scenario::task_il; }

  /// Throws ProtocolError on overlapping class sets, empty tasks, or bad task numbering.
  void validate() const;
};

struct SyntheticStreamConfig {
  int tasks = 3;
  int classes_per_task = 2;
  int samples_per_class = 100;
  int input_dim = 20;
  double cluster_spread = 0.4;
  /// Class means lie in a shared random subspace of this rank; 0 uses all of R^D.
  int mean_rank = 0;
  std::uint64_t seed = 0;
  Scenario scenario = Scenario::class_il;

  friend bool operator==(const SyntheticStreamConfig&, const SyntheticStreamConfig&) = default;
};

/// Gaussian clusters around seeded random unit-norm means; 80/20 train/test split per class.
TaskStream make_synthetic_stream(const SyntheticStreamConfig& cfg);

/// CSV with header `task,label,split,x0..x{D-1}`, split in {train, test}.
TaskStream load_csv_stream(const std::filesystem::path& path, Scenario scenario = Scenario::class_il);
void write_csv_stream(const TaskStream& stream, const std::filesystem::path& path);

struct AugmentConfig {
  double noise_std = 0.05;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  bool rotation = false;
  /// Rotation angle is drawn from [-max_rotation, max_rotation] radians.
  double max_rotation = 0.5235987755982988;

  void validate() const;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// x -> R(s x) + noise, applied independently twice.
std::pair<Vector, Vector> augment_two_views(const Vector& x, const AugmentConfig& cfg, Rng& rng);

/// Two views per drawn source, stacked [first views; second views].
struct ViewBatch {
  Matrix inputs;
  std::vector<ClassId> labels;
  std::vector<int> view_pair;
  std::vector<bool> is_anchor;
  int num_sources = 0;

  int size() const { return static_cast<int>(inputs.rows()); }
};

/// One epoch of mini-batches over the current task's training data mixed with the buffer.
/// Buffer-origin views are flagged non-anchor.
class TaskBatcher {
 public:
  TaskBatcher(const TaskDataset& dataset, const ReplayBuffer& buffer, int batch_size, AugmentConfig augment,
              Rng& rng);

  /// ceil(|train ∪ buffer| / batch_size), so every current sample is drawn at least
  /// once per epoch in expectation.
  int batches_per_epoch() const { return batches_; }
  std::optional<ViewBatch> next();

 private:
  const TaskDataset& dataset_;
  const ReplayBuffer& buffer_;
  int batch_size_;
  AugmentConfig augment_;
  Rng& rng_;
  int batches_;
  int emitted_ = 0;
};

inline TaskBatcher task_batches(const TaskDataset& dataset, const ReplayBuffer& buffer, int batch_size,
                                const AugmentConfig& augment, Rng& rng) {
  return TaskBatcher(dataset, buffer, batch_size, augment, rng);
}

/// Stacks sample inputs into rows.
Matrix stack_inputs(const std::vector<Sample>& samples);

}  // namespace ncl
