#pragma once

#include "ncl/errors.hpp"
#include "ncl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ncl {

enum class Activation { relu, identity };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::relu;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

/// Backbone widths [input, hidden..., feature] plus the embedding dimension. The projector
/// is feature -> feature (ReLU) -> output_dim, followed by L2 normalization.
struct MlpShape {
  std::vector<int> backbone_sizes;
  int output_dim = 0;
};

/// Backbone layers followed by exactly two projector layers.
struct MlpParams {
  std::vector<DenseLayer> layers;
  int backbone_layers = 0;
  /// Bumped on every parameter update so stale forward caches can be detected.
  std::uint64_t generation = 0;

  int output_dim() const { return static_cast<int>(layers.back().out()); }
  int input_dim() const { return static_cast<int>(layers.front().in()); }
  int feature_dim() const { return static_cast<int>(layers[static_cast<std::size_t>(backbone_layers - 1)].out()); }
  std::size_t num_parameters() const;

  /// Throws ShapeError unless the layer widths chain and the projector has two layers.
  void validate() const;

  friend bool operator==(const MlpParams& a, const MlpParams& b);
};

/// Scaled-Gaussian weights (std 1/sqrt(fan_in)), zero biases.
MlpParams init_params(const MlpShape& shape, std::uint64_t seed);

struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to layer l
  std::vector<Matrix> pre_activations;
  Matrix raw_output;                 // projector output before normalization
  Vector raw_norms;
  Matrix embeddings;
  std::uint64_t generation = 0;

  const Matrix& backbone_features(const MlpParams& params) const {
    return layer_inputs[static_cast<std::size_t>(params.backbone_layers)];
  }
};

struct ForwardPass {
  Matrix embeddings;  // B x d, unit rows
  ForwardCache cache;
};

ForwardPass forward(const MlpParams& params, const Matrix& inputs);

/// Unit embeddings only.
Matrix embed(const MlpParams& params, const Matrix& inputs);

enum class FeatureSource { backbone, projector };
/// Backbone features (post-ReLU, pre-projector) or unit projector embeddings.
Matrix features(const MlpParams& params, const Matrix& inputs, FeatureSource source);

/// Gradient with respect to the pre-normalization outputs given one for the unit
/// embeddings: (g - z (z . g)) / ||y|| per row.
Matrix normalization_backward(const ForwardCache& cache, const Matrix& grad_z);

struct ParamGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
};

/// Backpropagates d(loss)/d(embeddings) to every weight and bias.
ParamGradients backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_z);

/// SGD with heavy-ball momentum: v <- momentum v + g; w <- w - lr v.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum);

  void step(MlpParams& params, const ParamGradients& grads);
  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::vector<Matrix> velocity_w_;
  std::vector<Vector> velocity_b_;
};

/// backward followed by an optimizer step.
void backward_and_step(MlpParams& params, const ForwardCache& cache, const Matrix& grad_z, SgdMomentum& opt);

/// Frozen copy of the encoder taken after task `task`.
class ModelSnapshot {
 public:
  ModelSnapshot(MlpParams params, int task) : params_(std::move(params)), task_(task) {}

  const MlpParams& params() const { return params_; }
  int task() const { return task_; }

 private:
  MlpParams params_;
  int task_;
};

inline ModelSnapshot snapshot(const MlpParams& params, int task) { return ModelSnapshot(params, task); }

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const MlpParams& params);
MlpParams checkpoint_from_json(const std::string& text);

}  // namespace ncl
