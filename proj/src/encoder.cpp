#include "ncl/encoder.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace ncl {

namespace {

constexpr int kCheckpointVersion = 1;

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw FormatError("checkpoint: unknown activation '" + s + "'");
}

}  // namespace

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("mlp: no layers");
  if (backbone_layers < 1 || static_cast<std::size_t>(backbone_layers) + 2 != layers.size())
    throw ShapeError("mlp: expected backbone layers followed by exactly two projector layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].out()) throw ShapeError("mlp: bias length mismatch");
    if (l > 0 && layers[l].in() != layers[l - 1].out()) throw ShapeError("mlp: layer widths do not chain");
  }
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.backbone_layers != b.backbone_layers || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.activation != y.activation || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
        x.weight != y.weight || x.bias != y.bias)
      return false;
  }
  return true;
}

MlpParams init_params(const MlpShape& shape, std::uint64_t seed) {
  if (shape.backbone_sizes.size() < 2) throw ConfigError("mlp: need an input width and at least one backbone layer");
  if (shape.output_dim < 1) throw ConfigError("mlp: output dimension must be >= 1");
  for (int s : shape.backbone_sizes)
    if (s < 1) throw ConfigError("mlp: layer sizes must be >= 1");

  std::vector<int> widths = shape.backbone_sizes;
  const int feature = widths.back();
  widths.push_back(feature);
  widths.push_back(shape.output_dim);

  Rng rng = make_rng(seed, 0x4D4C50);
  MlpParams p;
  p.backbone_layers = static_cast<int>(shape.backbone_sizes.size()) - 1;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.weight = gaussian_matrix<double>(widths[l + 1], widths[l], rng, 1.0 / std::sqrt(double(widths[l])));
    layer.bias = Vector::Zero(widths[l + 1]);
    layer.activation = (l + 2 == widths.size()) ? Activation::identity : Activation::relu;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ForwardPass forward(const MlpParams& params, const Matrix& inputs) {
  params.validate();
  if (inputs.cols() != params.input_dim())
    throw ShapeError("forward: input width " + std::to_string(inputs.cols()) + " != " +
                     std::to_string(params.input_dim()));
  ForwardCache cache;
  cache.generation = params.generation;
  Matrix h = inputs;
  for (const auto& layer : params.layers) {
    cache.layer_inputs.push_back(h);
    Matrix pre = (h * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    h = layer.activation == Activation::relu ? Matrix(pre.cwiseMax(0.0)) : pre;
    cache.pre_activations.push_back(std::move(pre));
  }
  cache.raw_output = h;
  cache.raw_norms = h.rowwise().norm();
  Matrix z(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (cache.raw_norms(i) > 0) {
      z.row(i) = h.row(i) / cache.raw_norms(i);
    } else {
      z.row(i).setZero();
      z(i, 0) = 1.0;  // canonical direction for an all-zero output
    }
  }
  cache.embeddings = z;
  return {std::move(z), std::move(cache)};
}

Matrix embed(const MlpParams& params, const Matrix& inputs) { return forward(params, inputs).embeddings; }

Matrix features(const MlpParams& params, const Matrix& inputs, FeatureSource source) {
  auto pass = forward(params, inputs);
  if (source == FeatureSource::projector) return std::move(pass.embeddings);
  return pass.cache.backbone_features(params);
}

Matrix normalization_backward(const ForwardCache& cache, const Matrix& grad_z) {
  const Matrix& z = cache.embeddings;
  if (grad_z.rows() != z.rows() || grad_z.cols() != z.cols())
    throw ShapeError("backward: gradient shape does not match embeddings");
  Matrix g(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double n = cache.raw_norms(i);
    if (n > 0) {
      g.row(i) = (grad_z.row(i) - z.row(i) * z.row(i).dot(grad_z.row(i))) / n;
    } else {
      g.row(i).setZero();
    }
  }
  return g;
}

ParamGradients backward(const MlpParams& params, const ForwardCache& cache, const Matrix& grad_z) {
  if (cache.generation != params.generation || cache.layer_inputs.size() != params.layers.size())
    throw CacheError("backward: forward cache is stale or belongs to another model");
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    if (cache.layer_inputs[l].cols() != params.layers[l].in())
      throw CacheError("backward: forward cache does not match the parameter shapes");

  ParamGradients grads;
  grads.weight.resize(params.layers.size());
  grads.bias.resize(params.layers.size());
  Matrix g = normalization_backward(cache, grad_z);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    if (layer.activation == Activation::relu)
      g = g.cwiseProduct((cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    grads.weight[l] = g.transpose() * cache.layer_inputs[l];
    grads.bias[l] = g.colwise().sum().transpose();
    if (l > 0) g = g * layer.weight;
  }
  return grads;
}

SgdMomentum::SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0)) throw ConfigError("sgd: learning rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("sgd: momentum must lie in [0, 1)");
}

void SgdMomentum::step(MlpParams& params, const ParamGradients& grads) {
  if (grads.weight.size() != params.layers.size()) throw ShapeError("sgd: gradient/layer count mismatch");
  if (velocity_w_.empty()) {
    for (const auto& l : params.layers) {
      velocity_w_.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      velocity_b_.push_back(Vector::Zero(l.bias.size()));
    }
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    velocity_w_[l] = momentum_ * velocity_w_[l] + grads.weight[l];
    velocity_b_[l] = momentum_ * velocity_b_[l] + grads.bias[l];
    params.layers[l].weight -= lr_ * velocity_w_[l];
    params.layers[l].bias -= lr_ * velocity_b_[l];
  }
  ++params.generation;
}

void backward_and_step(MlpParams& params, const ForwardCache& cache, const Matrix& grad_z, SgdMomentum& opt) {
  opt.step(params, backward(params, cache, grad_z));
}

std::string checkpoint_json(const MlpParams& params) {
  params.validate();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    layers.push_back({{"in", l.in()},
                      {"out", l.out()},
                      {"activation", activation_name(l.activation)},
                      {"weight", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  nlohmann::json doc{{"format", "ncl-mlp"},
                     {"version", kCheckpointVersion},
                     {"backbone_layers", params.backbone_layers},
                     {"layers", std::move(layers)}};
  return doc.dump();
}

MlpParams checkpoint_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format") != "ncl-mlp") throw FormatError("checkpoint: unexpected format tag");
    if (doc.at("version").get<int>() != kCheckpointVersion) throw FormatError("checkpoint: unsupported version");
    MlpParams p;
    p.backbone_layers = doc.at("backbone_layers").get<int>();
    for (const auto& jl : doc.at("layers")) {
      const auto in = jl.at("in").get<Eigen::Index>();
      const auto out = jl.at("out").get<Eigen::Index>();
      const auto w = jl.at("weight").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
        throw FormatError("checkpoint: layer array sizes do not match header");
      DenseLayer l;
      l.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), out, in);
      l.bias = Eigen::Map<const Vector>(b.data(), out);
      l.activation = activation_from(jl.at("activation").get<std::string>());
      p.layers.push_back(std::move(l));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << checkpoint_json(params) << '\n';
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace ncl
