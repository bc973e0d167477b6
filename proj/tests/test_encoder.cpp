#include "ncl/encoder.hpp"
#include "ncl/losses.hpp"
#include "ncl/reference.hpp"

#include <doctest.h>

#include <filesystem>

using namespace ncl;

namespace {

MlpShape small_shape() { return {{20, 32, 16}, 8}; }

Matrix random_inputs(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed, 1);
  return gaussian_matrix<double>(rows, cols, rng);
}

double weight(const MlpParams& p, std::size_t l, Eigen::Index i, Eigen::Index j) { return p.layers[l].weight(i, j); }

}  // namespace

TEST_CASE("initialization is deterministic with zero biases") {
  const auto a = init_params(small_shape(), 1);
  const auto b = init_params(small_shape(), 1);
  CHECK(a == b);
  CHECK_FALSE(a == init_params(small_shape(), 2));
  CHECK(a.layers.size() == 4);
  CHECK(a.backbone_layers == 2);
  CHECK(a.output_dim() == 8);
  CHECK(a.feature_dim() == 16);
  for (const auto& layer : a.layers) CHECK(layer.bias.isZero(0.0));
  CHECK(a.layers.back().activation == Activation::identity);
}

TEST_CASE("initial weight spread follows 1/sqrt(fan_in)") {
  const auto p = init_params({{400, 25, 4}, 4}, 3);
  const Matrix& w = p.layers[0].weight;  // 10k entries
  REQUIRE(w.size() == 10000);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size() - 1));
  CHECK(std::abs(sd - 1.0 / 20.0) < 0.1 / 20.0);
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(init_params({{}, 8}, 0), ConfigError);
  CHECK_THROWS_AS(init_params({{20}, 8}, 0), ConfigError);
  CHECK_THROWS_AS(init_params({{20, 0}, 8}, 0), ConfigError);
  CHECK_THROWS_AS(init_params({{20, 16}, 0}, 0), ConfigError);
  const auto p = init_params(small_shape(), 0);
  CHECK_THROWS_AS(forward(p, random_inputs(3, 19, 0)), ShapeError);
  MlpParams broken = p;
  broken.layers.pop_back();
  CHECK_THROWS_AS(broken.validate(), ShapeError);
}

TEST_CASE("embeddings have unit norm") {
  const auto p = init_params(small_shape(), 4);
  const auto pass = forward(p, 5.0 * random_inputs(50, 20, 4));
  for (Eigen::Index i = 0; i < pass.embeddings.rows(); ++i)
    CHECK(std::abs(pass.embeddings.row(i).norm() - 1.0) < 1e-9);
  CHECK(pass.embeddings == embed(p, 5.0 * random_inputs(50, 20, 4)));
}

TEST_CASE("all-zero parameters map to the canonical direction") {
  auto p = init_params(small_shape(), 5);
  for (auto& layer : p.layers) layer.weight.setZero();
  const Matrix z = embed(p, random_inputs(4, 20, 5));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    CHECK(z(i, 0) == 1.0);
    CHECK(z.row(i).norm() == 1.0);
  }
}

TEST_CASE("features expose the backbone or the projector") {
  const auto p = init_params(small_shape(), 6);
  const Matrix x = random_inputs(5, 20, 6);
  CHECK(features(p, x, FeatureSource::backbone).cols() == 16);
  CHECK(features(p, x, FeatureSource::backbone).minCoeff() >= 0.0);
  CHECK(features(p, x, FeatureSource::projector) == embed(p, x));
}

TEST_CASE("normalization gradient is orthogonal to the embedding") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = init_params({{10, 12, 9}, 6}, seed);
    const auto pass = forward(p, random_inputs(7, 10, seed));
    Rng rng = make_rng(seed, 2);
    const Matrix g = normalization_backward(pass.cache, gaussian_matrix<double>(7, 6, rng));
    for (Eigen::Index i = 0; i < 7; ++i) CHECK(std::abs(g.row(i).dot(pass.embeddings.row(i))) < 1e-9);
  }
}

TEST_CASE("last-layer gradient is the outer product for one sample") {
  const auto p = init_params({{6, 5, 4}, 3}, 9);
  const Matrix x = random_inputs(1, 6, 9);
  const auto pass = forward(p, x);
  Rng rng = make_rng(9, 3);
  const Matrix gz = gaussian_matrix<double>(1, 3, rng);
  const ParamGradients grads = backward(p, pass.cache, gz);

  // dL/dy for y = W h + b is (g - z (z.g)) / |y|; dL/dW = (dL/dy)^T h.
  const Vector y = pass.cache.raw_output.row(0).transpose();
  const Vector z = y / y.norm();
  const Vector g = gz.row(0).transpose();
  const Vector dy = (g - z * z.dot(g)) / y.norm();
  const Vector h = pass.cache.layer_inputs.back().row(0).transpose();
  const Matrix expected = dy * h.transpose();
  CHECK((grads.weight.back() - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((grads.bias.back() - dy).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("end-to-end parameter gradients match finite differences through fnc2") {
  const auto protos = generate_etf(4, 6, 0);
  const auto map = ClassPrototypeMap::from_stream_order({{0, 1}, {2, 3}});
  const Matrix old = protos.rows(map.vertices_through(1));
  const auto params = init_params({{10, 12, 9}, 6}, 11);
  const Matrix x = random_inputs(8, 10, 11);  // 4 sources, two views each
  const std::vector<ClassId> labels = {2, 3, 2, 3};
  const PlasticityConfig pc{0.5, 1.0};

  auto loss_of = [&](const MlpParams& p) {
    const auto b = make_stacked_batch<double>(embed(p, x), labels);
    return fnc2_loss(b, protos, map, old, pc).value;
  };
  const auto pass = forward(params, x);
  const auto b = make_stacked_batch<double>(pass.embeddings, labels);
  const ParamGradients grads = backward(params, pass.cache, fnc2_loss(b, protos, map, old, pc).grad_z);

  Rng rng = make_rng(11, 4);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto l = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 3)(rng));
    const auto& w = params.layers[l].weight;
    const Eigen::Index i = std::uniform_int_distribution<Eigen::Index>(0, w.rows() - 1)(rng);
    const Eigen::Index j = std::uniform_int_distribution<Eigen::Index>(0, w.cols() - 1)(rng);
    const double h = 1e-6;
    MlpParams plus = params, minus = params;
    plus.layers[l].weight(i, j) += h;
    minus.layers[l].weight(i, j) -= h;
    const double fd = (loss_of(plus) - loss_of(minus)) / (2 * h);
    const double an = grads.weight[l](i, j);
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("zero gradient leaves parameters unchanged and stale caches are rejected") {
  auto p = init_params(small_shape(), 12);
  const auto before = p;
  const auto pass = forward(p, random_inputs(6, 20, 12));
  SgdMomentum opt(0.1, 0.9);
  backward_and_step(p, pass.cache, Matrix::Zero(6, 8), opt);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(p.layers[l].weight == before.layers[l].weight);
    CHECK(p.layers[l].bias == before.layers[l].bias);
  }
  CHECK_THROWS_AS(backward(p, pass.cache, Matrix::Zero(6, 8)), CacheError);
  CHECK_THROWS_AS(SgdMomentum(0.0, 0.5), ConfigError);
  CHECK_THROWS_AS(SgdMomentum(0.1, 1.0), ConfigError);
}

TEST_CASE("momentum accumulates velocity") {
  auto p = init_params({{3, 2, 2}, 2}, 13);
  const double w0 = weight(p, 0, 0, 0);
  ParamGradients g;
  for (const auto& layer : p.layers) {
    g.weight.push_back(Matrix::Zero(layer.out(), layer.in()));
    g.bias.push_back(Vector::Zero(layer.out()));
  }
  g.weight[0](0, 0) = 1.0;
  SgdMomentum opt(0.1, 0.5);
  opt.step(p, g);
  CHECK(weight(p, 0, 0, 0) == doctest::Approx(w0 - 0.1));
  opt.step(p, g);
  CHECK(weight(p, 0, 0, 0) == doctest::Approx(w0 - 0.1 - 0.15));
}

TEST_CASE("training steps are deterministic") {
  auto run = [] {
    auto p = init_params(small_shape(), 14);
    SgdMomentum opt(0.05, 0.9);
    const Matrix x = random_inputs(8, 20, 14);
    for (int s = 0; s < 5; ++s) {
      const auto pass = forward(p, x);
      const auto b = make_stacked_batch<double>(pass.embeddings, {0, 1, 0, 1});
      backward_and_step(p, pass.cache, supcon_loss(b, 0.5).grad_z, opt);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("snapshots are independent deep copies") {
  auto p = init_params(small_shape(), 15);
  const Matrix x = random_inputs(8, 20, 15);
  const ModelSnapshot snap = snapshot(p, 3);
  const MlpParams frozen = snap.params();
  const Matrix z_at_snapshot = embed(p, x);
  CHECK(snap.task() == 3);
  CHECK(embed(snap.params(), x) == z_at_snapshot);

  SgdMomentum opt(0.1, 0.9);
  for (int s = 0; s < 10; ++s) {
    const auto pass = forward(p, x);
    const auto b = make_stacked_batch<double>(pass.embeddings, {0, 1, 0, 1});
    backward_and_step(p, pass.cache, supcon_loss(b, 0.5).grad_z, opt);
  }
  CHECK_FALSE(p == frozen);
  CHECK(snap.params() == frozen);
  CHECK(embed(snap.params(), x) == z_at_snapshot);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto p = init_params(small_shape(), 16);
  p.layers[1].bias(3) = 0.1 + 1e-17;
  const MlpParams back = checkpoint_from_json(checkpoint_json(p));
  CHECK(back.layers.size() == p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(back.layers[l].weight == p.layers[l].weight);
    CHECK(back.layers[l].bias == p.layers[l].bias);
    CHECK(back.layers[l].activation == p.layers[l].activation);
  }
  const auto path = std::filesystem::temp_directory_path() / "ncl_test_checkpoint.json";
  save_checkpoint(p, path);
  const MlpParams loaded = load_checkpoint(path);
  CHECK(embed(loaded, random_inputs(3, 20, 16)) == embed(p, random_inputs(3, 20, 16)));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(checkpoint_from_json("{\"format\": \"other\"}"), FormatError);
  CHECK_THROWS_AS(checkpoint_from_json("not json"), FormatError);
}
