#include "ncl/metrics.hpp"
#include "ncl/reference.hpp"
#include "ncl/verify.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace ncl;

namespace {

AccuracyMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix m(static_cast<int>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t k = 0; k < rows[t].size(); ++k) m.set(static_cast<int>(t + 1), static_cast<int>(k + 1), rows[t][k]);
  return m;
}

std::vector<std::vector<double>> random_rows(int t_count, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(t_count));
  for (int t = 0; t < t_count; ++t)
    for (int k = 0; k <= t; ++k) rows[static_cast<std::size_t>(t)].push_back(unit(rng));
  return rows;
}

struct Cloud {
  Matrix features;
  std::vector<ClassId> labels;
};

Cloud random_cloud(int classes, int per_class, int d, std::uint64_t seed) {
  Rng rng = make_rng(seed, 9);
  Cloud c{gaussian_matrix<double>(classes * per_class, d, rng), {}};
  for (int k = 0; k < classes; ++k)
    for (int i = 0; i < per_class; ++i) c.labels.push_back(k);
  return c;
}

}  // namespace

TEST_CASE("average accuracy examples") {
  CHECK(average_accuracy(from_rows({{0.9}, {0.5, 0.5}, {0.8, 0.6, 0.7}})) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(average_accuracy(from_rows({{0.9}})) == 0.9);
  CHECK(average_accuracy(from_rows({{0.25}, {0.25, 0.25}, {0.25, 0.25, 0.25}})) == 0.25);
}

TEST_CASE("forgetting hand example") {
  const AccuracyMatrix m = from_rows({{0.9}, {0.7, 0.8}});
  CHECK(std::abs(average_forgetting(m) - 0.2) < 1e-15);
  CHECK(average_forgetting(m) == 0.9 - 0.7);
}

TEST_CASE("forgetting is zero when accuracy never drops") {
  CHECK(average_forgetting(from_rows({{0.5}, {0.4, 0.7}, {0.5, 0.7, 0.4}})) == 0.0);
}

TEST_CASE("metric formulas agree with loop oracles") {
  Rng rng = make_rng(1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = random_rows(2 + trial % 4, rng);
    const AccuracyMatrix m = from_rows(rows);
    CHECK(std::abs(average_accuracy(m) - reference::average_accuracy(rows)) < 1e-12);
    CHECK(std::abs(average_forgetting(m) - reference::average_forgetting(rows)) < 1e-12);
  }
  CHECK(verify::metrics_suite().passed());
}

TEST_CASE("average accuracy is invariant to permuting the final row") {
  Rng rng = make_rng(3);
  auto rows = random_rows(5, rng);
  const double aa = average_accuracy(from_rows(rows));
  std::reverse(rows.back().begin(), rows.back().end());
  CHECK(std::abs(average_accuracy(from_rows(rows)) - aa) < 1e-12);
}

TEST_CASE("forgetting averages each earlier task's largest drop") {
  const std::vector<std::vector<double>> rows = {{0.9}, {0.6, 0.8}, {0.5, 0.4, 0.7}};
  CHECK(std::abs(average_forgetting(from_rows(rows)) - ((0.9 - 0.5) + (0.8 - 0.4)) / 2) < 1e-12);
  // The order of the earlier tasks' terms does not matter.
  const std::vector<std::vector<double>> reordered = {{0.8}, {0.8, 0.9}, {0.4, 0.5, 0.7}};
  CHECK(std::abs(average_forgetting(from_rows(reordered)) - average_forgetting(from_rows(rows))) < 1e-12);
}

TEST_CASE("accuracy matrix enforces the lower triangle") {
  AccuracyMatrix m(3);
  CHECK_THROWS_AS(m.set(1, 2, 0.5), DomainError);
  CHECK_THROWS_AS(m.set(2, 1, 1.5), DomainError);
  m.set(3, 1, 0.5);
  CHECK_FALSE(m.row_complete(3));
  CHECK_THROWS_AS(average_accuracy(m), IncompleteMatrixError);
  CHECK_THROWS_AS(m.at(2, 2), IncompleteMatrixError);
  CHECK_THROWS_AS(average_forgetting(from_rows({{0.5}})), UndefinedMetricError);
  const auto rows = m.rows();
  CHECK(rows.size() == 3);
  CHECK(rows[2].size() == 3);
  CHECK(std::isnan(rows[2][1]));
}

TEST_CASE("perfect collapse onto the prototypes") {
  const auto protos = generate_etf(4, 8, 0);
  const auto map = ClassPrototypeMap::from_stream_order({{0, 1}, {2, 3}});
  Matrix f(20, 8);
  std::vector<ClassId> labels;
  for (int i = 0; i < 20; ++i) {
    f.row(i) = protos.row(map.vertex_of(i % 4));
    labels.push_back(i % 4);
  }
  const auto r = nc_diagnostics<double>(f, labels, protos, map);
  CHECK(std::abs(r.nc1_score) < 1e-12);
  CHECK(std::abs(r.nc2_score - 1.0) < 1e-12);
}

TEST_CASE("alignment approaches one as within-class noise vanishes") {
  const auto protos = generate_etf(4, 8, 1);
  const auto map = ClassPrototypeMap::from_stream_order({{0, 1, 2, 3}});
  double prev_nc2 = -2;
  for (double sigma : {0.5, 0.1, 0.01, 0.001}) {
    Rng rng = make_rng(2);
    Matrix f = sigma * gaussian_matrix<double>(200, 8, rng);
    std::vector<ClassId> labels;
    for (int i = 0; i < 200; ++i) {
      f.row(i) += protos.row(i % 4);
      labels.push_back(i % 4);
    }
    const double nc2 = nc_diagnostics<double>(f, labels, protos, map).nc2_score;
    CHECK(nc2 >= prev_nc2 - 1e-9);
    prev_nc2 = nc2;
  }
  CHECK(prev_nc2 > 0.9999);
}

TEST_CASE("nc diagnostics agree with the loop oracle") {
  const auto protos = generate_etf(4, 8, 3);
  const auto map = ClassPrototypeMap::from_stream_order({{0, 1}, {2, 3}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Cloud c = random_cloud(4, 50, 8, seed);
    const auto r = nc_diagnostics<double>(c.features, c.labels, protos, map);
    const auto o = reference::nc_scores(c.features, c.labels, protos, map);
    CHECK(std::abs(r.nc1_score - o.nc1) < 1e-10);
    CHECK(std::abs(r.nc2_score - o.nc2) < 1e-10);
    CHECK(std::abs(r.between_mean - o.between_mean) < 1e-10);
    CHECK(std::abs(r.within_traces.mean() - o.within_trace_mean) < 1e-10);
    CHECK(r.nc1_score >= 0);
    CHECK(r.nc2_score >= -1);
    CHECK(r.nc2_score <= 1);
  }
}

TEST_CASE("nc1 is invariant to a joint rotation") {
  const auto protos = generate_etf(4, 8, 4);
  const auto map = ClassPrototypeMap::from_stream_order({{0, 1, 2, 3}});
  const Cloud c = random_cloud(4, 30, 8, 5);
  Rng rng = make_rng(6);
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian_matrix<double>(8, 8, rng)).householderQ();
  const auto rotated = PrototypeSet<double>(protos.vectors() * q);
  const auto a = nc_diagnostics<double>(c.features, c.labels, protos, map);
  const auto b = nc_diagnostics<double>(Matrix(c.features * q), c.labels, rotated, map);
  CHECK(std::abs(a.nc1_score - b.nc1_score) < 1e-10);
  CHECK(std::abs(a.nc2_score - b.nc2_score) < 1e-10);
}

TEST_CASE("nc diagnostics reject singleton classes") {
  const auto protos = generate_etf(2, 4, 0);
  const auto map = ClassPrototypeMap::from_stream_order({{0, 1}});
  Matrix f = Matrix::Identity(3, 4);
  const std::vector<ClassId> labels = {0, 0, 1};
  CHECK_THROWS_AS(nc_diagnostics<double>(f, labels, protos, map), DegenerateClassError);
}
