#include "ncl/etf.hpp"

#include <doctest.h>

using namespace ncl;

namespace {

Matrix expected_gram(int k) {
  Matrix g = Matrix::Constant(k, k, -1.0 / (k - 1));
  g.diagonal().setOnes();
  return g;
}

}  // namespace

TEST_CASE("antipodal pair for two classes") {
  const auto set = generate_etf(2, 2, 7);
  CHECK(set.row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(set.row(1).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(set.row(0).dot(set.row(1)) + 1.0) < 1e-12);
}

TEST_CASE("three classes in the plane meet at -1/2") {
  const auto set = generate_etf(3, 2, 7);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) CHECK(std::abs(set.row(i).dot(set.row(j)) + 0.5) < 1e-12);
}

TEST_CASE("too many vertices for the dimension is rejected") {
  CHECK_THROWS_AS(generate_etf(4, 2, 7), DimensionError);
  CHECK_THROWS_AS(generate_etf(1, 4, 7), DomainError);
}

TEST_CASE("gram matrix matches the simplex form over the supported range") {
  for (int k : {2, 3, 10, 50})
    for (int d : {k - 1, k, std::max(k - 1, 8), k + 5}) {
      if (d < 1) continue;
      const auto set = generate_etf(k, d, 11);
      CHECK(set.num_classes() == k);
      CHECK(set.dim() == d);
      CHECK((set.gram() - expected_gram(k)).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(verify_etf(set, 1e-9));
    }
}

TEST_CASE("generation is deterministic per seed and rotation-free across seeds") {
  const auto a = generate_etf(10, 12, 3);
  const auto b = generate_etf(10, 12, 3);
  const auto c = generate_etf(10, 12, 4);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK((a.gram() - c.gram()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("verify_etf rejects a scaled or duplicated row") {
  const auto set = generate_etf(5, 8, 1);
  CHECK(verify_etf(set, 1e-8));

  Matrix scaled = set.vectors();
  scaled.row(2) *= 1.01;
  CHECK_FALSE(verify_etf(PrototypeSet<double>(scaled), 1e-8));

  Matrix duplicated = set.vectors();
  duplicated.row(3) = duplicated.row(0);
  CHECK_FALSE(verify_etf(PrototypeSet<double>(duplicated), 1e-8));
}

TEST_CASE("float instantiation keeps the geometry at single precision") {
  const auto set = generate_etf<float>(6, 8, 2);
  CHECK(etf_geometry_error(set) < 1e-5f);
}

TEST_CASE("class map assigns vertices in order of first appearance") {
  ClassPrototypeMap map = ClassPrototypeMap::from_stream_order({{4, 7}, {1, 9}, {3, 0}});
  CHECK(map.size() == 6);
  CHECK(map.num_tasks() == 3);
  CHECK(map.vertex_of(4) == 0);
  CHECK(map.vertex_of(7) == 1);
  CHECK(map.vertex_of(1) == 2);
  CHECK(map.vertex_of(0) == 5);
  CHECK(map.task_vertices(2) == std::vector<int>{2, 3});
  CHECK(map.vertices_through(0).empty());
  CHECK(map.vertices_through(2) == std::vector<int>{0, 1, 2, 3});
  CHECK(map.classes_through(2) == std::vector<ClassId>{1, 4, 7, 9});
  CHECK(map.assign(3, 4) == 0);
  CHECK(map.size() == 6);
}

TEST_CASE("prototype lookup returns the stored row exactly") {
  const auto set = generate_etf(10, 12, 5);
  ClassPrototypeMap map = ClassPrototypeMap::from_stream_order({{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}});
  CHECK(Vector(prototype_for_class(map, set, 0).transpose()) == Vector(set.row(0).transpose()));
  for (ClassId c = 0; c < 10; ++c)
    CHECK(Vector(prototype_for_class(map, set, c).transpose()) == Vector(set.row(map.vertex_of(c)).transpose()));
  CHECK_THROWS_AS(prototype_for_class(map, set, 42), MissingClassError);
}

TEST_CASE("prototype sets round-trip through JSON bit-exactly") {
  const auto set = generate_etf(7, 9, 13);
  const nlohmann::json doc = to_json(set);
  CHECK(doc.at("k") == 7);
  CHECK(doc.at("d") == 9);
  CHECK(prototype_set_from_json(nlohmann::json::parse(doc.dump())) == set);
}
