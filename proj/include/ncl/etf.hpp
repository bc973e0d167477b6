#pragma once

#include "ncl/errors.hpp"
#include "ncl/types.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ncl {

/// K unit vectors in R^d forming a simplex equiangular tight frame, stored one per row.
template <typename Scalar>
class PrototypeSet {
 public:
  PrototypeSet() = default;

  /// Takes ownership of a K x d matrix. Only the shape is checked here; geometry is
  /// checked by verify_etf.
  explicit PrototypeSet(MatrixX<Scalar> vectors) : vectors_(std::move(vectors)) {
    if (vectors_.rows() < 1 || vectors_.cols() < 1)
      throw ShapeError("prototype set needs at least one row and one column");
  }

  Eigen::Index num_classes() const { return vectors_.rows(); }
  Eigen::Index dim() const { return vectors_.cols(); }
  const MatrixX<Scalar>& vectors() const { return vectors_; }
  auto row(Eigen::Index k) const { return vectors_.row(k); }

  /// Rows at the given vertex indices, in order.
  MatrixX<Scalar> rows(std::span<const int> indices) const {
    MatrixX<Scalar> out(static_cast<Eigen::Index>(indices.size()), dim());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= num_classes())
        throw MissingClassError("vertex index " + std::to_string(indices[i]) + " out of range");
      out.row(static_cast<Eigen::Index>(i)) = vectors_.row(indices[i]);
    }
    return out;
  }

  MatrixX<Scalar> gram() const { return vectors_ * vectors_.transpose(); }

  friend bool operator==(const PrototypeSet& a, const PrototypeSet& b) {
    return a.vectors_.rows() == b.vectors_.rows() && a.vectors_.cols() == b.vectors_.cols() &&
           a.vectors_ == b.vectors_;
  }

 private:
  MatrixX<Scalar> vectors_;
};

/// Orthonormal basis of the complement of the all-ones direction in R^K (Helmert basis),
/// returned as a K x (K-1) matrix.
template <typename Scalar>
MatrixX<Scalar> centered_basis(Eigen::Index k) {
  MatrixX<Scalar> v = MatrixX<Scalar>::Zero(k, k - 1);
  for (Eigen::Index j = 0; j < k - 1; ++j) {
    const Scalar m = static_cast<Scalar>(j + 1);
    const Scalar scale = Scalar(1) / std::sqrt(m * (m + 1));
    v.col(j).head(j + 1).setConstant(scale);
    v(j + 1, j) = -m * scale;
  }
  return v;
}

/// Builds sqrt(K/(K-1)) U (I - 11^T/K) with U the orthonormalized columns of a seeded
/// Gaussian matrix, and returns its columns as rows.
///
/// When K <= d, U is d x K as in the textbook construction. When K = d + 1 no such U
/// exists, so the centering projector is factored as V V^T with V an orthonormal basis of
/// 1_K's complement and U is taken d x (K-1); the product has the same Gram matrix.
template <typename Scalar = double>
PrototypeSet<Scalar> generate_etf(int num_classes, int dim, std::uint64_t seed) {
  if (num_classes < 2) throw DomainError("ETF needs at least two classes");
  if (dim < 1) throw DomainError("ETF dimension must be positive");
  if (num_classes > dim + 1)
    throw DimensionError("ETF with " + std::to_string(num_classes) + " vertices needs d >= " +
                         std::to_string(num_classes - 1) + ", got d = " + std::to_string(dim));

  const Eigen::Index k = num_classes;
  const Eigen::Index d = dim;
  const Scalar scale = std::sqrt(static_cast<Scalar>(k) / static_cast<Scalar>(k - 1));
  Rng rng = make_rng(seed, 0xE7F);

  MatrixX<Scalar> q;  // d x K
  if (k <= d) {
    MatrixX<Scalar> g = gaussian_matrix<Scalar>(d, k, rng);
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
    MatrixX<Scalar> u = qr.householderQ() * MatrixX<Scalar>::Identity(d, k);
    MatrixX<Scalar> centering = MatrixX<Scalar>::Identity(k, k);
    centering.array() -= Scalar(1) / static_cast<Scalar>(k);
    q = scale * u * centering;
  } else {
    MatrixX<Scalar> g = gaussian_matrix<Scalar>(d, k - 1, rng);
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
    MatrixX<Scalar> u = qr.householderQ() * MatrixX<Scalar>::Identity(d, k - 1);
    q = scale * u * centered_basis<Scalar>(k).transpose();
  }
  return PrototypeSet<Scalar>(q.transpose());
}

/// Largest deviation of the set from unit norms and -1/(K-1) pairwise inner products.
template <typename Scalar>
Scalar etf_geometry_error(const PrototypeSet<Scalar>& set) {
  const Eigen::Index k = set.num_classes();
  if (k < 2) return Scalar(0);
  const MatrixX<Scalar> g = set.gram();
  const Scalar off = Scalar(-1) / static_cast<Scalar>(k - 1);
  Scalar worst = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    worst = std::max(worst, std::abs(std::sqrt(g(i, i)) - Scalar(1)));
    for (Eigen::Index j = 0; j < k; ++j)
      if (i != j) worst = std::max(worst, std::abs(g(i, j) - off));
  }
  return worst;
}

template <typename Scalar>
bool verify_etf(const PrototypeSet<Scalar>& set, Scalar tol) {
  return etf_geometry_error(set) <= tol;
}

/// Global class label -> ETF vertex, assigned in order of first appearance in the stream.
class ClassPrototypeMap {
 public:
  /// Registers `label` as introduced at `task` (1-based). Returns its vertex index.
  /// A label seen before keeps its vertex.
  int assign(int task, ClassId label);

  /// Builds the map task by task from labels in stream order.
  static ClassPrototypeMap from_stream_order(const std::vector<std::vector<ClassId>>& labels_per_task);

  int vertex_of(ClassId label) const;
  bool contains(ClassId label) const { return class_to_vertex_.contains(label); }
  int size() const { return static_cast<int>(class_to_vertex_.size()); }
  int num_tasks() const { return static_cast<int>(task_vertices_.size()); }

  /// Vertices introduced at task t (1-based).
  const std::vector<int>& task_vertices(int task) const;
  /// Vertices of every class introduced at tasks 1..t, ascending. Empty for t = 0.
  std::vector<int> vertices_through(int task) const;
  /// Labels introduced at tasks 1..t, ascending by label.
  std::vector<ClassId> classes_through(int task) const;
  const std::map<ClassId, int>& class_to_vertex() const { return class_to_vertex_; }

 private:
  std::map<ClassId, int> class_to_vertex_;
  std::vector<std::vector<int>> task_vertices_;
};

/// Row of `set` assigned to `label`.
template <typename Scalar>
auto prototype_for_class(const ClassPrototypeMap& map, const PrototypeSet<Scalar>& set, ClassId label) {
  const int v = map.vertex_of(label);
  if (v >= set.num_classes())
    throw MissingClassError("vertex " + std::to_string(v) + " not present in prototype set");
  return set.row(v);
}

/// {"k": K, "d": d, "vectors": [[...], ...]}
nlohmann::json to_json(const PrototypeSet<double>& set);
PrototypeSet<double> prototype_set_from_json(const nlohmann::json& doc);

}  // namespace ncl
