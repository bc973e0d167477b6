#pragma once

#include "ncl/errors.hpp"
#include "ncl/etf.hpp"
#include "ncl/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace ncl {

/// Lower-triangular task accuracy history: at(t, k) is the accuracy on task k after
/// training through task t (both 1-based, k <= t).
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(int num_tasks);

  int num_tasks() const { return num_tasks_; }
  void set(int t, int k, double accuracy);
  double at(int t, int k) const;
  bool has(int t, int k) const;
  bool row_complete(int t) const;

  /// Row-major lower triangle, rows 1..T (each of length t); missing entries are NaN.
  std::vector<std::vector<double>> rows() const;

 private:
  std::size_t index(int t, int k) const;

  int num_tasks_;
  std::vector<std::optional<double>> values_;
};

/// Mean of the last row.
double average_accuracy(const AccuracyMatrix& m);

/// (1/(T-1)) sum_{i<T} max_{i<=t<T} (A_{t,i} - A_{T,i}).
double average_forgetting(const AccuracyMatrix& m);

template <typename Scalar>
struct NCReport {
  std::vector<ClassId> classes;
  MatrixX<Scalar> class_means;       // one row per class, in `classes` order
  VectorX<Scalar> global_mean;       // mean of class means
  MatrixX<Scalar> centered_means;    // (mu_k - mu_G) / ||mu_k - mu_G||
  VectorX<Scalar> within_traces;     // tr(Sigma_V^k)
  Scalar between_mean = 0;           // mean_k ||mu_k - mu_G||^2
  Scalar nc1_score = 0;              // mean within trace / between_mean
  Scalar nc2_score = 0;              // mean_k cos(centered mean, own prototype)
};

/// Within/between collapse ratio and prototype alignment of labelled features.
template <typename Scalar>
NCReport<Scalar> nc_diagnostics(const MatrixX<Scalar>& features, std::span<const ClassId> labels,
                                const PrototypeSet<Scalar>& prototypes, const ClassPrototypeMap& map) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw ShapeError("nc_diagnostics: one label per feature row required");
  if (features.cols() != prototypes.dim()) throw ShapeError("nc_diagnostics: feature/prototype dim mismatch");

  std::map<ClassId, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < features.rows(); ++i) members[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (members.size() < 2) throw DegenerateClassError("nc_diagnostics: need at least two classes");

  NCReport<Scalar> r;
  const auto k = static_cast<Eigen::Index>(members.size());
  const Eigen::Index d = features.cols();
  r.class_means.resize(k, d);
  r.within_traces.resize(k);
  Eigen::Index row = 0;
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2)
      throw DegenerateClassError("nc_diagnostics: class " + std::to_string(label) + " has fewer than two samples");
    r.classes.push_back(label);
    VectorX<Scalar> mu = VectorX<Scalar>::Zero(d);
    for (Eigen::Index i : idx) mu += features.row(i).transpose();
    mu /= static_cast<Scalar>(idx.size());
    Scalar trace = 0;
    for (Eigen::Index i : idx) trace += (features.row(i).transpose() - mu).squaredNorm();
    r.class_means.row(row) = mu.transpose();
    r.within_traces(row) = trace / static_cast<Scalar>(idx.size());
    ++row;
  }

  r.global_mean = r.class_means.colwise().mean().transpose();
  const MatrixX<Scalar> centered = r.class_means.rowwise() - r.global_mean.transpose();
  const VectorX<Scalar> norms = centered.rowwise().norm();
  r.between_mean = norms.squaredNorm() / static_cast<Scalar>(k);
  r.centered_means = norms.minCoeff() > 0 ? MatrixX<Scalar>(norms.cwiseInverse().asDiagonal() * centered)
                                          : MatrixX<Scalar>(MatrixX<Scalar>::Zero(k, d));
  r.nc1_score = r.within_traces.mean() / r.between_mean;

  Scalar cos_sum = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto p = prototype_for_class(map, prototypes, r.classes[static_cast<std::size_t>(c)]);
    cos_sum += r.centered_means.row(c).dot(p) / p.norm();
  }
  r.nc2_score = cos_sum / static_cast<Scalar>(k);
  return r;
}

}  // namespace ncl
