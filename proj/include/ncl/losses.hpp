#pragma once

// Contrastive and relation-distillation losses over unit embeddings.
//
// Every loss returns its value together with the analytic gradient with respect to the
// embedding rows z (not the pre-normalization outputs; the encoder owns that chain rule).
// Values are sums over the views of a batch, not means.

#include "ncl/errors.hpp"
#include "ncl/etf.hpp"
#include "ncl/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ncl {

/// 2N views: two augmented views per source sample, rows of z on the unit sphere.
template <typename Scalar>
struct EmbeddingBatch {
  MatrixX<Scalar> z;
  std::vector<ClassId> labels;
  std::vector<int> view_pair;
  /// False for replay-buffer views; those never act as anchors or positives.
  std::vector<bool> is_anchor;

  Eigen::Index size() const { return z.rows(); }
  Eigen::Index num_sources() const { return z.rows() / 2; }
};

/// Pairing i <-> i + n for a batch laid out as [first views; second views].
inline std::vector<int> stacked_view_pairs(int num_sources) {
  std::vector<int> pair(static_cast<std::size_t>(2 * num_sources));
  for (int i = 0; i < num_sources; ++i) {
    pair[static_cast<std::size_t>(i)] = i + num_sources;
    pair[static_cast<std::size_t>(i + num_sources)] = i;
  }
  return pair;
}

/// Shape, pairing, and label checks. Norms are not checked here so that perturbed
/// batches (finite differences) can be evaluated.
template <typename Scalar>
void check_batch_structure(const EmbeddingBatch<Scalar>& b) {
  const auto m = static_cast<std::size_t>(b.size());
  if (b.labels.size() != m || b.view_pair.size() != m || b.is_anchor.size() != m)
    throw ShapeError("embedding batch: labels/view_pair/is_anchor must have one entry per row");
  for (std::size_t i = 0; i < m; ++i) {
    const int j = b.view_pair[i];
    if (j < 0 || static_cast<std::size_t>(j) >= m || static_cast<std::size_t>(j) == i ||
        static_cast<std::size_t>(b.view_pair[static_cast<std::size_t>(j)]) != i)
      throw ShapeError("embedding batch: view_pair must be a fixed-point-free involution");
    if (b.labels[i] != b.labels[static_cast<std::size_t>(j)])
      throw ShapeError("embedding batch: paired views must share a label");
  }
}

/// Full invariant check, including unit norms within `norm_tol`.
template <typename Scalar>
void validate_batch(const EmbeddingBatch<Scalar>& b, Scalar norm_tol = Scalar(1e-7)) {
  check_batch_structure(b);
  for (Eigen::Index i = 0; i < b.size(); ++i)
    if (std::abs(b.z.row(i).norm() - Scalar(1)) > norm_tol)
      throw DomainError("embedding batch: row " + std::to_string(i) + " is not unit norm");
}

/// Builds a batch where every view is an anchor and views are stacked [first; second].
template <typename Scalar>
EmbeddingBatch<Scalar> make_stacked_batch(MatrixX<Scalar> z, std::vector<ClassId> source_labels,
                                          std::vector<bool> source_is_anchor = {}) {
  const int n = static_cast<int>(source_labels.size());
  if (z.rows() != 2 * n) throw ShapeError("stacked batch: expected 2N rows");
  if (source_is_anchor.empty()) source_is_anchor.assign(static_cast<std::size_t>(n), true);
  EmbeddingBatch<Scalar> b;
  b.z = std::move(z);
  b.labels.reserve(static_cast<std::size_t>(2 * n));
  b.is_anchor.reserve(static_cast<std::size_t>(2 * n));
  for (int rep = 0; rep < 2; ++rep)
    for (int i = 0; i < n; ++i) {
      b.labels.push_back(source_labels[static_cast<std::size_t>(i)]);
      b.is_anchor.push_back(source_is_anchor[static_cast<std::size_t>(i)]);
    }
  b.view_pair = stacked_view_pairs(n);
  validate_batch(b);
  return b;
}

struct PlasticityConfig {
  double tau = 0.5;
  double gamma = 1.0;

  void validate() const {
    if (!(tau > 0) || !std::isfinite(tau)) throw ConfigError("tau must be > 0");
    if (!(gamma >= 0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  }

  friend bool operator==(const PlasticityConfig&, const PlasticityConfig&) = default;
};

struct DistillationConfig {
  double kappa_past = 0.01;
  double kappa_current = 0.2;
  double zeta_past = 0.01;
  double zeta_current = 0.2;
  int warmup_epochs = 30;
  int epochs = 100;

  void validate() const {
    for (double t : {kappa_past, kappa_current, zeta_past, zeta_current})
      if (!(t > 0) || !std::isfinite(t)) throw ConfigError("distillation temperatures must be > 0");
    if (warmup_epochs < 0 || warmup_epochs > epochs)
      throw ConfigError("warm-up epochs must satisfy 0 <= e0 <= E");
  }

  friend bool operator==(const DistillationConfig&, const DistillationConfig&) = default;
};

struct ContrastiveOptions {
  /// Anchors without positives are dropped instead of raising DegenerateAnchorError.
  bool skip_degenerate_anchors = false;
};

template <typename Scalar>
struct LossOutput {
  Scalar value = 0;
  MatrixX<Scalar> grad_z;

  // Per-view breakdown for the contrastive losses (zero for non-anchors):
  // positive_part[i] = sum_j w(c_ij) log c_ij over positives, prototype_part[i] the
  // r-term, num_positives[i] = |P(i)|.
  VectorX<Scalar> positive_part;
  VectorX<Scalar> prototype_part;
  std::vector<int> num_positives;
  /// Anchors whose r_i exceeded 1 (own prototype term is not in the denominator).
  int anchors_r_above_one = 0;
};

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(const VectorX<Scalar>& v) {
  if (v.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

/// Row i of `logits` with the diagonal entry removed, in column order.
template <typename Scalar>
VectorX<Scalar> off_diagonal_row(const MatrixX<Scalar>& logits, Eigen::Index i) {
  const Eigen::Index m = logits.cols();
  VectorX<Scalar> out(m - 1);
  for (Eigen::Index k = 0, o = 0; k < m; ++k)
    if (k != i) out(o++) = logits(i, k);
  return out;
}

template <typename Scalar>
std::vector<Eigen::Index> positives_of(const EmbeddingBatch<Scalar>& b, Eigen::Index i) {
  std::vector<Eigen::Index> pos;
  for (Eigen::Index p = 0; p < b.size(); ++p)
    if (p != i && b.is_anchor[static_cast<std::size_t>(p)] &&
        b.labels[static_cast<std::size_t>(p)] == b.labels[static_cast<std::size_t>(i)])
      pos.push_back(p);
  return pos;
}

inline bool is_integral(double x) { return std::floor(x) == x; }

/// (1 - x)^gamma * log x, with x = exp(log_x).
template <typename Scalar>
Scalar focal_term(Scalar x, Scalar log_x, Scalar gamma) {
  return std::pow(Scalar(1) - x, gamma) * log_x;
}

/// d/d(log x) of focal_term.
template <typename Scalar>
Scalar focal_term_dlog(Scalar x, Scalar log_x, Scalar gamma) {
  Scalar d = std::pow(Scalar(1) - x, gamma);
  if (gamma != Scalar(0) && log_x != Scalar(0))
    d -= gamma * x * std::pow(Scalar(1) - x, gamma - Scalar(1)) * log_x;
  return d;
}

}  // namespace detail

/// Row-softmax of z_i . z_k / temperature over k != i (diagonal left at zero).
template <typename Scalar>
MatrixX<Scalar> instance_relations(const MatrixX<Scalar>& z, Scalar temperature) {
  const Eigen::Index m = z.rows();
  const MatrixX<Scalar> logits = (z * z.transpose()) / temperature;
  MatrixX<Scalar> o = MatrixX<Scalar>::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar lse = detail::log_sum_exp(detail::off_diagonal_row(logits, i));
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) o(i, k) = std::exp(logits(i, k) - lse);
  }
  return o;
}

/// Row-softmax of z_i . p_s / temperature over the S prototype rows.
template <typename Scalar>
MatrixX<Scalar> prototype_relations(const MatrixX<Scalar>& z, const MatrixX<Scalar>& prototypes,
                                    Scalar temperature) {
  MatrixX<Scalar> logits = (z * prototypes.transpose()) / temperature;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    VectorX<Scalar> row = logits.row(i).transpose();
    const Scalar lse = detail::log_sum_exp(row);
    logits.row(i) = (row.array() - lse).exp().matrix().transpose();
  }
  return logits;
}

/// Supervised contrastive loss. Only anchor views contribute terms; non-anchor views
/// appear in every denominator.
template <typename Scalar>
LossOutput<Scalar> supcon_loss(const EmbeddingBatch<Scalar>& batch, Scalar tau,
                               const ContrastiveOptions& opts = {}) {
  check_batch_structure(batch);
  if (!(tau > 0)) throw ConfigError("tau must be > 0");
  const Eigen::Index m = batch.size();
  if (m < 2) throw EmptyBatchError("supcon: need at least two views");

  const MatrixX<Scalar> logits = (batch.z * batch.z.transpose()) / tau;
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(m, m);  // dL / d(z_i . z_k), row = anchor

  LossOutput<Scalar> out;
  out.positive_part = VectorX<Scalar>::Zero(m);
  out.prototype_part = VectorX<Scalar>::Zero(m);
  out.num_positives.assign(static_cast<std::size_t>(m), 0);

  int anchors = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!batch.is_anchor[static_cast<std::size_t>(i)]) continue;
    const auto pos = detail::positives_of(batch, i);
    if (pos.empty()) {
      if (opts.skip_degenerate_anchors) continue;
      throw DegenerateAnchorError("supcon: anchor " + std::to_string(i) + " has no positive");
    }
    ++anchors;
    const Scalar lse = detail::log_sum_exp(detail::off_diagonal_row(logits, i));
    const Scalar inv_pos = Scalar(1) / static_cast<Scalar>(pos.size());
    Scalar log_sum = 0;
    for (Eigen::Index p : pos) log_sum += logits(i, p) - lse;
    out.positive_part(i) = log_sum;
    out.num_positives[static_cast<std::size_t>(i)] = static_cast<int>(pos.size());
    out.value += -inv_pos * log_sum;

    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) g(i, k) = std::exp(logits(i, k) - lse) / tau;
    for (Eigen::Index p : pos) g(i, p) -= inv_pos / tau;
  }
  if (anchors == 0) throw EmptyBatchError("supcon: no anchors in batch");

  out.grad_z = (g + g.transpose()) * batch.z;
  return out;
}

/// Focal contrastive loss with fixed-prototype attraction. `old_prototypes` (possibly
/// zero rows) are the vertices of earlier tasks; they enter every anchor's denominator as
/// negatives. The anchor's own prototype is looked up through `map`.
template <typename Scalar>
LossOutput<Scalar> fnc2_loss(const EmbeddingBatch<Scalar>& batch, const PrototypeSet<Scalar>& prototypes,
                             const ClassPrototypeMap& map, const MatrixX<Scalar>& old_prototypes,
                             const PlasticityConfig& cfg, const ContrastiveOptions& opts = {}) {
  check_batch_structure(batch);
  cfg.validate();
  const Eigen::Index m = batch.size();
  const Eigen::Index d = batch.z.cols();
  if (prototypes.dim() != d) throw ShapeError("fnc2: prototype dimension differs from embeddings");
  if (old_prototypes.rows() > 0 && old_prototypes.cols() != d)
    throw ShapeError("fnc2: old prototype dimension differs from embeddings");

  const Scalar tau = static_cast<Scalar>(cfg.tau);
  const Scalar gamma = static_cast<Scalar>(cfg.gamma);
  const Eigen::Index num_old = old_prototypes.rows();

  // Own prototype of every anchor view; non-anchors keep a zero row.
  MatrixX<Scalar> own = MatrixX<Scalar>::Zero(m, d);
  int anchors = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!batch.is_anchor[static_cast<std::size_t>(i)]) continue;
    own.row(i) = prototype_for_class(map, prototypes, batch.labels[static_cast<std::size_t>(i)]);
    ++anchors;
  }
  if (anchors == 0) throw EmptyBatchError("fnc2: no anchors in batch");

  const MatrixX<Scalar> logits = (batch.z * batch.z.transpose()) / tau;
  const MatrixX<Scalar> old_logits =
      num_old > 0 ? MatrixX<Scalar>((batch.z * old_prototypes.transpose()) / tau) : MatrixX<Scalar>(m, 0);
  const VectorX<Scalar> own_logits = (batch.z.cwiseProduct(own)).rowwise().sum() / tau;

  MatrixX<Scalar> g_pair = MatrixX<Scalar>::Zero(m, m);
  MatrixX<Scalar> g_old = MatrixX<Scalar>::Zero(m, num_old);
  VectorX<Scalar> g_own = VectorX<Scalar>::Zero(m);

  LossOutput<Scalar> out;
  out.positive_part = VectorX<Scalar>::Zero(m);
  out.prototype_part = VectorX<Scalar>::Zero(m);
  out.num_positives.assign(static_cast<std::size_t>(m), 0);

  for (Eigen::Index i = 0; i < m; ++i) {
    if (!batch.is_anchor[static_cast<std::size_t>(i)]) continue;
    const auto pos = detail::positives_of(batch, i);
    if (pos.empty() && !opts.skip_degenerate_anchors)
      throw DegenerateAnchorError("fnc2: anchor " + std::to_string(i) + " has no positive");

    VectorX<Scalar> denom_logits(m - 1 + num_old);
    denom_logits.head(m - 1) = detail::off_diagonal_row(logits, i);
    if (num_old > 0) denom_logits.tail(num_old) = old_logits.row(i).transpose();
    const Scalar log_denom = detail::log_sum_exp(denom_logits);

    const Scalar norm = Scalar(1) / static_cast<Scalar>(pos.size() + 1);
    Scalar pos_part = 0;
    Scalar dlog_total = 0;
    for (Eigen::Index j : pos) {
      const Scalar log_c = logits(i, j) - log_denom;
      const Scalar c = std::exp(log_c);
      pos_part += detail::focal_term(c, log_c, gamma);
      const Scalar dl = detail::focal_term_dlog(c, log_c, gamma);
      dlog_total += dl;
      g_pair(i, j) -= norm * dl / tau;
    }

    const Scalar log_r = own_logits(i) - log_denom;
    const Scalar r = std::exp(log_r);
    if (r > Scalar(1)) {
      ++out.anchors_r_above_one;
      if (!detail::is_integral(cfg.gamma))
        throw DomainError("fnc2: r_i > 1 with a fractional focusing exponent is undefined");
    }
    const Scalar r_part = detail::focal_term(r, log_r, gamma);
    const Scalar dl_r = detail::focal_term_dlog(r, log_r, gamma);
    dlog_total += dl_r;
    g_own(i) = -norm * dl_r / tau;

    // Every log-ratio shares the denominator, so its gradient is spread by softmax weight.
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) g_pair(i, k) += norm * dlog_total * std::exp(logits(i, k) - log_denom) / tau;
    for (Eigen::Index l = 0; l < num_old; ++l)
      g_old(i, l) = norm * dlog_total * std::exp(old_logits(i, l) - log_denom) / tau;

    out.positive_part(i) = pos_part;
    out.prototype_part(i) = r_part;
    out.num_positives[static_cast<std::size_t>(i)] = static_cast<int>(pos.size());
    out.value += -norm * (pos_part + r_part);
  }

  out.grad_z = (g_pair + g_pair.transpose()) * batch.z + g_own.asDiagonal() * own;
  if (num_old > 0) out.grad_z += g_old * old_prototypes;
  return out;
}

/// Instance-wise relation distillation: cross-entropy from the teacher's sample-sample
/// relations (kappa_past) to the student's (kappa_current). `past_z` receives no gradient.
template <typename Scalar>
LossOutput<Scalar> ird_loss(const EmbeddingBatch<Scalar>& current, const MatrixX<Scalar>& past_z,
                            const DistillationConfig& cfg) {
  cfg.validate();
  const Eigen::Index m = current.size();
  if (past_z.rows() != m || past_z.cols() != current.z.cols())
    throw ShapeError("ird: past and current embeddings differ in shape");
  if (m < 2) throw EmptyBatchError("ird: need at least two views");

  const Scalar kc = static_cast<Scalar>(cfg.kappa_current);
  const MatrixX<Scalar> past = instance_relations(past_z, static_cast<Scalar>(cfg.kappa_past));
  const MatrixX<Scalar> logits = (current.z * current.z.transpose()) / kc;

  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(m, m);
  LossOutput<Scalar> out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar lse = detail::log_sum_exp(detail::off_diagonal_row(logits, i));
    const Scalar mass = past.row(i).sum();
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k == i) continue;
      const Scalar log_o = logits(i, k) - lse;
      out.value -= past(i, k) * log_o;
      g(i, k) = (mass * std::exp(log_o) - past(i, k)) / kc;
    }
  }
  out.grad_z = (g + g.transpose()) * current.z;
  return out;
}

/// Sample-prototype relation distillation over the S prototypes of tasks 1..t.
template <typename Scalar>
LossOutput<Scalar> sprd_loss(const EmbeddingBatch<Scalar>& current, const MatrixX<Scalar>& past_z,
                             const MatrixX<Scalar>& prototypes, const DistillationConfig& cfg) {
  cfg.validate();
  if (prototypes.rows() == 0) throw EmptyPrototypeError("sprd: no prototypes");
  if (past_z.rows() != current.size() || past_z.cols() != current.z.cols() ||
      prototypes.cols() != current.z.cols())
    throw ShapeError("sprd: inconsistent shapes");

  const Scalar zc = static_cast<Scalar>(cfg.zeta_current);
  const MatrixX<Scalar> past = prototype_relations(past_z, prototypes, static_cast<Scalar>(cfg.zeta_past));
  const MatrixX<Scalar> logits = (current.z * prototypes.transpose()) / zc;

  MatrixX<Scalar> g(current.size(), prototypes.rows());
  LossOutput<Scalar> out;
  for (Eigen::Index i = 0; i < current.size(); ++i) {
    const VectorX<Scalar> row = logits.row(i).transpose();
    const Scalar lse = detail::log_sum_exp(row);
    const Scalar mass = past.row(i).sum();
    for (Eigen::Index s = 0; s < prototypes.rows(); ++s) {
      const Scalar log_q = row(s) - lse;
      out.value -= past(i, s) * log_q;
      g(i, s) = (mass * std::exp(log_q) - past(i, s)) / zc;
    }
  }
  out.grad_z = g * prototypes;
  return out;
}

/// Weight of the prototype-relation term at epoch e: max(0, (e - e0) / E).
inline double alpha_schedule(int epoch, const DistillationConfig& cfg) {
  if (cfg.epochs <= 0) return 0.0;
  return std::max(0.0, static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(cfg.epochs));
}

template <typename Scalar>
struct HsdOutput : LossOutput<Scalar> {
  Scalar alpha = 0;
  Scalar ird = 0;
  Scalar sprd = 0;
};

/// (1 - alpha) IRD + alpha S-PRD with alpha from the warm-up schedule.
template <typename Scalar>
HsdOutput<Scalar> hsd_loss(const EmbeddingBatch<Scalar>& current, const MatrixX<Scalar>& past_z,
                           const MatrixX<Scalar>& prototypes, const DistillationConfig& cfg, int epoch) {
  const auto ird = ird_loss(current, past_z, cfg);
  const auto sprd = sprd_loss(current, past_z, prototypes, cfg);
  const Scalar alpha = static_cast<Scalar>(alpha_schedule(epoch, cfg));
  HsdOutput<Scalar> out;
  out.alpha = alpha;
  out.ird = ird.value;
  out.sprd = sprd.value;
  out.value = (Scalar(1) - alpha) * ird.value + alpha * sprd.value;
  out.grad_z = (Scalar(1) - alpha) * ird.grad_z + alpha * sprd.grad_z;
  return out;
}

}  // namespace ncl
