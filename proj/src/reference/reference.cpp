#include "ncl/reference.hpp"

#include "ncl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ncl::reference {

namespace {

double dot(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

}  // namespace

double supcon(const Matrix& z, const std::vector<ClassId>& labels, const std::vector<bool>& is_anchor,
              double tau) {
  const Eigen::Index m = z.rows();
  double total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!is_anchor[i]) continue;
    double denom = 0;
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) denom += std::exp(dot(z, i, z, k) / tau);
    double inner = 0;
    int count = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i || !is_anchor[j] || labels[j] != labels[i]) continue;
      inner += std::log(std::exp(dot(z, i, z, j) / tau) / denom);
      ++count;
    }
    if (count > 0) total += -inner / count;
  }
  return total;
}

double fnc2(const Matrix& z, const std::vector<ClassId>& labels, const std::vector<bool>& is_anchor,
            const PrototypeSet<double>& prototypes, const ClassPrototypeMap& map, const Matrix& old_prototypes,
            double tau, double gamma) {
  const Eigen::Index m = z.rows();
  const Matrix& protos = prototypes.vectors();
  double total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!is_anchor[i]) continue;
    double denom = 0;
    for (Eigen::Index k = 0; k < m; ++k)
      if (k != i) denom += std::exp(dot(z, i, z, k) / tau);
    for (Eigen::Index l = 0; l < old_prototypes.rows(); ++l) denom += std::exp(dot(z, i, old_prototypes, l) / tau);

    double inner = 0;
    int count = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i || !is_anchor[j] || labels[j] != labels[i]) continue;
      const double c = std::exp(dot(z, i, z, j) / tau) / denom;
      inner += std::pow(1.0 - c, gamma) * std::log(c);
      ++count;
    }
    const Eigen::Index own = map.vertex_of(labels[i]);
    const double r = std::exp(dot(z, i, protos, own) / tau) / denom;
    inner += std::pow(1.0 - r, gamma) * std::log(r);
    total += -inner / (count + 1);
  }
  return total;
}

double ird(const Matrix& z, const Matrix& past_z, double kappa_past, double kappa_current) {
  const Eigen::Index m = z.rows();
  double total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double past_denom = 0;
    double cur_denom = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k == i) continue;
      past_denom += std::exp(dot(past_z, i, past_z, k) / kappa_past);
      cur_denom += std::exp(dot(z, i, z, k) / kappa_current);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      const double o_past = std::exp(dot(past_z, i, past_z, j) / kappa_past) / past_denom;
      const double o_cur = std::exp(dot(z, i, z, j) / kappa_current) / cur_denom;
      total += -o_past * std::log(o_cur);
    }
  }
  return total;
}

double sprd(const Matrix& z, const Matrix& past_z, const Matrix& prototypes, double zeta_past,
            double zeta_current) {
  double total = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double past_denom = 0;
    double cur_denom = 0;
    for (Eigen::Index s = 0; s < prototypes.rows(); ++s) {
      past_denom += std::exp(dot(past_z, i, prototypes, s) / zeta_past);
      cur_denom += std::exp(dot(z, i, prototypes, s) / zeta_current);
    }
    for (Eigen::Index j = 0; j < prototypes.rows(); ++j) {
      const double q_past = std::exp(dot(past_z, i, prototypes, j) / zeta_past) / past_denom;
      const double q_cur = std::exp(dot(z, i, prototypes, j) / zeta_current) / cur_denom;
      total += -q_past * std::log(q_cur);
    }
  }
  return total;
}

double average_accuracy(const std::vector<std::vector<double>>& rows) {
  const auto& last = rows.back();
  double s = 0;
  for (double a : last) s += a;
  return s / static_cast<double>(rows.size());
}

double average_forgetting(const std::vector<std::vector<double>>& rows) {
  const std::size_t tasks = rows.size();
  double s = 0;
  for (std::size_t i = 0; i + 1 < tasks; ++i) {
    double best = -1e300;
    for (std::size_t t = i; t + 1 < tasks; ++t) best = std::max(best, rows[t][i] - rows[tasks - 1][i]);
    s += best;
  }
  return s / static_cast<double>(tasks - 1);
}

NcReference nc_scores(const Matrix& features, const std::vector<ClassId>& labels,
                      const PrototypeSet<double>& prototypes, const ClassPrototypeMap& map) {
  const Eigen::Index d = features.cols();
  std::map<ClassId, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < features.rows(); ++i) members[labels[i]].push_back(i);

  std::vector<std::vector<double>> means;
  std::vector<ClassId> classes;
  for (const auto& [label, idx] : members) {
    std::vector<double> mu(d, 0.0);
    for (Eigen::Index i : idx)
      for (Eigen::Index c = 0; c < d; ++c) mu[c] += features(i, c);
    for (double& v : mu) v /= static_cast<double>(idx.size());
    means.push_back(mu);
    classes.push_back(label);
  }
  const std::size_t k = classes.size();
  std::vector<double> global(d, 0.0);
  for (const auto& mu : means)
    for (Eigen::Index c = 0; c < d; ++c) global[c] += mu[c] / static_cast<double>(k);

  double within = 0;
  double between = 0;
  double cos_sum = 0;
  for (std::size_t a = 0; a < k; ++a) {
    const auto& idx = members[classes[a]];
    double trace = 0;
    for (Eigen::Index i : idx)
      for (Eigen::Index c = 0; c < d; ++c) {
        const double diff = features(i, c) - means[a][c];
        trace += diff * diff;
      }
    within += trace / static_cast<double>(idx.size());

    double norm2 = 0;
    for (Eigen::Index c = 0; c < d; ++c) norm2 += (means[a][c] - global[c]) * (means[a][c] - global[c]);
    between += norm2;

    const Eigen::Index v = map.vertex_of(classes[a]);
    double dp = 0;
    double pn = 0;
    for (Eigen::Index c = 0; c < d; ++c) {
      dp += (means[a][c] - global[c]) * prototypes.vectors()(v, c);
      pn += prototypes.vectors()(v, c) * prototypes.vectors()(v, c);
    }
    cos_sum += dp / (std::sqrt(norm2) * std::sqrt(pn));
  }
  within /= static_cast<double>(k);
  between /= static_cast<double>(k);
  return {within, between, within / between, cos_sum / static_cast<double>(k)};
}

ClassId nearest_prototype(const Vector& z, const PrototypeSet<double>& prototypes, const ClassPrototypeMap& map,
                          const std::vector<ClassId>& candidates) {
  std::vector<ClassId> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  ClassId best = sorted.front();
  double best_score = -1e300;
  for (ClassId y : sorted) {
    const Eigen::Index v = map.vertex_of(y);
    double s = 0;
    for (Eigen::Index c = 0; c < z.size(); ++c) s += z(c) * prototypes.vectors()(v, c);
    if (s > best_score) {
      best_score = s;
      best = y;
    }
  }
  return best;
}

Matrix central_difference(const std::function<double(const Matrix&)>& f, const Matrix& at, double h) {
  Matrix grad(at.rows(), at.cols());
  Matrix x = at;
  for (Eigen::Index i = 0; i < at.rows(); ++i)
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      const double orig = x(i, j);
      x(i, j) = orig + h;
      const double up = f(x);
      x(i, j) = orig - h;
      const double down = f(x);
      x(i, j) = orig;
      grad(i, j) = (up - down) / (2 * h);
    }
  return grad;
}

double max_relative_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_relative_error: shape mismatch");
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1.0}));
  }
  return worst;
}

}  // namespace ncl::reference
