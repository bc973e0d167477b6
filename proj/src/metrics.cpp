#include "ncl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ncl {

AccuracyMatrix::AccuracyMatrix(int num_tasks) : num_tasks_(num_tasks) {
  if (num_tasks < 1) throw DomainError("accuracy matrix needs at least one task");
  values_.resize(static_cast<std::size_t>(num_tasks) * static_cast<std::size_t>(num_tasks + 1) / 2);
}

std::size_t AccuracyMatrix::index(int t, int k) const {
  if (t < 1 || t > num_tasks_ || k < 1 || k > t)
    throw DomainError("accuracy entry (" + std::to_string(t) + ", " + std::to_string(k) +
                      ") is outside the lower triangle");
  const auto tt = static_cast<std::size_t>(t - 1);
  return tt * (tt + 1) / 2 + static_cast<std::size_t>(k - 1);
}

void AccuracyMatrix::set(int t, int k, double accuracy) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw DomainError("accuracy must lie in [0, 1]");
  values_[index(t, k)] = accuracy;
}

double AccuracyMatrix::at(int t, int k) const {
  const auto& v = values_[index(t, k)];
  if (!v) throw IncompleteMatrixError("accuracy entry (" + std::to_string(t) + ", " + std::to_string(k) + ") is missing");
  return *v;
}

bool AccuracyMatrix::has(int t, int k) const { return values_[index(t, k)].has_value(); }

bool AccuracyMatrix::row_complete(int t) const {
  for (int k = 1; k <= t; ++k)
    if (!has(t, k)) return false;
  return true;
}

std::vector<std::vector<double>> AccuracyMatrix::rows() const {
  std::vector<std::vector<double>> out;
  for (int t = 1; t <= num_tasks_; ++t) {
    std::vector<double> row;
    for (int k = 1; k <= t; ++k) row.push_back(has(t, k) ? at(t, k) : std::numeric_limits<double>::quiet_NaN());
    out.push_back(std::move(row));
  }
  return out;
}

double average_accuracy(const AccuracyMatrix& m) {
  const int last = m.num_tasks();
  if (!m.row_complete(last)) throw IncompleteMatrixError("average accuracy needs the final row");
  double sum = 0;
  for (int k = 1; k <= last; ++k) sum += m.at(last, k);
  return sum / last;
}

double average_forgetting(const AccuracyMatrix& m) {
  const int last = m.num_tasks();
  if (last < 2) throw UndefinedMetricError("forgetting needs at least two tasks");
  double sum = 0;
  for (int i = 1; i < last; ++i) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int t = i; t < last; ++t) worst = std::max(worst, m.at(t, i) - m.at(last, i));
    sum += worst;
  }
  return sum / (last - 1);
}

}  // namespace ncl
