#pragma once

// Straight-line reference implementations written from the loss and metric definitions
// with explicit loops and no shared helpers from the production kernels. Used as oracles
// by the test suites and by `ncl verify`.

#include "ncl/etf.hpp"
#include "ncl/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ncl::reference {

double supcon(const Matrix& z, const std::vector<ClassId>& labels, const std::vector<bool>& is_anchor,
              double tau);

double fnc2(const Matrix& z, const std::vector<ClassId>& labels, const std::vector<bool>& is_anchor,
            const PrototypeSet<double>& prototypes, const ClassPrototypeMap& map, const Matrix& old_prototypes,
            double tau, double gamma);

double ird(const Matrix& z, const Matrix& past_z, double kappa_past, double kappa_current);

double sprd(const Matrix& z, const Matrix& past_z, const Matrix& prototypes, double zeta_past,
            double zeta_current);

/// rows[t][k] holds A_{t+1,k+1} for k <= t.
double average_accuracy(const std::vector<std::vector<double>>& rows);
double average_forgetting(const std::vector<std::vector<double>>& rows);

struct NcReference {
  double within_trace_mean;
  double between_mean;
  double nc1;
  double nc2;
};
NcReference nc_scores(const Matrix& features, const std::vector<ClassId>& labels,
                      const PrototypeSet<double>& prototypes, const ClassPrototypeMap& map);

/// Nearest prototype by inner product over `candidates`, lowest label on ties.
ClassId nearest_prototype(const Vector& z, const PrototypeSet<double>& prototypes, const ClassPrototypeMap& map,
                          const std::vector<ClassId>& candidates);

/// Central differences of a scalar function of a matrix, entry by entry.
Matrix central_difference(const std::function<double(const Matrix&)>& f, const Matrix& at, double h = 1e-6);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1).
double max_relative_error(const Matrix& a, const Matrix& b);

}  // namespace ncl::reference
