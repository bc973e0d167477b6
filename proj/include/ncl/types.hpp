#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace ncl {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

using ClassId = int;
using Rng = std::mt19937_64;

/// Derives an independent generator from a base seed and a stream tag.
inline Rng make_rng(std::uint64_t seed, std::uint64_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

template <typename Scalar>
MatrixX<Scalar> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                                Scalar stddev = Scalar(1)) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixX<Scalar> m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(normal(rng)) * stddev;
  return m;
}

}  // namespace ncl
