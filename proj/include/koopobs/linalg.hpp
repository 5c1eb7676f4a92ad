#pragma once

#include <Eigen/Dense>
#include <complex>

namespace koopobs {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Relative cutoff used for exact (symbolic or closed-form) data.
inline constexpr double kExactRankEps = 1e-12;
/// Relative cutoff for finite-difference estimates such as the empirical
/// Gramian.
inline constexpr double kEmpiricalRankEps = 1e-6;

/// Number of singular values strictly above `cutoff`.
template <typename Derived>
int count_above(const Eigen::MatrixBase<Derived>& singular_values, double cutoff) {
  int r = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values[i] > cutoff) ++r;
  }
  return r;
}

/// Rank with cutoff sigma_max * max(rows, cols) * eps, or against an
/// external scale when the matrix is a slice of a larger one.
int numerical_rank(const Matrix& a, double eps = kExactRankEps, double scale = -1.0);
int numerical_rank(const CMatrix& a, double eps = kExactRankEps, double scale = -1.0);

Vector singular_values(const Matrix& a);
Vector singular_values(const CMatrix& a);

/// Minimum-norm least-squares solution of A X = B with the same cutoff rule.
Matrix least_squares(const Matrix& a, const Matrix& b, double eps = kExactRankEps);
CMatrix least_squares(const CMatrix& a, const CMatrix& b, double eps = kExactRankEps);

/// 2-norm condition number (infinite for singular input).
double condition_number(const CMatrix& a);

}  // namespace koopobs
