#include "koopobs/linalg.hpp"

#include <algorithm>
#include <limits>

namespace koopobs {

namespace {

template <typename M>
int rank_impl(const M& a, double eps, double scale) {
  if (a.size() == 0) return 0;
  Vector s = Eigen::JacobiSVD<M>(a).singularValues();
  double ref = scale >= 0.0 ? scale : s[0];
  double cutoff = ref * static_cast<double>(std::max(a.rows(), a.cols())) * eps;
  return count_above(s, cutoff);
}

template <typename M>
M lsq_impl(const M& a, const M& b, double eps) {
  if (a.rows() == 0 || a.cols() == 0) return M::Zero(a.cols(), b.cols());
  Eigen::JacobiSVD<M> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  // Eigen's threshold is relative to the largest singular value.
  svd.setThreshold(static_cast<double>(std::max(a.rows(), a.cols())) * eps);
  return svd.solve(b);
}

}  // namespace

int numerical_rank(const Matrix& a, double eps, double scale) { return rank_impl(a, eps, scale); }
int numerical_rank(const CMatrix& a, double eps, double scale) { return rank_impl(a, eps, scale); }

Vector singular_values(const Matrix& a) { return Eigen::JacobiSVD<Matrix>(a).singularValues(); }
Vector singular_values(const CMatrix& a) { return Eigen::JacobiSVD<CMatrix>(a).singularValues(); }

Matrix least_squares(const Matrix& a, const Matrix& b, double eps) { return lsq_impl(a, b, eps); }
CMatrix least_squares(const CMatrix& a, const CMatrix& b, double eps) {
  return lsq_impl(a, b, eps);
}

double condition_number(const CMatrix& a) {
  Vector s = singular_values(a);
  if (s.size() == 0) return 0.0;
  double smin = s[s.size() - 1];
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

}  // namespace koopobs
