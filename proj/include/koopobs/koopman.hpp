#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "koopobs/dynamics.hpp"
#include "koopobs/expr.hpp"
#include "koopobs/linalg.hpp"

namespace koopobs {

/// A numerical precondition of the analysis does not hold (span check,
/// independence, defective matrix, ...). `check()` names the failed test.
class PreconditionError : public std::runtime_error {
 public:
  PreconditionError(std::string check, const std::string& detail);
  const std::string& check() const { return check_; }

 private:
  std::string check_;
};

/// (lambda, psi, v) with L_f psi = lambda psi and v the coefficient of psi in
/// the expansion of the full state.
struct KoopmanEigenpair {
  cd lambda;
  ComplexExpr psi;
  std::vector<cd> mode;
};

struct KoopmanSet {
  std::size_t n = 0;
  std::vector<KoopmanEigenpair> pairs;
  /// Generator residual tolerance used when the set is validated.
  double validation_tol = 1e-6;

  std::size_t size() const { return pairs.size(); }
  std::vector<cd> spectrum() const;
};

struct ResidualReport {
  double max_residual = 0.0;
  double mean_residual = 0.0;
  double max_abs_psi = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Checks |L_f psi - lambda psi| <= tol * (1 + max|psi|) on every sample.
/// Evaluation faults propagate as EvalError.
ResidualReport validate_eigenpair(const NonlinearSystem& sys, const KoopmanEigenpair& pair,
                                  std::span<const Point> samples, double tol = 1e-6);

/// Nonzero modes, conjugate pairs at adjacent indices, and full column rank
/// of the sampled eigenfunction matrix. Throws PreconditionError.
void check_koopman_set(const KoopmanSet& kset, std::span<const Point> samples,
                       double group_tol = 1e-8);

/// One diagonal block of the real canonical operator.
struct SpectralBlock {
  std::size_t start = 0;  // 0-based coordinate index
  std::size_t size = 1;   // 1 (real eigenvalue) or 2 (conjugate pair)
  cd lambda;              // the eigenvalue with non-negative imaginary part first
};

/// Real block-diagonal linear system z' = Lambda z, x = V z, y = C z.
///
/// Coordinates: a real eigenvalue contributes z_i = psi_i. A conjugate pair
/// (i, i+1) contributes z_i = Re psi_i and z_{i+1} = Im psi_{i+1}; with that
/// choice the block |lambda| [[cos, sin], [-sin, cos]] is exactly the
/// generator, and the reconstruction columns are 2 Re v_i and 2 Im v_i.
struct CanonicalSystem {
  std::size_t n = 0;
  std::size_t N = 0;
  std::vector<SpectralBlock> blocks;
  Matrix Lambda;
  Matrix V;
  Matrix C;  // q x N; empty until a measurement is expanded
  ExprVector coords;

  /// Eigenvalues of Lambda in coordinate order.
  std::vector<cd> spectrum() const;
  bool has_measurement() const { return C.size() > 0; }
};

/// Assembles Lambda, V and the coordinate map, then checks x = V T(x) on
/// the samples (residual <= 1e-8 relative).
CanonicalSystem build_canonical(const KoopmanSet& kset, std::span<const Point> samples,
                                double group_tol = 1e-8);

/// Least-squares fit of h(x_s) ~ C z(x_s); needs at least 10 N samples.
/// Throws PreconditionError("measurement-span") if the residual exceeds
/// 1e-8 (relative).
Matrix expand_measurement(const NonlinearSystem& sys, const CanonicalSystem& cs,
                          std::span<const Point> samples);

/// build_canonical followed by expand_measurement.
CanonicalSystem build_canonical(const NonlinearSystem& sys, const KoopmanSet& kset,
                                std::span<const Point> samples, double group_tol = 1e-8);

Vector transform(const CanonicalSystem& cs, std::span<const double> x);
Vector reconstruct_state(const CanonicalSystem& cs, const Vector& z);

/// exp(Lambda t) z0, block by block.
Vector propagate(const CanonicalSystem& cs, const Vector& z0, double t);

}  // namespace koopobs
