#pragma once

#include <optional>
#include <string>
#include <vector>

#include "koopobs/dynamics.hpp"
#include "koopobs/koopman.hpp"
#include "koopobs/symmetry.hpp"

namespace koopobs {

/// x' = A x with an Expr view of the field.
struct LinearSystemModel {
  std::string name;
  Matrix A;
  NonlinearSystem system;
};

/// Builds f = A x term by term; zero entries are skipped.
ExprVector linear_field(const Matrix& A);
LinearSystemModel linear_model(std::string name, const Matrix& A, ExprVector h, Box domain);

/// psi_i(x) = <w_i, x> with w_i the rows of R^{-1}, modes the columns of R
/// (right eigenvectors). Conjugate pairs come out adjacent, positive
/// imaginary part first. Throws PreconditionError("diagonalizable") when the
/// eigenvector matrix has condition number >= 1e8.
KoopmanSet linear_koopman_extract(const Matrix& A);

/// A built-in example: system with its default measurement, an alternative
/// measurement, the packaged Koopman set (if any), the symmetry and a
/// default initial condition.
struct BuiltinModel {
  std::string name;
  std::string description;
  NonlinearSystem system;
  std::optional<ExprVector> alt_measurement;
  std::optional<KoopmanSet> koopman;
  PermutationSymmetry symmetry;
  Point default_x0;
  double default_t = 1.0;
};

/// Undirected three-agent consensus, y = x1; alt y = x1 + x2 + x3.
/// Eigenfunction coefficients are the 4-decimal published ones, so the set
/// is validated at 1e-3.
BuiltinModel consensus_undirected();

/// Directed three-cycle consensus, y = x1; alt y = x1 + x2 + x3. Eigenvalues
/// 0 and -3/2 +- i sqrt(3)/2.
BuiltinModel consensus_directed();

/// x1' = x1, x2' = x2, x3' = -2 x1^2 - 2 x2^2 + 4 x3 with y = x1^2 + x2^2 + x3;
/// alt measurement [2 x1 - x2^2 + x3, -x1^2 + x2 + x3].
BuiltinModel example2();

/// Ring of N amplitude-phase oscillators, state [a_1..a_N, phi_1..phi_N]:
///   a_i'   = -(a_i - 1)/2 - (beta/2)(a_{i+1} sin(phi_{i+1} - phi_i) + a_{i-1} sin(phi_{i-1} - phi_i))
///   phi_i' = alpha a_i^2 + (beta/(2 a_i))(a_{i+1} cos(phi_{i+1} - phi_i) + a_{i-1} cos(phi_{i-1} - phi_i) - 2)
/// with wrap-around neighbours and h = sum_i cos(phi_i - phi_{i+1}).
/// The second cosine uses the i-1 neighbour, which keeps the field
/// equivariant under ring shifts. No Koopman set. Symmetry: shift by N/2
/// (by 1 for odd N) applied to both blocks. Throws for N < 3.
BuiltinModel nems_ring(std::size_t N = 8, double alpha = 1.0, double beta = 0.1);

/// a_i ~ U[0.8, 1.2], phi_i ~ U(-pi, pi].
Point nems_initial_condition(std::size_t N, std::uint64_t seed = 42);

std::vector<std::string> builtin_model_names();
/// Throws std::invalid_argument for an unknown name.
BuiltinModel builtin_model(const std::string& name);

}  // namespace koopobs
