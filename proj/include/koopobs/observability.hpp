#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "koopobs/dynamics.hpp"
#include "koopobs/koopman.hpp"
#include "koopobs/linalg.hpp"

namespace koopobs {

enum class Verdict { Observable, Unobservable, Inconclusive };
enum class Method { KoopmanRank, LieRank, EmpiricalGramian };

std::string to_string(Verdict v);
std::string to_string(Method m);

/// Eigenvalues that coincide within the grouping tolerance, together with an
/// orthonormal basis of the corresponding eigenspace of Lambda.
struct EigenGroup {
  cd lambda;
  std::vector<std::size_t> indices;  // 0-based positions in the spectrum
  std::size_t multiplicity = 0;
  std::vector<CVector> eigenvectors;
};

/// Modified Gram-Schmidt; drops vectors that become numerically zero.
std::vector<CVector> gram_schmidt(const std::vector<CVector>& vectors);

/// Transitive closure of |l_i - l_j| <= tol (1 + max(|l_i|, |l_j|)), in order
/// of first appearance. Eigenvectors are the unit vectors of a diagonal
/// operator with this spectrum.
std::vector<EigenGroup> group_eigenvalues(std::span<const cd> spectrum, double tol = 1e-8);

/// Groups of the real block operator of `cs`, with eigenvectors of its
/// 1x1 and 2x2 blocks.
std::vector<EigenGroup> eigen_groups(const CanonicalSystem& cs, double tol = 1e-8);

/// q x r matrix with entries <w_j, c_k>.
CMatrix build_observability_matrix(const EigenGroup& group, const Matrix& C);

struct RankTolerances {
  double group = 1e-8;
  double rank = kExactRankEps;
};

struct GroupResult {
  EigenGroup group;
  CMatrix O;
  int rank = 0;
  bool passed = false;
};

struct PointCheck {
  Point x0;
  int rank = 0;
  std::size_t required = 0;
  std::vector<double> singular_values;
  std::size_t orders = 0;  // Lie test only
};

struct ObservabilityReport {
  Method method = Method::KoopmanRank;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<GroupResult> groups;
  std::vector<std::size_t> failing_groups;
  std::vector<PointCheck> points;
  std::map<std::string, double> tolerances;
  std::size_t samples = 0;
  std::vector<std::string> notes;
};

/// Observable iff rank(O_i) = r_i for every eigenvalue group.
ObservabilityReport koopman_rank_test(const CanonicalSystem& cs, const RankTolerances& tol = {});

/// Largest multiplicity in the report's groups.
std::size_t min_measurements(const ObservabilityReport& report);

struct LieOptions {
  std::size_t max_order = 0;  // 0 means n
  std::size_t node_budget = 2'000'000;
  double rank_eps = kExactRankEps;
};

/// Rank of the stacked gradients of L_f^0 h .. L_f^{k-1} h at x0. Stops when
/// the rank reaches n, stops growing, or k hits max_order. Throws
/// ExpressionTooLarge when a derivative exceeds the node budget.
PointCheck lie_rank_test(const NonlinearSystem& sys, const Point& x0, const LieOptions& opts = {});

ObservabilityReport lie_rank_report(const NonlinearSystem& sys, std::span<const Point> points,
                                    const LieOptions& opts = {});

struct GramianOptions {
  double eps = 1e-4;
  double t_final = 1.0;
  double dt = 1e-3;
  double rank_eps = kEmpiricalRankEps;
};

struct GramianResult {
  Matrix G;
  Vector singular_values;
  int rank = 0;
};

/// (1 / 4 eps^2) int_0^t Phi^T Phi, Phi = [y_{+1} - y_{-1}, ..., y_{+n} - y_{-n}],
/// trapezoidal rule on the RK4 grid.
GramianResult empirical_gramian(const NonlinearSystem& sys, const Point& x0,
                                const GramianOptions& opts = {});

ObservabilityReport gramian_report(const NonlinearSystem& sys, std::span<const Point> points,
                                   const GramianOptions& opts = {});

}  // namespace koopobs
