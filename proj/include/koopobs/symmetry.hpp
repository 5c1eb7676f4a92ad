#pragma once

#include <span>
#include <string>
#include <vector>

#include "koopobs/dynamics.hpp"
#include "koopobs/koopman.hpp"
#include "koopobs/observability.hpp"

namespace koopobs {

/// Permutation of the state coordinates. perm[i] is the 1-based image of
/// coordinate i+1, i.e. (P x)_{perm[i]} = x_{i+1}.
class PermutationSymmetry {
 public:
  PermutationSymmetry() = default;
  /// Throws std::invalid_argument unless `perm` is a bijection of 1..n.
  explicit PermutationSymmetry(std::vector<std::size_t> perm);

  static PermutationSymmetry identity(std::size_t n);

  std::size_t size() const { return perm_.size(); }
  const std::vector<std::size_t>& perm() const { return perm_; }
  /// Smallest k >= 1 with P^k = I.
  std::size_t order() const { return order_; }
  bool is_identity() const { return order_ == 1; }

  PermutationSymmetry inverse() const;
  PermutationSymmetry compose(const PermutationSymmetry& other) const;  // this after other
  PermutationSymmetry power(std::size_t k) const;

  Matrix matrix() const;
  Point apply(std::span<const double> x) const;
  std::vector<cd> apply(std::span<const cd> v) const;

  /// Variable map for psi o P: Var(m) -> Var(perm^-1(m)).
  std::vector<std::size_t> substitution() const;

  bool operator==(const PermutationSymmetry& o) const { return perm_ == o.perm_; }

 private:
  std::vector<std::size_t> perm_;
  std::size_t order_ = 1;
};

std::string to_string(const PermutationSymmetry& p);

/// Cyclic shifts and reflections of a state made of `fields` equal-length
/// blocks, acting identically on every block. Identity excluded.
std::vector<PermutationSymmetry> candidate_permutations(std::size_t n, std::size_t fields = 1);

struct SymmetryCheck {
  bool passed = false;
  double residual = 0.0;  // max over samples, infinity norm
  std::size_t samples = 0;
};

/// f(Px) = P f(x) on the samples, pass iff each residual is within
/// 1e-9 (1 + |f(x)|_inf). The identity is rejected.
SymmetryCheck verify_state_symmetry(const NonlinearSystem& sys, const PermutationSymmetry& P,
                                    std::span<const Point> samples);

/// h(Px) = h(x), same tolerance rule.
SymmetryCheck verify_measurement_symmetry(const NonlinearSystem& sys,
                                          const PermutationSymmetry& P,
                                          std::span<const Point> samples);

/// psi o P.
ComplexExpr compose(const ComplexExpr& psi, const PermutationSymmetry& P);
KoopmanEigenpair reflect_eigenpair(const KoopmanEigenpair& pair, const PermutationSymmetry& P);

struct RotationalEntry {
  std::size_t index = 0;  // 0-based Koopman-set index
  cd c;                   // psi_i o P = c psi_i
  double residual = 0.0;
};

struct ReflectionalEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  cd c;  // psi_i o P = c psi_j
  double residual = 0.0;
  /// Whether psi_j o P is also a multiple of psi_i.
  bool mutual = false;
};

struct SymmetryClassification {
  std::vector<RotationalEntry> rotational;
  std::vector<ReflectionalEntry> reflectional;
  std::vector<std::size_t> unresolved;
};

struct ClassifyOptions {
  double fit_tol = 1e-8;
  double group_tol = 1e-8;
  /// Throw PreconditionError("classification") on an unresolved index.
  bool strict = true;
};

/// Least-squares fit of psi_i o P against psi_i, then against every
/// same-eigenvalue partner. Indices claimed as partners are not revisited.
SymmetryClassification classify_eigenfunctions(const KoopmanSet& kset,
                                               const PermutationSymmetry& P,
                                               std::span<const Point> samples,
                                               const ClassifyOptions& opts = {});

struct ModeCheckEntry {
  bool rotational = true;
  std::size_t i = 0;
  std::size_t j = 0;
  double residual = 0.0;
  bool applicable = true;
  bool passed = false;
};

struct ModeCheck {
  std::vector<ModeCheckEntry> entries;
  bool passed = true;
};

/// v_i = c P^{k-1} v_i for rotational entries and v_j = c P^{k-1} v_i for
/// mutual reflectional pairs. One-way pairs are reported as not applicable.
ModeCheck mode_symmetry_check(const KoopmanSet& kset, const PermutationSymmetry& P,
                              const SymmetryClassification& cls, double tol = 1e-9);

struct InducedKoopmanSymmetry {
  std::vector<std::size_t> perm;  // 0-based index map on the Koopman set
  Matrix Q;
  bool identity = true;
};

/// Q swaps reflectional partners and fixes the rest. Throws
/// PreconditionError("commutation") unless Q Lambda = Lambda Q.
InducedKoopmanSymmetry induced_Q(const SymmetryClassification& cls, std::span<const cd> spectrum,
                                 double tol = 1e-8);

enum class SymmetryRoute { MeasurementSymmetric, MultiplicityExceedsOutputs, Inconclusive };

struct SymmetryVerdict {
  SymmetryRoute route = SymmetryRoute::Inconclusive;
  Verdict verdict = Verdict::Inconclusive;
  PermutationSymmetry P;
  SymmetryCheck state;
  SymmetryCheck measurement;
  std::size_t q = 0;
  std::size_t max_multiplicity = 0;  // 0 when no eigenvalue groups are known
  bool has_witness = false;
  cd witness_lambda;
  std::string rationale;
};

/// Requires state symmetry (PreconditionError("state-symmetry") otherwise).
/// Symmetric measurement -> Unobservable; otherwise q below the largest
/// multiplicity -> Unobservable; otherwise Inconclusive. Never Observable.
SymmetryVerdict symmetry_verdict(const NonlinearSystem& sys, const PermutationSymmetry& P,
                                 std::span<const Point> samples,
                                 std::span<const EigenGroup> groups = {});

}  // namespace koopobs
