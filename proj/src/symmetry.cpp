#include "koopobs/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace koopobs {

PermutationSymmetry::PermutationSymmetry(std::vector<std::size_t> perm) : perm_(std::move(perm)) {
  const std::size_t n = perm_.size();
  if (n == 0) throw std::invalid_argument("permutation is empty");
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm_) {
    if (p < 1 || p > n) {
      throw std::invalid_argument("permutation entry " + std::to_string(p) + " outside 1.." +
                                  std::to_string(n));
    }
    if (seen[p - 1]) throw std::invalid_argument("permutation repeats " + std::to_string(p));
    seen[p - 1] = true;
  }
  // order = lcm of the cycle lengths
  std::vector<bool> visited(n, false);
  order_ = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    std::size_t len = 0;
    for (std::size_t j = i; !visited[j]; j = perm_[j] - 1) {
      visited[j] = true;
      ++len;
    }
    order_ = std::lcm(order_, len);
  }
}

PermutationSymmetry PermutationSymmetry::identity(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 1);
  return PermutationSymmetry(std::move(p));
}

PermutationSymmetry PermutationSymmetry::inverse() const {
  std::vector<std::size_t> inv(perm_.size());
  for (std::size_t i = 0; i < perm_.size(); ++i) inv[perm_[i] - 1] = i + 1;
  return PermutationSymmetry(std::move(inv));
}

PermutationSymmetry PermutationSymmetry::compose(const PermutationSymmetry& other) const {
  if (other.size() != size()) throw std::invalid_argument("compose: size mismatch");
  std::vector<std::size_t> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = perm_[other.perm_[i] - 1];
  return PermutationSymmetry(std::move(out));
}

PermutationSymmetry PermutationSymmetry::power(std::size_t k) const {
  PermutationSymmetry out = identity(size());
  for (std::size_t i = 0; i < k % order_; ++i) out = compose(out);
  return out;
}

Matrix PermutationSymmetry::matrix() const {
  const auto n = static_cast<Eigen::Index>(size());
  Matrix P = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < size(); ++i) {
    P(static_cast<Eigen::Index>(perm_[i] - 1), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return P;
}

Point PermutationSymmetry::apply(std::span<const double> x) const {
  if (x.size() != size()) throw std::invalid_argument("permutation applied to wrong dimension");
  Point y(size());
  for (std::size_t i = 0; i < size(); ++i) y[perm_[i] - 1] = x[i];
  return y;
}

std::vector<cd> PermutationSymmetry::apply(std::span<const cd> v) const {
  if (v.size() != size()) throw std::invalid_argument("permutation applied to wrong dimension");
  std::vector<cd> y(size());
  for (std::size_t i = 0; i < size(); ++i) y[perm_[i] - 1] = v[i];
  return y;
}

std::vector<std::size_t> PermutationSymmetry::substitution() const { return inverse().perm(); }

std::string to_string(const PermutationSymmetry& p) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p.perm()[i];
  os << ']';
  return os.str();
}

std::vector<PermutationSymmetry> candidate_permutations(std::size_t n, std::size_t fields) {
  if (fields == 0 || n % fields != 0) {
    throw std::invalid_argument("candidate_permutations: n must be a multiple of fields");
  }
  const std::size_t m = n / fields;
  std::vector<std::vector<std::size_t>> maps;
  for (std::size_t s = 1; s < m; ++s) {
    std::vector<std::size_t> shift(m);
    for (std::size_t i = 0; i < m; ++i) shift[i] = (i + s) % m;
    maps.push_back(std::move(shift));
  }
  for (std::size_t s = 0; s < m; ++s) {
    std::vector<std::size_t> refl(m);
    for (std::size_t i = 0; i < m; ++i) refl[i] = (s + m - i) % m;
    maps.push_back(std::move(refl));
  }
  std::vector<PermutationSymmetry> out;
  std::set<std::vector<std::size_t>> seen;
  for (const auto& local : maps) {
    std::vector<std::size_t> perm(n);
    for (std::size_t b = 0; b < fields; ++b) {
      for (std::size_t i = 0; i < m; ++i) perm[b * m + i] = b * m + local[i] + 1;
    }
    if (!seen.insert(perm).second) continue;
    PermutationSymmetry P(std::move(perm));
    if (!P.is_identity()) out.push_back(std::move(P));
  }
  return out;
}

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

void check_dimension(const NonlinearSystem& sys, const PermutationSymmetry& P) {
  if (P.size() != sys.n) {
    throw std::invalid_argument("permutation has " + std::to_string(P.size()) +
                                " entries but the state has " + std::to_string(sys.n));
  }
}

}  // namespace

SymmetryCheck verify_state_symmetry(const NonlinearSystem& sys, const PermutationSymmetry& P,
                                    std::span<const Point> samples) {
  check_dimension(sys, P);
  if (P.is_identity()) throw std::invalid_argument("the identity is not a nontrivial symmetry");
  SymmetryCheck out;
  out.passed = true;
  out.samples = samples.size();
  for (const auto& x : samples) {
    Point fx = evaluate(sys.f, x);
    Point fpx = evaluate(sys.f, P.apply(x));
    Point pfx = P.apply(fx);
    double r = 0.0;
    for (std::size_t i = 0; i < sys.n; ++i) r = std::max(r, std::fabs(fpx[i] - pfx[i]));
    out.residual = std::max(out.residual, r);
    if (r > 1e-9 * (1.0 + inf_norm(fx))) out.passed = false;
  }
  return out;
}

SymmetryCheck verify_measurement_symmetry(const NonlinearSystem& sys,
                                          const PermutationSymmetry& P,
                                          std::span<const Point> samples) {
  check_dimension(sys, P);
  SymmetryCheck out;
  out.passed = true;
  out.samples = samples.size();
  for (const auto& x : samples) {
    Point hx = evaluate(sys.h, x);
    Point hpx = evaluate(sys.h, P.apply(x));
    double r = 0.0;
    for (std::size_t j = 0; j < sys.q; ++j) r = std::max(r, std::fabs(hpx[j] - hx[j]));
    out.residual = std::max(out.residual, r);
    if (r > 1e-9 * (1.0 + inf_norm(hx))) out.passed = false;
  }
  return out;
}

ComplexExpr compose(const ComplexExpr& psi, const PermutationSymmetry& P) {
  auto map = P.substitution();
  return substitute_vars(psi, map);
}

KoopmanEigenpair reflect_eigenpair(const KoopmanEigenpair& pair, const PermutationSymmetry& P) {
  KoopmanEigenpair out = pair;
  out.psi = compose(pair.psi, P);
  out.mode = P.apply(std::span<const cd>(pair.mode));
  return out;
}

namespace {

struct Fit {
  cd c;
  double residual = 0.0;
  bool ok = false;
};

Fit fit_multiple(const CVector& target, const CVector& basis, double tol) {
  Fit f;
  double denom = basis.squaredNorm();
  if (denom == 0.0) return f;
  f.c = basis.dot(target) / denom;
  f.residual = (target - f.c * basis).cwiseAbs().maxCoeff();
  double scale = std::max(target.cwiseAbs().maxCoeff(), basis.cwiseAbs().maxCoeff());
  f.ok = f.residual <= tol * (1.0 + scale);
  return f;
}

}  // namespace

SymmetryClassification classify_eigenfunctions(const KoopmanSet& kset,
                                               const PermutationSymmetry& P,
                                               std::span<const Point> samples,
                                               const ClassifyOptions& opts) {
  if (P.size() != kset.n) throw std::invalid_argument("classify: permutation dimension differs");
  const std::size_t N = kset.size();
  const auto S = static_cast<Eigen::Index>(samples.size());
  std::vector<CVector> plain(N, CVector(S));
  std::vector<CVector> moved(N, CVector(S));
  for (Eigen::Index s = 0; s < S; ++s) {
    const Point& x = samples[static_cast<std::size_t>(s)];
    Point px = P.apply(x);
    for (std::size_t i = 0; i < N; ++i) {
      plain[i][s] = evaluate(kset.pairs[i].psi, x);
      moved[i][s] = evaluate(kset.pairs[i].psi, px);
    }
  }

  SymmetryClassification cls;
  std::vector<bool> assigned(N, false);
  for (std::size_t i = 0; i < N; ++i) {
    if (assigned[i]) continue;
    Fit self = fit_multiple(moved[i], plain[i], opts.fit_tol);
    if (self.ok) {
      cls.rotational.push_back({i, self.c, self.residual});
      assigned[i] = true;
      continue;
    }
    const cd li = kset.pairs[i].lambda;
    bool found = false;
    for (std::size_t j = 0; j < N && !found; ++j) {
      if (j == i || assigned[j]) continue;
      const cd lj = kset.pairs[j].lambda;
      if (std::abs(li - lj) > opts.group_tol * (1.0 + std::max(std::abs(li), std::abs(lj)))) {
        continue;
      }
      Fit fwd = fit_multiple(moved[i], plain[j], opts.fit_tol);
      if (!fwd.ok) continue;
      Fit back = fit_multiple(moved[j], plain[i], opts.fit_tol);
      cls.reflectional.push_back({i, j, fwd.c, fwd.residual, back.ok});
      assigned[i] = assigned[j] = true;
      found = true;
    }
    if (!found) {
      cls.unresolved.push_back(i);
      if (opts.strict) {
        throw PreconditionError("classification",
                                "eigenfunction " + std::to_string(i + 1) +
                                    " composed with P is not a multiple of any eigenfunction with "
                                    "the same eigenvalue; the Koopman set is incomplete");
      }
    }
  }
  return cls;
}

ModeCheck mode_symmetry_check(const KoopmanSet& kset, const PermutationSymmetry& P,
                              const SymmetryClassification& cls, double tol) {
  const PermutationSymmetry back = P.power(P.order() - 1);
  ModeCheck out;
  auto residual = [&](std::size_t target, std::size_t source, cd c) {
    auto moved = back.apply(std::span<const cd>(kset.pairs[source].mode));
    double r = 0.0;
    for (std::size_t k = 0; k < moved.size(); ++k) {
      r = std::max(r, std::abs(kset.pairs[target].mode[k] - c * moved[k]));
    }
    return r;
  };
  for (const auto& e : cls.rotational) {
    ModeCheckEntry m;
    m.rotational = true;
    m.i = m.j = e.index;
    m.residual = residual(e.index, e.index, e.c);
    m.passed = m.residual <= tol;
    out.passed = out.passed && m.passed;
    out.entries.push_back(m);
  }
  for (const auto& e : cls.reflectional) {
    ModeCheckEntry m;
    m.rotational = false;
    m.i = e.i;
    m.j = e.j;
    m.residual = residual(e.j, e.i, e.c);
    m.applicable = e.mutual;
    m.passed = m.residual <= tol;
    if (m.applicable) out.passed = out.passed && m.passed;
    out.entries.push_back(m);
  }
  return out;
}

InducedKoopmanSymmetry induced_Q(const SymmetryClassification& cls, std::span<const cd> spectrum,
                                 double tol) {
  if (!cls.unresolved.empty()) {
    throw PreconditionError("classification", "cannot induce Q with unresolved eigenfunctions");
  }
  const std::size_t N = spectrum.size();
  InducedKoopmanSymmetry out;
  out.perm.resize(N);
  std::iota(out.perm.begin(), out.perm.end(), 0);
  for (const auto& e : cls.reflectional) {
    if (e.i >= N || e.j >= N) throw std::invalid_argument("induced_Q: index out of range");
    out.perm[e.i] = e.j;
    out.perm[e.j] = e.i;
  }
  const auto n = static_cast<Eigen::Index>(N);
  out.Q = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < N; ++i) {
    out.Q(static_cast<Eigen::Index>(out.perm[i]), static_cast<Eigen::Index>(i)) = 1.0;
    if (out.perm[i] != i) out.identity = false;
  }
  CMatrix L = CMatrix::Zero(n, n);
  for (std::size_t i = 0; i < N; ++i) L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = spectrum[i];
  CMatrix Qc = out.Q.cast<cd>();
  double comm = (Qc * L - L * Qc).cwiseAbs().maxCoeff();
  double scale = 1.0 + L.cwiseAbs().maxCoeff();
  if (comm > tol * scale) {
    std::ostringstream os;
    os << "Q Lambda - Lambda Q has entry " << comm << "; eigenvalues are misgrouped";
    throw PreconditionError("commutation", os.str());
  }
  return out;
}

SymmetryVerdict symmetry_verdict(const NonlinearSystem& sys, const PermutationSymmetry& P,
                                 std::span<const Point> samples,
                                 std::span<const EigenGroup> groups) {
  SymmetryVerdict v;
  v.P = P;
  v.q = sys.q;
  v.state = verify_state_symmetry(sys, P, samples);
  if (!v.state.passed) {
    std::ostringstream os;
    os << "f(Px) != P f(x) for P = " << to_string(P) << " (residual " << v.state.residual << ")";
    throw PreconditionError("state-symmetry", os.str());
  }
  v.measurement = verify_measurement_symmetry(sys, P, samples);
  for (const auto& g : groups) {
    if (g.multiplicity > v.max_multiplicity) {
      v.max_multiplicity = g.multiplicity;
      if (g.multiplicity >= 2) {
        v.has_witness = true;
        v.witness_lambda = g.lambda;
      }
    }
  }
  std::ostringstream os;
  if (v.measurement.passed) {
    v.route = SymmetryRoute::MeasurementSymmetric;
    v.verdict = Verdict::Unobservable;
    os << "dynamics and measurement are invariant under P = " << to_string(P)
       << ", so x and Px give identical outputs";
  } else if (v.max_multiplicity > v.q) {
    v.route = SymmetryRoute::MultiplicityExceedsOutputs;
    v.verdict = Verdict::Unobservable;
    os << "q=" << v.q << " < max multiplicity " << v.max_multiplicity;
  } else {
    v.route = SymmetryRoute::Inconclusive;
    v.verdict = Verdict::Inconclusive;
    os << "measurement is not invariant under P = " << to_string(P)
       << " and q covers every multiplicity; defer to the rank test";
  }
  v.rationale = os.str();
  return v;
}

}  // namespace koopobs
