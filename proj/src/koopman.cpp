#include "koopobs/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace koopobs {

PreconditionError::PreconditionError(std::string check, const std::string& detail)
    : std::runtime_error(check + ": " + detail), check_(std::move(check)) {}

std::vector<cd> KoopmanSet::spectrum() const {
  std::vector<cd> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.lambda);
  return out;
}

ResidualReport validate_eigenpair(const NonlinearSystem& sys, const KoopmanEigenpair& pair,
                                  std::span<const Point> samples, double tol) {
  ComplexExpr generator = lie_derivative(pair.psi, sys.f);
  ResidualReport rep;
  rep.tolerance = tol;
  double sum = 0.0;
  for (const auto& x : samples) {
    cd psi = evaluate(pair.psi, x);
    cd lpsi = evaluate(generator, x);
    double r = std::abs(lpsi - pair.lambda * psi);
    rep.max_residual = std::max(rep.max_residual, r);
    rep.max_abs_psi = std::max(rep.max_abs_psi, std::abs(psi));
    sum += r;
  }
  if (!samples.empty()) rep.mean_residual = sum / static_cast<double>(samples.size());
  rep.passed = rep.max_residual <= tol * (1.0 + rep.max_abs_psi);
  return rep;
}

namespace {

bool is_real(cd lambda, double tol) {
  return std::fabs(lambda.imag()) <= tol * (1.0 + std::abs(lambda));
}

double max_abs(const std::vector<cd>& v) {
  double m = 0.0;
  for (auto c : v) m = std::max(m, std::abs(c));
  return m;
}

CMatrix sample_eigenfunctions(const KoopmanSet& kset, std::span<const Point> samples) {
  CMatrix m(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(kset.size()));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (std::size_t j = 0; j < kset.size(); ++j) {
      m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) =
          evaluate(kset.pairs[j].psi, samples[s]);
    }
  }
  return m;
}

std::string index_label(std::size_t i) { return "pair " + std::to_string(i + 1); }

}  // namespace

void check_koopman_set(const KoopmanSet& kset, std::span<const Point> samples, double group_tol) {
  if (kset.pairs.empty()) throw PreconditionError("koopman-set", "the set is empty");
  for (std::size_t i = 0; i < kset.size(); ++i) {
    const auto& p = kset.pairs[i];
    if (p.mode.size() != kset.n) {
      throw PreconditionError("koopman-set", index_label(i) + " has a mode of wrong length");
    }
    if (max_abs(p.mode) == 0.0) {
      throw PreconditionError("koopman-set", index_label(i) + " has a zero mode");
    }
    if (p.psi.re.max_var() > kset.n || (p.psi.im && p.psi.im->max_var() > kset.n)) {
      throw PreconditionError("koopman-set", index_label(i) + " uses a variable beyond n");
    }
  }
  for (std::size_t i = 0; i < kset.size(); ++i) {
    cd l = kset.pairs[i].lambda;
    if (is_real(l, group_tol)) continue;
    if (i + 1 >= kset.size() ||
        std::abs(kset.pairs[i + 1].lambda - std::conj(l)) > group_tol * (1.0 + std::abs(l))) {
      throw PreconditionError("conjugate-pairs", index_label(i) +
                                                     " is complex but its conjugate is not the "
                                                     "next entry");
    }
    ++i;
  }
  std::size_t need = 10 * kset.size();
  if (samples.size() < need) {
    throw std::invalid_argument("check_koopman_set: need at least " + std::to_string(need) +
                                " samples");
  }
  CMatrix m = sample_eigenfunctions(kset, samples);
  int rank = numerical_rank(m);
  if (rank < static_cast<int>(kset.size())) {
    throw PreconditionError("independence", "sampled eigenfunction matrix has rank " +
                                                std::to_string(rank) + " < " +
                                                std::to_string(kset.size()));
  }
}

std::vector<cd> CanonicalSystem::spectrum() const {
  std::vector<cd> out;
  for (const auto& b : blocks) {
    out.push_back(b.lambda);
    if (b.size == 2) out.push_back(std::conj(b.lambda));
  }
  return out;
}

CanonicalSystem build_canonical(const KoopmanSet& kset, std::span<const Point> samples,
                                double group_tol) {
  if (kset.pairs.empty()) {
    throw PreconditionError("state-span", "cannot span state: the Koopman set is empty");
  }
  const std::size_t n = kset.n;
  const std::size_t N = kset.size();
  CanonicalSystem cs;
  cs.n = n;
  cs.N = N;
  cs.Lambda = Matrix::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  cs.V = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(N));
  cs.coords.resize(N);

  for (std::size_t i = 0; i < N; ++i) {
    const auto& p = kset.pairs[i];
    if (p.mode.size() != n) {
      throw PreconditionError("koopman-set", index_label(i) + " has a mode of wrong length");
    }
    const auto col = static_cast<Eigen::Index>(i);
    if (is_real(p.lambda, group_tol)) {
      if (!p.psi.is_real()) {
        throw PreconditionError("koopman-set", index_label(i) +
                                                   " has a real eigenvalue but a complex "
                                                   "eigenfunction; split it into real parts");
      }
      double scale = max_abs(p.mode);
      for (std::size_t r = 0; r < n; ++r) {
        if (std::fabs(p.mode[r].imag()) > 1e-12 * (1.0 + scale)) {
          throw PreconditionError("koopman-set",
                                  index_label(i) + " has a real eigenvalue but a complex mode");
        }
        cs.V(static_cast<Eigen::Index>(r), col) = p.mode[r].real();
      }
      cs.Lambda(col, col) = p.lambda.real();
      cs.coords[i] = p.psi.re;
      cs.blocks.push_back({i, 1, cd(p.lambda.real(), 0.0)});
      continue;
    }

    if (i + 1 >= N ||
        std::abs(kset.pairs[i + 1].lambda - std::conj(p.lambda)) >
            group_tol * (1.0 + std::abs(p.lambda))) {
      throw PreconditionError("conjugate-pairs",
                              "unpaired complex eigenvalue at " + index_label(i));
    }
    const auto& partner = kset.pairs[i + 1];
    if (partner.mode.size() != n) {
      throw PreconditionError("koopman-set", index_label(i + 1) + " has a mode of wrong length");
    }
    double scale = max_abs(p.mode);
    for (std::size_t r = 0; r < n; ++r) {
      if (std::abs(partner.mode[r] - std::conj(p.mode[r])) > 1e-9 * (1.0 + scale)) {
        throw PreconditionError("conjugate-pairs",
                                index_label(i + 1) + " mode is not the conjugate of its partner");
      }
    }
    for (const auto& x : samples) {
      cd a = evaluate(p.psi, x);
      cd b = evaluate(partner.psi, x);
      if (std::abs(b - std::conj(a)) > 1e-9 * (1.0 + std::abs(a))) {
        throw PreconditionError("conjugate-pairs", index_label(i + 1) +
                                                       " eigenfunction is not the conjugate of "
                                                       "its partner");
      }
    }
    const double mag = std::abs(p.lambda);
    const double ang = std::arg(p.lambda);
    cs.Lambda(col, col) = mag * std::cos(ang);
    cs.Lambda(col, col + 1) = mag * std::sin(ang);
    cs.Lambda(col + 1, col) = -mag * std::sin(ang);
    cs.Lambda(col + 1, col + 1) = mag * std::cos(ang);
    for (std::size_t r = 0; r < n; ++r) {
      cs.V(static_cast<Eigen::Index>(r), col) = 2.0 * p.mode[r].real();
      cs.V(static_cast<Eigen::Index>(r), col + 1) = 2.0 * p.mode[r].imag();
    }
    cs.coords[i] = p.psi.re;
    cs.coords[i + 1] = partner.psi.im ? *partner.psi.im : Expr();
    cs.blocks.push_back({i, 2, p.lambda});
    ++i;
  }

  double worst = 0.0;
  for (const auto& x : samples) {
    Vector z = transform(cs, x);
    Vector xr = cs.V * z;
    double norm = 0.0;
    double err = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      norm = std::max(norm, std::fabs(x[r]));
      err = std::max(err, std::fabs(xr[static_cast<Eigen::Index>(r)] - x[r]));
    }
    worst = std::max(worst, err / (1.0 + norm));
  }
  if (worst > 1e-8) {
    std::ostringstream os;
    os << "cannot span state: reconstruction residual " << worst << " exceeds 1e-8";
    throw PreconditionError("state-span", os.str());
  }
  return cs;
}

Matrix expand_measurement(const NonlinearSystem& sys, const CanonicalSystem& cs,
                          std::span<const Point> samples) {
  const std::size_t need = 10 * cs.N;
  if (samples.size() < need) {
    throw std::invalid_argument("expand_measurement: need at least " + std::to_string(need) +
                                " samples");
  }
  const auto S = static_cast<Eigen::Index>(samples.size());
  Matrix Z(S, static_cast<Eigen::Index>(cs.N));
  Matrix H(S, static_cast<Eigen::Index>(sys.q));
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto& x = samples[static_cast<std::size_t>(s)];
    Z.row(s) = transform(cs, x).transpose();
    auto y = evaluate(sys.h, x);
    for (std::size_t j = 0; j < sys.q; ++j) H(s, static_cast<Eigen::Index>(j)) = y[j];
  }
  Matrix Ct = least_squares(Z, H);
  Matrix resid = Z * Ct - H;
  double scale = 1.0 + H.cwiseAbs().maxCoeff();
  double worst = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
  if (worst > 1e-8 * scale) {
    std::ostringstream os;
    os << "measurement not in Koopman span (residual " << worst << ")";
    throw PreconditionError("measurement-span", os.str());
  }
  return Ct.transpose();
}

CanonicalSystem build_canonical(const NonlinearSystem& sys, const KoopmanSet& kset,
                                std::span<const Point> samples, double group_tol) {
  CanonicalSystem cs = build_canonical(kset, samples, group_tol);
  cs.C = expand_measurement(sys, cs, samples);
  return cs;
}

Vector transform(const CanonicalSystem& cs, std::span<const double> x) {
  Vector z(static_cast<Eigen::Index>(cs.N));
  for (std::size_t i = 0; i < cs.N; ++i) z[static_cast<Eigen::Index>(i)] = evaluate(cs.coords[i], x);
  return z;
}

Vector reconstruct_state(const CanonicalSystem& cs, const Vector& z) {
  if (static_cast<std::size_t>(z.size()) != cs.N) {
    throw std::invalid_argument("reconstruct_state: z has length " + std::to_string(z.size()) +
                                ", expected " + std::to_string(cs.N));
  }
  return cs.V * z;
}

Vector propagate(const CanonicalSystem& cs, const Vector& z0, double t) {
  if (static_cast<std::size_t>(z0.size()) != cs.N) {
    throw std::invalid_argument("propagate: dimension mismatch");
  }
  Vector z(z0.size());
  for (const auto& b : cs.blocks) {
    const auto i = static_cast<Eigen::Index>(b.start);
    if (b.size == 1) {
      z[i] = std::exp(b.lambda.real() * t) * z0[i];
      continue;
    }
    double decay = std::exp(b.lambda.real() * t);
    double c = std::cos(b.lambda.imag() * t);
    double s = std::sin(b.lambda.imag() * t);
    z[i] = decay * (c * z0[i] + s * z0[i + 1]);
    z[i + 1] = decay * (-s * z0[i] + c * z0[i + 1]);
  }
  return z;
}

}  // namespace koopobs
