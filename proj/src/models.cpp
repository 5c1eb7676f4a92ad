#include "koopobs/models.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace koopobs {

namespace {

Expr linear_form(const std::vector<double>& coeffs) {
  double scale = 0.0;
  for (double c : coeffs) scale = std::max(scale, std::fabs(c));
  Expr out;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (std::fabs(coeffs[j]) <= 1e-14 * scale) continue;
    out = out + Expr::constant(coeffs[j]) * Expr::var(j + 1);
  }
  return out;
}

ComplexExpr complex_linear_form(const CVector& w) {
  std::vector<double> re(static_cast<std::size_t>(w.size()));
  std::vector<double> im(re.size());
  bool any_imag = false;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    re[static_cast<std::size_t>(j)] = w[j].real();
    im[static_cast<std::size_t>(j)] = w[j].imag();
    any_imag = any_imag || w[j].imag() != 0.0;
  }
  ComplexExpr e{linear_form(re), std::nullopt};
  if (any_imag) e.im = linear_form(im);
  return e;
}

std::vector<cd> to_std(const CVector& v) { return {v.data(), v.data() + v.size()}; }

/// Koopman set of a linear system from eigenfunction coefficient rows;
/// modes are the columns of the inverse coefficient matrix.
KoopmanSet set_from_coefficients(const CMatrix& W, const std::vector<cd>& lambdas) {
  CMatrix modes = W.inverse();
  KoopmanSet ks;
  ks.n = static_cast<std::size_t>(W.cols());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    ks.pairs.push_back({lambdas[static_cast<std::size_t>(i)],
                        complex_linear_form(W.row(i).transpose()), to_std(modes.col(i))});
  }
  return ks;
}

Box symmetric_box(std::size_t n, double half_width) {
  return Box(n, Interval{-half_width, half_width});
}

Expr sum_of_states(std::size_t n) {
  Expr out;
  for (std::size_t i = 1; i <= n; ++i) out = out + Expr::var(i);
  return out;
}

}  // namespace

ExprVector linear_field(const Matrix& A) {
  ExprVector f;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(A.cols()));
    for (Eigen::Index j = 0; j < A.cols(); ++j) row[static_cast<std::size_t>(j)] = A(i, j);
    Expr e;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) e = e + Expr::constant(row[j]) * Expr::var(j + 1);
    }
    f.push_back(e);
  }
  return f;
}

LinearSystemModel linear_model(std::string name, const Matrix& A, ExprVector h, Box domain) {
  if (A.rows() != A.cols()) throw std::invalid_argument("linear_model: A must be square");
  LinearSystemModel m;
  m.name = name;
  m.A = A;
  m.system = make_system(std::move(name), linear_field(A), std::move(h), std::move(domain));
  return m;
}

KoopmanSet linear_koopman_extract(const Matrix& A) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw std::invalid_argument("linear_koopman_extract: A must be square and non-empty");
  }
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Matrix> es(A, true);
  if (es.info() != Eigen::Success) {
    throw PreconditionError("diagonalizable", "eigen decomposition did not converge");
  }
  const CVector vals = es.eigenvalues();
  const CMatrix vecs = es.eigenvectors();

  std::vector<cd> lambdas;
  CMatrix R(n, n);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  Eigen::Index col = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (used[static_cast<std::size_t>(k)]) continue;
    used[static_cast<std::size_t>(k)] = true;
    cd l = vals[k];
    if (std::fabs(l.imag()) <= 1e-12 * (1.0 + std::abs(l))) {
      lambdas.emplace_back(l.real(), 0.0);
      R.col(col++) = vecs.col(k).real().cast<cd>();
      continue;
    }
    Eigen::Index partner = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!used[static_cast<std::size_t>(j)] &&
          std::abs(vals[j] - std::conj(l)) <= 1e-10 * (1.0 + std::abs(l))) {
        partner = j;
        break;
      }
    }
    if (partner < 0) {
      throw PreconditionError("conjugate-pairs", "complex eigenvalue without a conjugate");
    }
    used[static_cast<std::size_t>(partner)] = true;
    CVector v = l.imag() > 0 ? CVector(vecs.col(k)) : CVector(vecs.col(partner));
    cd lp = l.imag() > 0 ? l : vals[partner];
    lambdas.push_back(lp);
    lambdas.push_back(std::conj(lp));
    R.col(col++) = v;
    R.col(col++) = v.conjugate();
  }

  double cond = condition_number(R);
  if (!(cond < 1e8)) {
    throw PreconditionError("diagonalizable",
                            "eigenvector matrix condition number " + std::to_string(cond) +
                                " is not below 1e8; A is defective or nearly so");
  }
  CMatrix W = R.inverse();
  KoopmanSet ks;
  ks.n = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (lambdas[i].imag() == 0.0) {
      CVector w = W.row(ii).real().cast<cd>().transpose();
      CVector v = R.col(ii).real().cast<cd>();
      ks.pairs.push_back({lambdas[i], complex_linear_form(w), to_std(v)});
      continue;
    }
    CVector w = W.row(ii).transpose();
    CVector v = R.col(ii);
    ks.pairs.push_back({lambdas[i], complex_linear_form(w), to_std(v)});
    ks.pairs.push_back({lambdas[i + 1], complex_linear_form(w.conjugate()), to_std(v.conjugate())});
    ++i;
  }
  return ks;
}

BuiltinModel consensus_undirected() {
  Matrix A(3, 3);
  A << -2, 1, 1, 1, -2, 1, 1, 1, -2;
  BuiltinModel m;
  m.name = "consensus-undirected";
  m.description = "undirected 3-agent consensus, y = x1";
  m.system = linear_model(m.name, A, {Expr::var(1)}, symmetric_box(3, 2.0)).system;
  m.alt_measurement = ExprVector{sum_of_states(3)};
  CMatrix W(3, 3);
  W << 1.0, 1.0, 1.0, -1.3223, 1.0954, 0.2269, 1.0954, 0.2269, -1.3223;
  m.koopman = set_from_coefficients(W, {0.0, -3.0, -3.0});
  m.koopman->validation_tol = 1e-3;
  m.symmetry = PermutationSymmetry({2, 3, 1});
  m.default_x0 = {1.0, 2.0, 3.0};
  m.default_t = 2.0;
  return m;
}

BuiltinModel consensus_directed() {
  Matrix A(3, 3);
  A << -1, 0, 1, 1, -1, 0, 0, 1, -1;
  BuiltinModel m;
  m.name = "consensus-directed";
  m.description = "directed 3-cycle consensus, y = x1";
  m.system = linear_model(m.name, A, {Expr::var(1)}, symmetric_box(3, 2.0)).system;
  m.alt_measurement = ExprVector{sum_of_states(3)};
  const cd w(-0.5, std::sqrt(3.0) / 2.0);
  CMatrix W(3, 3);
  W << 1.0, 1.0, 1.0, 1.0, w, std::conj(w), 1.0, std::conj(w), w;
  m.koopman = set_from_coefficients(W, {0.0, -1.0 + w, -1.0 + std::conj(w)});
  m.symmetry = PermutationSymmetry({2, 3, 1});
  m.default_x0 = {1.0, 2.0, 3.0};
  m.default_t = 2.0;
  return m;
}

BuiltinModel example2() {
  BuiltinModel m;
  m.name = "example2";
  m.description = "polynomial system with a swap symmetry of x1 and x2";
  ExprVector f = {parse("x1", 3), parse("x2", 3), parse("-2*x1^2 - 2*x2^2 + 4*x3", 3)};
  m.system = make_system(m.name, std::move(f), {parse("x1^2 + x2^2 + x3", 3)},
                         symmetric_box(3, 2.0));
  m.alt_measurement = ExprVector{parse("2*x1 - x2^2 + x3", 3), parse("-x1^2 + x2 + x3", 3)};
  KoopmanSet ks;
  ks.n = 3;
  auto pair = [](double l, const char* psi, std::vector<cd> v) {
    return KoopmanEigenpair{cd(l, 0.0), ComplexExpr{parse(psi, 3), std::nullopt}, std::move(v)};
  };
  ks.pairs = {pair(1, "x1", {1, 0, 0}), pair(1, "x2", {0, 1, 0}), pair(2, "x1^2", {0, 0, 1}),
              pair(2, "x2^2", {0, 0, 1}), pair(4, "-x1^2 - x2^2 + x3", {0, 0, 1})};
  m.koopman = std::move(ks);
  m.symmetry = PermutationSymmetry({2, 1, 3});
  m.default_x0 = {1.0, 2.0, 1.0};
  m.default_t = 1.0;
  return m;
}

Point nems_initial_condition(std::size_t N, std::uint64_t seed) {
  Rng rng(seed);
  Point x(2 * N);
  for (std::size_t i = 0; i < N; ++i) x[i] = rng.uniform(0.8, 1.2);
  for (std::size_t i = 0; i < N; ++i) x[N + i] = std::numbers::pi - 2.0 * std::numbers::pi * rng.uniform();
  return x;
}

BuiltinModel nems_ring(std::size_t N, double alpha, double beta) {
  if (N < 3) throw std::invalid_argument("nems_ring: need at least 3 oscillators");
  auto a = [N](std::size_t i) { return Expr::var((i + N) % N + 1); };
  auto phi = [N](std::size_t i) { return Expr::var(N + (i + N) % N + 1); };
  const Expr half_beta = Expr::constant(beta / 2.0);
  ExprVector f(2 * N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t next = i + 1;
    const std::size_t prev = i + N - 1;
    Expr da = -((a(i) - Expr::constant(1.0)) / Expr::constant(2.0)) -
              half_beta * (a(next) * sin(phi(next) - phi(i)) + a(prev) * sin(phi(prev) - phi(i)));
    Expr dphi = Expr::constant(alpha) * pow(a(i), 2) +
                half_beta / a(i) *
                    (a(next) * cos(phi(next) - phi(i)) + a(prev) * cos(phi(prev) - phi(i)) -
                     Expr::constant(2.0));
    f[i] = da;
    f[N + i] = dphi;
  }
  Expr h;
  for (std::size_t i = 0; i < N; ++i) h = h + cos(phi(i) - phi(i + 1));

  Box box;
  for (std::size_t i = 0; i < N; ++i) box.push_back({0.5, 1.5});
  for (std::size_t i = 0; i < N; ++i) box.push_back({-std::numbers::pi, std::numbers::pi});

  BuiltinModel m;
  m.name = "nems-ring";
  m.description = "ring of " + std::to_string(N) + " amplitude-phase oscillators";
  m.system = make_system(m.name, std::move(f), {h}, std::move(box));
  for (std::size_t i = 1; i <= N; ++i) m.system.guards.push_back({i, 1e-6});
  for (std::size_t i = 1; i <= N; ++i) m.system.phase_coords.push_back(N + i);

  const std::size_t shift = N % 2 == 0 ? N / 2 : 1;
  std::vector<std::size_t> perm(2 * N);
  for (std::size_t i = 0; i < N; ++i) {
    perm[i] = (i + shift) % N + 1;
    perm[N + i] = N + (i + shift) % N + 1;
  }
  m.symmetry = PermutationSymmetry(std::move(perm));
  m.default_x0 = nems_initial_condition(N, 42);
  m.default_t = 50.0;
  return m;
}

std::vector<std::string> builtin_model_names() {
  return {"consensus-undirected", "consensus-directed", "example2", "nems-ring"};
}

BuiltinModel builtin_model(const std::string& name) {
  if (name == "consensus-undirected") return consensus_undirected();
  if (name == "consensus-directed") return consensus_directed();
  if (name == "example2") return example2();
  if (name == "nems-ring") return nems_ring();
  throw std::invalid_argument("unknown model '" + name + "'");
}

}  // namespace koopobs
