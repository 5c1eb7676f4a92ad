#include "koopobs/observability.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace koopobs {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Observable:
      return "Observable";
    case Verdict::Unobservable:
      return "Unobservable";
    case Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::KoopmanRank:
      return "KoopmanRank";
    case Method::LieRank:
      return "LieRank";
    case Method::EmpiricalGramian:
      return "EmpiricalGramian";
  }
  return "?";
}

std::vector<CVector> gram_schmidt(const std::vector<CVector>& vectors) {
  std::vector<CVector> basis;
  for (const auto& v : vectors) {
    CVector w = v;
    for (const auto& b : basis) w -= b.dot(w) * b;
    // second pass keeps orthogonality at the 1e-15 level
    for (const auto& b : basis) w -= b.dot(w) * b;
    double norm = w.norm();
    if (norm <= 1e-12 * std::max(1.0, v.norm())) continue;
    basis.push_back(w / norm);
  }
  return basis;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

std::vector<std::vector<std::size_t>> cluster(std::span<const cd> spectrum, double tol) {
  const std::size_t m = spectrum.size();
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double scale = 1.0 + std::max(std::abs(spectrum[i]), std::abs(spectrum[j]));
      if (std::abs(spectrum[i] - spectrum[j]) <= tol * scale) {
        parent[find_root(parent, j)] = find_root(parent, i);
      }
    }
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::ptrdiff_t> slot(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t root = find_root(parent, i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[root])].push_back(i);
  }
  return groups;
}

}  // namespace

std::vector<EigenGroup> group_eigenvalues(std::span<const cd> spectrum, double tol) {
  std::vector<EigenGroup> out;
  const auto m = static_cast<Eigen::Index>(spectrum.size());
  for (auto& members : cluster(spectrum, tol)) {
    EigenGroup g;
    g.lambda = spectrum[members.front()];
    g.multiplicity = members.size();
    std::vector<CVector> vecs;
    for (std::size_t idx : members) {
      CVector e = CVector::Zero(m);
      e[static_cast<Eigen::Index>(idx)] = 1.0;
      vecs.push_back(e);
    }
    g.eigenvectors = gram_schmidt(vecs);
    g.indices = std::move(members);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<EigenGroup> eigen_groups(const CanonicalSystem& cs, double tol) {
  const auto N = static_cast<Eigen::Index>(cs.N);
  std::vector<cd> spectrum;
  std::vector<CVector> vectors;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (const auto& b : cs.blocks) {
    const auto i = static_cast<Eigen::Index>(b.start);
    if (b.size == 1) {
      CVector e = CVector::Zero(N);
      e[i] = 1.0;
      spectrum.push_back(b.lambda);
      vectors.push_back(e);
      continue;
    }
    // [[a, b], [-b, a]] (1, +-i) = (a +- ib) (1, +-i)
    CVector up = CVector::Zero(N);
    up[i] = inv_sqrt2;
    up[i + 1] = cd(0.0, inv_sqrt2);
    CVector down = up.conjugate();
    spectrum.push_back(b.lambda);
    vectors.push_back(up);
    spectrum.push_back(std::conj(b.lambda));
    vectors.push_back(down);
  }
  std::vector<EigenGroup> out;
  for (auto& members : cluster(spectrum, tol)) {
    EigenGroup g;
    g.lambda = spectrum[members.front()];
    g.multiplicity = members.size();
    std::vector<CVector> vecs;
    for (std::size_t idx : members) vecs.push_back(vectors[idx]);
    g.eigenvectors = gram_schmidt(vecs);
    g.indices = std::move(members);
    out.push_back(std::move(g));
  }
  return out;
}

CMatrix build_observability_matrix(const EigenGroup& group, const Matrix& C) {
  const auto r = static_cast<Eigen::Index>(group.eigenvectors.size());
  CMatrix O(C.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const CVector& w = group.eigenvectors[static_cast<std::size_t>(j)];
    if (w.size() != C.cols()) {
      throw std::invalid_argument("build_observability_matrix: eigenvector length " +
                                  std::to_string(w.size()) + " does not match C with " +
                                  std::to_string(C.cols()) + " columns");
    }
    O.col(j) = C.cast<cd>() * w;
  }
  return O;
}

ObservabilityReport koopman_rank_test(const CanonicalSystem& cs, const RankTolerances& tol) {
  if (!cs.has_measurement()) {
    throw std::invalid_argument("koopman_rank_test: canonical system has no measurement matrix");
  }
  ObservabilityReport rep;
  rep.method = Method::KoopmanRank;
  rep.tolerances = {{"group", tol.group}, {"rank", tol.rank}};
  // rank of each O_i is judged against the scale of the whole C so that
  // least-squares noise in structurally zero entries does not count
  const double scale = singular_values(cs.C)[0];
  for (auto& g : eigen_groups(cs, tol.group)) {
    GroupResult res;
    res.O = build_observability_matrix(g, cs.C);
    res.rank = numerical_rank(res.O, tol.rank, scale);
    res.passed = res.rank == static_cast<int>(g.multiplicity);
    res.group = std::move(g);
    if (!res.passed) rep.failing_groups.push_back(rep.groups.size());
    rep.groups.push_back(std::move(res));
  }
  rep.verdict = rep.failing_groups.empty() ? Verdict::Observable : Verdict::Unobservable;
  return rep;
}

std::size_t min_measurements(const ObservabilityReport& report) {
  std::size_t m = 0;
  for (const auto& g : report.groups) m = std::max(m, g.group.multiplicity);
  return std::max<std::size_t>(m, 1);
}

PointCheck lie_rank_test(const NonlinearSystem& sys, const Point& x0, const LieOptions& opts) {
  const std::size_t n = sys.n;
  const std::size_t max_order = opts.max_order == 0 ? n : opts.max_order;
  PointCheck out;
  out.x0 = x0;
  out.required = n;

  ExprVector current = sys.h;
  Matrix stacked(0, static_cast<Eigen::Index>(n));
  int prev_rank = -1;
  for (std::size_t k = 0; k < max_order; ++k) {
    if (k > 0) {
      for (auto& e : current) {
        e = lie_derivative(e, sys.f);
        if (node_count(e, opts.node_budget) > opts.node_budget) {
          throw ExpressionTooLarge("Lie derivative of order " + std::to_string(k) +
                                   " exceeds the node budget of " +
                                   std::to_string(opts.node_budget));
        }
      }
    }
    const auto base = stacked.rows();
    stacked.conservativeResize(base + static_cast<Eigen::Index>(current.size()), Eigen::NoChange);
    for (std::size_t j = 0; j < current.size(); ++j) {
      for (std::size_t i = 1; i <= n; ++i) {
        stacked(base + static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i - 1)) =
            evaluate(differentiate(current[j], i), x0);
      }
    }
    out.orders = k + 1;
    int rank = numerical_rank(stacked, opts.rank_eps);
    out.rank = rank;
    if (rank == static_cast<int>(n) || rank == prev_rank) break;
    prev_rank = rank;
  }
  Vector s = singular_values(stacked);
  out.singular_values.assign(s.data(), s.data() + s.size());
  return out;
}

ObservabilityReport lie_rank_report(const NonlinearSystem& sys, std::span<const Point> points,
                                    const LieOptions& opts) {
  ObservabilityReport rep;
  rep.method = Method::LieRank;
  rep.tolerances = {{"rank", opts.rank_eps},
                    {"max_order", static_cast<double>(opts.max_order == 0 ? sys.n : opts.max_order)}};
  rep.samples = points.size();
  bool all = true;
  for (const auto& x0 : points) {
    rep.points.push_back(lie_rank_test(sys, x0, opts));
    all = all && rep.points.back().rank == static_cast<int>(sys.n);
  }
  rep.verdict = points.empty() ? Verdict::Inconclusive
                               : (all ? Verdict::Observable : Verdict::Unobservable);
  return rep;
}

GramianResult empirical_gramian(const NonlinearSystem& sys, const Point& x0,
                                const GramianOptions& opts) {
  if (!(opts.eps > 0.0)) throw std::invalid_argument("empirical_gramian: eps must be positive");
  const std::size_t n = sys.n;
  FlowOptions fo;
  fo.dt = opts.dt;

  // 2n independent runs; results are collected by index so the reduction
  // order never depends on scheduling
  std::vector<std::future<Trajectory>> runs;
  runs.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      Point x = x0;
      x[i] += sign * opts.eps;
      runs.push_back(std::async(std::launch::async, [&sys, x, &opts, fo] {
        return flow(sys, x, opts.t_final, fo);
      }));
    }
  }
  std::vector<Trajectory> trajs;
  trajs.reserve(runs.size());
  for (auto& r : runs) trajs.push_back(r.get());

  const std::size_t steps = trajs.front().size();
  const auto q = static_cast<Eigen::Index>(sys.q);
  Matrix G = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Matrix phi(q, static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& yp = trajs[2 * i].measurements[k];
      const auto& ym = trajs[2 * i + 1].measurements[k];
      for (Eigen::Index j = 0; j < q; ++j) {
        phi(j, static_cast<Eigen::Index>(i)) =
            yp[static_cast<std::size_t>(j)] - ym[static_cast<std::size_t>(j)];
      }
    }
    double w = 0.0;
    const auto& t = trajs.front().times;
    if (k > 0) w += 0.5 * (t[k] - t[k - 1]);
    if (k + 1 < steps) w += 0.5 * (t[k + 1] - t[k]);
    G.noalias() += w * (phi.transpose() * phi);
  }
  G /= 4.0 * opts.eps * opts.eps;

  GramianResult res;
  res.G = G;
  res.singular_values = singular_values(G);
  double smax = res.singular_values.size() ? res.singular_values[0] : 0.0;
  res.rank = smax > 0.0 ? count_above(res.singular_values, smax * opts.rank_eps) : 0;
  return res;
}

ObservabilityReport gramian_report(const NonlinearSystem& sys, std::span<const Point> points,
                                   const GramianOptions& opts) {
  ObservabilityReport rep;
  rep.method = Method::EmpiricalGramian;
  rep.tolerances = {{"rank", opts.rank_eps},
                    {"eps", opts.eps},
                    {"t_final", opts.t_final},
                    {"dt", opts.dt}};
  rep.samples = points.size();
  bool all = true;
  for (const auto& x0 : points) {
    GramianResult g = empirical_gramian(sys, x0, opts);
    PointCheck pc;
    pc.x0 = x0;
    pc.rank = g.rank;
    pc.required = sys.n;
    pc.singular_values.assign(g.singular_values.data(),
                              g.singular_values.data() + g.singular_values.size());
    all = all && pc.rank == static_cast<int>(sys.n);
    rep.points.push_back(std::move(pc));
  }
  rep.verdict = points.empty() ? Verdict::Inconclusive
                               : (all ? Verdict::Observable : Verdict::Unobservable);
  return rep;
}

}  // namespace koopobs
