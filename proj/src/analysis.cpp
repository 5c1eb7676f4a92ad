#include "koopobs/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace koopobs {

const char* theorem_label(Basis b) {
  switch (b) {
    case Basis::RankCondition:
      return "Theorem 1";
    case Basis::SymmetricMeasurement:
      return "Theorem 3";
    case Basis::MultiplicityBound:
      return "Corollary 3";
  }
  return "";
}

Basis basis_of(SymmetryRoute route) {
  return route == SymmetryRoute::MultiplicityExceedsOutputs ? Basis::MultiplicityBound
                                                            : Basis::SymmetricMeasurement;
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Observable:
      return 0;
    case Verdict::Unobservable:
      return 3;
    case Verdict::Inconclusive:
      return 4;
  }
  return 4;
}

Verdict parse_verdict(std::string_view s) {
  if (s == "Observable") return Verdict::Observable;
  if (s == "Unobservable") return Verdict::Unobservable;
  if (s == "Inconclusive") return Verdict::Inconclusive;
  throw std::invalid_argument("unknown verdict '" + std::string(s) + "'");
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ModelConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(write_config(cfg))));
  return std::string("fnv1a64:") + buf;
}

namespace {

Json complex_json(cd c) { return Json{{"re", c.real()}, {"im", c.imag()}}; }

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json point_json(const Point& p) { return Json(p); }

Json check_json(const SymmetryCheck& c) {
  return Json{{"passed", c.passed}, {"residual", c.residual}, {"samples", c.samples}};
}

const char* route_name(SymmetryRoute r) {
  switch (r) {
    case SymmetryRoute::MeasurementSymmetric:
      return "symmetric-measurement";
    case SymmetryRoute::MultiplicityExceedsOutputs:
      return "multiplicity-exceeds-outputs";
    case SymmetryRoute::Inconclusive:
      return "inconclusive";
  }
  return "";
}

}  // namespace

Json to_json(const ObservabilityReport& rep) {
  Json j;
  j["method"] = to_string(rep.method);
  j["status"] = "ok";
  j["verdict"] = to_string(rep.verdict);
  if (rep.method == Method::KoopmanRank) j["theorem"] = theorem_label(Basis::RankCondition);
  Json groups = Json::array();
  for (const auto& g : rep.groups) {
    groups.push_back(Json{{"lambda_re", g.group.lambda.real()},
                          {"lambda_im", g.group.lambda.imag()},
                          {"multiplicity", g.group.multiplicity},
                          {"rank", g.rank},
                          {"required", g.group.multiplicity},
                          {"passed", g.passed}});
  }
  j["groups"] = std::move(groups);
  if (rep.method == Method::KoopmanRank) {
    j["failing_groups"] = rep.failing_groups;
    j["min_measurements"] = min_measurements(rep);
  }
  Json points = Json::array();
  for (const auto& p : rep.points) {
    Json pj{{"x0", point_json(p.x0)}, {"rank", p.rank}, {"required", p.required}};
    if (rep.method == Method::LieRank) pj["orders"] = p.orders;
    pj["singular_values"] = p.singular_values;
    points.push_back(std::move(pj));
  }
  j["points"] = std::move(points);
  Json tol = Json::object();
  for (const auto& [k, v] : rep.tolerances) tol[k] = v;
  j["tolerances"] = std::move(tol);
  j["samples"] = rep.samples;
  return j;
}

Json to_json(const SymmetryClassification& cls) {
  Json rot = Json::array();
  for (const auto& r : cls.rotational) {
    rot.push_back(Json{{"index", r.index + 1}, {"c", complex_json(r.c)}, {"residual", r.residual}});
  }
  Json refl = Json::array();
  for (const auto& r : cls.reflectional) {
    refl.push_back(Json{{"i", r.i + 1},
                        {"j", r.j + 1},
                        {"c", complex_json(r.c)},
                        {"residual", r.residual},
                        {"mutual", r.mutual}});
  }
  Json unres = Json::array();
  for (auto i : cls.unresolved) unres.push_back(i + 1);
  return Json{{"rotational", rot}, {"reflectional", refl}, {"unresolved", unres}};
}

AnalysisResult analyze(const ModelConfig& cfg) {
  const NonlinearSystem& sys = cfg.system;
  const AnalysisSettings& st = cfg.analysis;
  const Rng root(st.seed);

  std::size_t sample_count = st.samples;
  if (cfg.koopman) sample_count = std::max(sample_count, 10 * cfg.koopman->size());
  Rng sample_rng = root.split(1);
  const std::vector<Point> samples = sample_box(sys.domain, sample_count, sample_rng);
  std::vector<Point> points = st.points;
  if (points.empty()) {
    Rng point_rng = root.split(2);
    points = sample_box(sys.domain, st.lie_points, point_rng);
  }

  Json bundle;
  bundle["schema"] = kBundleSchema;
  bundle["provenance"] = Json{{"tool", kToolName},
                              {"version", kToolVersion},
                              {"config_hash", config_hash(cfg)},
                              {"seed", st.seed}};
  Json model{{"name", sys.name}, {"n", sys.n}, {"q", sys.q}};
  Json fj = Json::array();
  for (const auto& e : sys.f) fj.push_back(to_string(e));
  Json hj = Json::array();
  for (const auto& e : sys.h) hj.push_back(to_string(e));
  model["f"] = std::move(fj);
  model["h"] = std::move(hj);
  bundle["model"] = std::move(model);
  bundle["settings"] = Json{{"tol_rank", st.tol_rank},
                            {"tol_group", st.tol_group},
                            {"samples", sample_count},
                            {"lie_points", points.size()},
                            {"lie_max_order", st.lie_max_order == 0 ? sys.n : st.lie_max_order},
                            {"node_budget", st.node_budget},
                            {"gramian_eps", st.gramian_eps},
                            {"gramian_t", st.gramian_t},
                            {"dt", st.dt}};

  Json reports = Json::array();
  std::vector<std::pair<std::string, Verdict>> votes;
  std::optional<ObservabilityReport> rank_report;
  std::optional<CanonicalSystem> canonical;
  std::vector<EigenGroup> groups;

  // Koopman route
  Json kj;
  if (cfg.koopman) {
    KoopmanSet kset = *cfg.koopman;
    if (st.koopman_tol) kset.validation_tol = *st.koopman_tol;
    Json validation = Json::array();
    for (std::size_t i = 0; i < kset.size(); ++i) {
      ResidualReport r = validate_eigenpair(sys, kset.pairs[i], samples, kset.validation_tol);
      validation.push_back(Json{{"index", i + 1},
                                {"lambda", complex_json(kset.pairs[i].lambda)},
                                {"max_residual", r.max_residual},
                                {"mean_residual", r.mean_residual},
                                {"passed", r.passed}});
      if (!r.passed) {
        std::ostringstream os;
        os << "eigenpair " << i + 1 << " has generator residual " << r.max_residual
           << " above " << kset.validation_tol << " (1 + max|psi|)";
        throw PreconditionError("eigenpair-residual", os.str());
      }
    }
    check_koopman_set(kset, samples, st.tol_group);
    canonical = build_canonical(sys, kset, samples, st.tol_group);
    rank_report = koopman_rank_test(*canonical, {st.tol_group, st.tol_rank});
    rank_report->samples = samples.size();
    for (const auto& g : rank_report->groups) groups.push_back(g.group);
    kj["status"] = "ok";
    kj["size"] = kset.size();
    kj["validation_tol"] = kset.validation_tol;
    kj["validation"] = std::move(validation);
    kj["Lambda"] = matrix_json(canonical->Lambda);
    kj["C"] = matrix_json(canonical->C);
    reports.push_back(to_json(*rank_report));
    votes.emplace_back(to_string(Method::KoopmanRank), rank_report->verdict);
  } else {
    kj["status"] = "absent";
    kj["note"] = "no Koopman set supplied; the Koopman rank test is disabled for this model";
  }
  bundle["koopman"] = std::move(kj);

  // symmetry route
  Json sym = Json::array();
  std::optional<SymmetryVerdict> decisive;
  for (const auto& P : cfg.symmetries) {
    Json pj{{"P", P.perm()}, {"order", P.order()}};
    SymmetryCheck state = verify_state_symmetry(sys, P, samples);
    pj["state"] = check_json(state);
    if (!state.passed) {
      pj["status"] = "not-a-symmetry";
      sym.push_back(std::move(pj));
      continue;
    }
    pj["status"] = "ok";
    std::optional<InducedKoopmanSymmetry> Q;
    if (cfg.koopman) {
      SymmetryClassification cls =
          classify_eigenfunctions(*cfg.koopman, P, samples, {1e-8, st.tol_group, true});
      pj["classification"] = to_json(cls);
      ModeCheck mc = mode_symmetry_check(*cfg.koopman, P, cls);
      Json entries = Json::array();
      for (const auto& e : mc.entries) {
        entries.push_back(Json{{"kind", e.rotational ? "rotational" : "reflectional"},
                               {"i", e.i + 1},
                               {"j", e.j + 1},
                               {"residual", e.residual},
                               {"applicable", e.applicable},
                               {"passed", e.passed}});
      }
      pj["mode_check"] = Json{{"passed", mc.passed}, {"entries", entries}};
      Q = induced_Q(cls, cfg.koopman->spectrum(), st.tol_group);
      Json qperm = Json::array();
      for (auto k : Q->perm) qperm.push_back(k + 1);
      pj["Q"] = Json{{"perm", qperm}, {"identity", Q->identity}};
      if (Q->identity) pj["Q"]["note"] = "no nonidentity induced symmetry";
    }
    SymmetryVerdict v = symmetry_verdict(sys, P, samples, groups);
    pj["measurement"] = check_json(v.measurement);
    pj["q"] = v.q;
    pj["max_multiplicity"] = v.max_multiplicity;
    pj["route"] = route_name(v.route);
    pj["verdict"] = to_string(v.verdict);
    if (v.route != SymmetryRoute::Inconclusive) {
      pj["theorem"] = theorem_label(basis_of(v.route));
    } else {
      pj["theorem"] = nullptr;
    }
    pj["rationale"] = v.rationale;
    if (v.has_witness) pj["witness_lambda"] = complex_json(v.witness_lambda);
    // C (Q w - w) = 0 for every group eigenvector when h is symmetric
    bool all_real = canonical && std::all_of(canonical->blocks.begin(), canonical->blocks.end(),
                                             [](const SpectralBlock& b) { return b.size == 1; });
    if (v.measurement.passed && Q && all_real) {
      double worst = 0.0;
      CMatrix Qc = Q->Q.cast<cd>();
      CMatrix Cc = canonical->C.cast<cd>();
      for (const auto& g : groups) {
        for (const auto& w : g.eigenvectors) {
          worst = std::max(worst, (Cc * (Qc * w - w)).cwiseAbs().maxCoeff());
        }
      }
      pj["orthogonality_residual"] = worst;
    }
    if (v.measurement.passed && !cfg.koopman) {
      pj["note"] =
          "no Koopman set: the verdict rests on the state and measurement invariance checks, with "
          "trajectory indistinguishability of x and Px as supporting evidence";
    }
    if (v.verdict != Verdict::Inconclusive) {
      votes.emplace_back("Symmetry", v.verdict);
      if (!decisive) decisive = v;
    }
    sym.push_back(std::move(pj));
  }
  bundle["symmetry"] = std::move(sym);

  // Lie rank
  LieOptions lo;
  lo.max_order = st.lie_max_order;
  lo.node_budget = st.node_budget;
  lo.rank_eps = st.tol_rank;
  try {
    ObservabilityReport lie = lie_rank_report(sys, points, lo);
    reports.push_back(to_json(lie));
    votes.emplace_back(to_string(Method::LieRank), lie.verdict);
  } catch (const ExpressionTooLarge& err) {
    reports.push_back(Json{{"method", to_string(Method::LieRank)},
                           {"status", "skipped"},
                           {"reason", err.what()},
                           {"verdict", nullptr}});
  } catch (const EvalError& err) {
    reports.push_back(Json{{"method", to_string(Method::LieRank)},
                           {"status", "failed"},
                           {"reason", err.what()},
                           {"verdict", nullptr}});
  }

  // empirical Gramian
  GramianOptions go;
  go.eps = st.gramian_eps;
  go.t_final = st.gramian_t;
  go.dt = st.dt;
  try {
    ObservabilityReport gram = gramian_report(sys, points, go);
    reports.push_back(to_json(gram));
    votes.emplace_back(to_string(Method::EmpiricalGramian), gram.verdict);
  } catch (const IntegrationError& err) {
    reports.push_back(Json{{"method", to_string(Method::EmpiricalGramian)},
                           {"status", "failed"},
                           {"reason", err.what()},
                           {"verdict", nullptr}});
  }
  bundle["reports"] = std::move(reports);

  Verdict overall = Verdict::Inconclusive;
  bool any_unobs = false, any_obs = false;
  Json methods = Json::object();
  for (const auto& [name, v] : votes) {
    methods[name] = to_string(v);
    any_unobs = any_unobs || v == Verdict::Unobservable;
    any_obs = any_obs || v == Verdict::Observable;
  }
  if (any_unobs) overall = Verdict::Unobservable;
  else if (any_obs) overall = Verdict::Observable;

  Json theorem = nullptr;
  if (overall == Verdict::Unobservable && decisive) {
    theorem = theorem_label(basis_of(decisive->route));
  } else if (rank_report && overall == rank_report->verdict) {
    theorem = theorem_label(Basis::RankCondition);
  }
  Json verdict{{"overall", to_string(overall)},
               {"theorem", theorem},
               {"agreement", !(any_unobs && any_obs)},
               {"methods", methods}};
  if (rank_report) verdict["min_measurements"] = min_measurements(*rank_report);
  if (decisive) verdict["rationale"] = decisive->rationale;
  bundle["verdict"] = std::move(verdict);
  return {std::move(bundle), overall};
}

}  // namespace koopobs
