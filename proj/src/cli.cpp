#include "koopobs/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "koopobs/analysis.hpp"
#include "koopobs/report.hpp"

namespace koopobs {

namespace {

namespace fs = std::filesystem;

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_rank;
  std::optional<double> tol_group;
  std::optional<std::size_t> samples;
  std::string out_dir;
  std::string format = "json";
};

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::string s;
  for (char c : text) {
    if (c != '[' && c != ']') s.push_back(c == ',' ? ' ' : c);
  }
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(0, what + ": '" + tok + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(0, what + " is empty");
  return out;
}

bool is_alt(const std::string& m) {
  if (m == "default" || m.empty()) return false;
  if (m == "alt" || m == "sym" || m == "bar") return true;
  throw ConfigError(0, "--measurement must be 'default' or 'alt'");
}

ModelConfig resolve_model(const std::string& target, const std::string& measurement,
                          const GlobalFlags& g) {
  ModelConfig cfg;
  const bool alt = is_alt(measurement);
  auto names = builtin_model_names();
  if (std::find(names.begin(), names.end(), target) != names.end()) {
    cfg = config_from_builtin(builtin_model(target), alt);
  } else {
    cfg = load_config(target);
    if (alt) {
      if (!cfg.alt_measurement) throw ConfigError(0, "config has no h_alt measurement");
      ExprVector def = cfg.system.h;
      cfg.system = cfg.system.with_measurement(*cfg.alt_measurement);
      cfg.alt_measurement = def;
    }
  }
  if (g.seed) cfg.analysis.seed = *g.seed;
  if (g.tol_rank) cfg.analysis.tol_rank = *g.tol_rank;
  if (g.tol_group) cfg.analysis.tol_group = *g.tol_group;
  if (g.samples) cfg.analysis.samples = *g.samples;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << content;
}

fs::path out_path(const GlobalFlags& g, const std::string& name) {
  return g.out_dir.empty() ? fs::path(name) : fs::path(g.out_dir) / name;
}

int cmd_analyze(const std::string& target, const std::string& measurement, const GlobalFlags& g,
                std::ostream& out) {
  ModelConfig cfg = resolve_model(target, measurement, g);
  AnalysisResult res = analyze(cfg);
  if (!g.out_dir.empty()) write_file(out_path(g, "bundle.json"), res.bundle.dump(2) + "\n");
  if (g.format == "text") {
    out << render_report(res.bundle);
  } else {
    out << res.bundle.dump(2) << "\n";
  }
  return exit_code(res.verdict);
}

struct SimulateFlags {
  std::vector<std::string> x0;
  std::optional<double> t_final;
  std::optional<double> dt;
  std::optional<std::size_t> stride;
  std::string mirror;
  bool plot = false;
  bool wrap = false;
};

int cmd_simulate(const std::string& target, const std::string& measurement,
                 const SimulateFlags& sf, const GlobalFlags& g, std::ostream& out) {
  ModelConfig cfg = resolve_model(target, measurement, g);
  const NonlinearSystem& sys = cfg.system;
  std::vector<Point> starts;
  for (const auto& s : sf.x0) {
    Point p = parse_number_list(s, "--x0");
    if (p.size() != sys.n) {
      throw ConfigError(0, "--x0 has " + std::to_string(p.size()) + " entries, expected " +
                               std::to_string(sys.n));
    }
    starts.push_back(std::move(p));
  }
  if (starts.empty()) starts = cfg.simulate.x0;
  if (starts.empty()) throw ConfigError(0, "no initial condition: pass --x0 or set [simulate] x0");

  std::optional<PermutationSymmetry> mirror;
  if (!sf.mirror.empty()) {
    if (sf.mirror == "P") {
      if (cfg.symmetries.empty()) throw ConfigError(0, "--mirror P but the model has no symmetry");
      mirror = cfg.symmetries.front();
    } else {
      std::vector<std::size_t> perm;
      for (double v : parse_number_list(sf.mirror, "--mirror")) {
        if (v < 1 || v != std::floor(v)) throw ConfigError(0, "--mirror entries are indices");
        perm.push_back(static_cast<std::size_t>(v));
      }
      try {
        mirror = PermutationSymmetry(std::move(perm));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(0, std::string("--mirror: ") + e.what());
      }
      if (mirror->size() != sys.n) throw ConfigError(0, "--mirror must have n entries");
    }
  }

  FlowOptions fo;
  fo.dt = sf.dt.value_or(cfg.simulate.dt);
  fo.stride = sf.stride.value_or(cfg.simulate.stride);
  const double t_final = sf.t_final.value_or(cfg.simulate.t_final);
  if (!(fo.dt > 0.0)) throw ConfigError(0, "--dt must be positive");
  if (!(t_final >= 0.0)) throw ConfigError(0, "--t must be non-negative");
  const std::vector<std::size_t> wrap = sf.wrap ? sys.phase_coords : std::vector<std::size_t>{};

  std::vector<std::pair<std::string, Trajectory>> runs;
  Json summary;
  summary["model"] = sys.name;
  summary["t_final"] = t_final;
  summary["dt"] = fo.dt;
  Json files = Json::array();
  Json pairs = Json::array();
  for (std::size_t k = 0; k < starts.size(); ++k) {
    std::string label = "run" + std::to_string(k + 1);
    Trajectory a = flow(sys, starts[k], t_final, fo);
    runs.emplace_back(label, a);
    if (mirror) {
      Trajectory b = flow(sys, mirror->apply(starts[k]), t_final, fo);
      // states of the mirrored run against P applied to the original states
      Trajectory pa = a;
      for (auto& x : pa.states) x = mirror->apply(x);
      pairs.push_back(Json{{"run", label},
                           {"mirror", label + "_mirror"},
                           {"P", mirror->perm()},
                           {"measurement_distance", measurement_distance(a, b)},
                           {"state_distance", state_distance(pa, b)}});
      runs.emplace_back(label + "_mirror", std::move(b));
    }
  }
  for (const auto& [label, traj] : runs) {
    std::ostringstream csv;
    write_csv(csv, traj, wrap);
    fs::path p = out_path(g, "traj_" + label + ".csv");
    write_file(p, csv.str());
    files.push_back(p.string());
  }
  if (sf.plot) {
    std::vector<PlotSeries> series;
    for (const auto& [label, traj] : runs) series.push_back({label, &traj});
    fs::path p = out_path(g, "plot_" + sys.name + ".svg");
    write_file(p, render_svg(series, sys.name + ": measurement vs time"));
    files.push_back(p.string());
  }
  summary["files"] = files;
  if (mirror) summary["mirror_pairs"] = pairs;
  if (g.format == "text") {
    for (const auto& f : files) out << "wrote " << f.get<std::string>() << "\n";
    for (const auto& p : pairs) {
      out << p["run"].get<std::string>() << " vs " << p["mirror"].get<std::string>()
          << ": measurement distance " << p["measurement_distance"].get<double>()
          << ", state distance " << p["state_distance"].get<double>() << "\n";
    }
  } else {
    out << summary.dump(2) << "\n";
  }
  return 0;
}

int cmd_report(const std::string& path, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open bundle '" + path + "'");
  Json bundle = Json::parse(in, nullptr, false);
  if (bundle.is_discarded()) throw SchemaError("bundle: '" + path + "' is not valid JSON");
  out << render_report(bundle);
  return 0;
}

int cmd_validate(const std::string& target, const GlobalFlags& g, std::ostream& out) {
  ModelConfig cfg = resolve_model(target, "default", g);
  if (!cfg.koopman) throw PreconditionError("koopman-set", "model has no Koopman set");
  KoopmanSet kset = *cfg.koopman;
  if (cfg.analysis.koopman_tol) kset.validation_tol = *cfg.analysis.koopman_tol;
  Rng rng = Rng(cfg.analysis.seed).split(1);
  auto samples = sample_box(cfg.system.domain,
                            std::max(cfg.analysis.samples, 10 * kset.size()), rng);
  Json j;
  j["model"] = cfg.system.name;
  j["validation_tol"] = kset.validation_tol;
  Json pairs = Json::array();
  bool ok = true;
  for (std::size_t i = 0; i < kset.size(); ++i) {
    ResidualReport r = validate_eigenpair(cfg.system, kset.pairs[i], samples, kset.validation_tol);
    ok = ok && r.passed;
    pairs.push_back(Json{{"index", i + 1},
                         {"lambda_re", kset.pairs[i].lambda.real()},
                         {"lambda_im", kset.pairs[i].lambda.imag()},
                         {"max_residual", r.max_residual},
                         {"passed", r.passed}});
  }
  j["pairs"] = pairs;
  Json checks = Json::object();
  std::string failed;
  try {
    check_koopman_set(kset, samples, cfg.analysis.tol_group);
    checks["independence"] = "ok";
    CanonicalSystem cs = build_canonical(kset, samples, cfg.analysis.tol_group);
    checks["state-span"] = "ok";
    expand_measurement(cfg.system, cs, samples);
    checks["measurement-span"] = "ok";
  } catch (const PreconditionError& e) {
    checks[e.check()] = e.what();
    failed = e.check();
    ok = false;
  }
  j["checks"] = checks;
  j["passed"] = ok;
  if (g.format == "text") {
    for (const auto& p : pairs) {
      const double im = p["lambda_im"].get<double>();
      out << "pair " << p["index"] << ": lambda = " << p["lambda_re"].get<double>()
          << (im < 0 ? " - " : " + ") << std::fabs(im) << "i, residual "
          << p["max_residual"].get<double>()
          << (p["passed"].get<bool>() ? "  ok" : "  FAIL") << "\n";
    }
    for (const auto& [k, v] : checks.items()) out << k << ": " << v.get<std::string>() << "\n";
    out << (ok ? "Koopman set valid\n" : "Koopman set INVALID\n");
  } else {
    out << j.dump(2) << "\n";
  }
  return ok ? 0 : 2;
}

int cmd_list(const GlobalFlags& g, std::ostream& out) {
  Json arr = Json::array();
  for (const auto& name : builtin_model_names()) {
    BuiltinModel m = builtin_model(name);
    arr.push_back(Json{{"name", name},
                       {"description", m.description},
                       {"n", m.system.n},
                       {"q", m.system.q},
                       {"koopman_set", m.koopman.has_value()},
                       {"alt_measurement", m.alt_measurement.has_value()}});
  }
  if (g.format == "text") {
    for (const auto& m : arr) {
      out << m["name"].get<std::string>() << "  " << m["description"].get<std::string>() << "\n";
    }
  } else {
    out << arr.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Observability analysis of nonlinear systems through Koopman spectra and symmetry"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--seed", g.seed, "RNG seed for sampling");
  app.add_option("--tol-rank", g.tol_rank, "relative SVD cutoff for exact rank tests");
  app.add_option("--tol-group", g.tol_group, "eigenvalue grouping tolerance");
  app.add_option("--samples", g.samples, "number of domain samples");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--format", g.format, "json or text")->check(CLI::IsMember({"json", "text"}));

  std::string target;
  std::string measurement = "default";

  auto* analyze_cmd = app.add_subcommand("analyze", "run every applicable observability test");
  analyze_cmd->add_option("model", target, "built-in model name or config file")->required();
  analyze_cmd->add_option("--measurement", measurement, "default or alt");

  SimulateFlags sf;
  auto* sim_cmd = app.add_subcommand("simulate", "integrate trajectories and write CSV files");
  sim_cmd->add_option("model", target, "built-in model name or config file")->required();
  sim_cmd->add_option("--measurement", measurement, "default or alt");
  sim_cmd->add_option("--x0", sf.x0, "initial condition, comma separated (repeatable)");
  sim_cmd->add_option("--t", sf.t_final, "final time");
  sim_cmd->add_option("--dt", sf.dt, "RK4 step");
  sim_cmd->add_option("--stride", sf.stride, "store every k-th step");
  sim_cmd->add_option("--mirror", sf.mirror, "also simulate P x0; 'P' for the model symmetry");
  sim_cmd->add_flag("--plot", sf.plot, "write a measurement-vs-time SVG");
  sim_cmd->add_flag("--wrap-phases", sf.wrap, "wrap phase coordinates in the CSV");

  std::string bundle_path;
  auto* report_cmd = app.add_subcommand("report", "render a bundle as text");
  report_cmd->add_option("bundle", bundle_path, "bundle.json")->required();

  auto* validate_cmd = app.add_subcommand("validate-koopman", "check a Koopman set");
  validate_cmd->add_option("model", target, "built-in model name or config file")->required();

  auto* list_cmd = app.add_subcommand("list-models", "list built-in models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(target, measurement, g, out);
    if (sim_cmd->parsed()) return cmd_simulate(target, measurement, sf, g, out);
    if (report_cmd->parsed()) return cmd_report(bundle_path, out);
    if (validate_cmd->parsed()) return cmd_validate(target, g, out);
    if (list_cmd->parsed()) return cmd_list(g, out);
  } catch (const PreconditionError& e) {
    err << "precondition failed [" << e.check() << "]: " << e.what() << "\n";
    return 2;
  } catch (const IntegrationError& e) {
    err << "integration failed: " << e.what() << "\n";
    return 2;
  } catch (const ExpressionTooLarge& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace koopobs
