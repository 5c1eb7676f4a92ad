#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "koopobs/analysis.hpp"
#include "koopobs/cli.hpp"
#include "koopobs/config.hpp"
#include "koopobs/report.hpp"

using namespace koopobs;
namespace fs = std::filesystem;

namespace {

const std::string kSource = KOOPOBS_SOURCE_DIR;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "koopobs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("koopobs_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

const char* kMinimal = R"(
[system]
n = 2
f = ["-x1", "x1 - 2*x2"]
h = ["x2"]
)";

}  // namespace

TEST_CASE("config parsing") {
  ModelConfig cfg = load_config(kSource + "/configs/example2.cfg");
  CHECK(cfg.system.n == 3);
  CHECK(cfg.system.q == 1);
  REQUIRE(cfg.koopman);
  CHECK(cfg.koopman->size() == 5);
  CHECK(cfg.koopman->pairs[4].lambda == cd(4));
  REQUIRE(cfg.symmetries.size() == 1);
  CHECK(cfg.symmetries[0] == PermutationSymmetry({2, 1, 3}));
  CHECK(cfg.simulate.x0.size() == 2);
  CHECK(cfg.alt_measurement->size() == 2);

  ModelConfig d = load_config(kSource + "/configs/directed.cfg");
  CHECK(d.koopman->pairs[1].lambda.imag() > 0);
  CHECK_FALSE(d.koopman->pairs[1].psi.is_real());

  ModelConfig m = parse_config(kMinimal);
  CHECK(m.system.domain.size() == 2);
  CHECK(m.system.domain[0].lo == -2.0);
  CHECK_FALSE(m.koopman);
}

TEST_CASE("config errors carry a line number") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return 9999;
  };
  CHECK(line_of("[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1\"]\ncolour = 3\n") == 5);
  CHECK(line_of("[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1\"]\n[extras]\n") == 5);
  CHECK(line_of("[system]\nn = 2\nf = [\"x1\"]\nh = [\"x1\"]\n") == 3);
  CHECK(line_of("[system]\nn = 1\nf = [\"x3\"]\nh = [\"x1\"]\n") == 3);
  CHECK(line_of("[system]\nn = 2\nf = [\"x1\", \"x2\"]\nh = [\"x1\"]\n[symmetry]\nP = [1, 1]\n") ==
        6);
  CHECK(line_of("[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1\"]\n[koopman]\nlambda = 1\npsi = \"x1\"\n") ==
        5);
  CHECK(line_of("[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1\"]\n[analysis]\nsamples = -3\n") == 6);
  CHECK_THROWS_AS(parse_config("[system]\nn = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("complex literals") {
  CHECK(parse_complex("1") == cd(1));
  CHECK(parse_complex("-2.5") == cd(-2.5));
  CHECK(parse_complex("3i") == cd(0, 3));
  CHECK(parse_complex("-1.5+0.866i") == cd(-1.5, 0.866));
  CHECK(parse_complex("2-j") == cd(2, -1));
  CHECK(parse_complex("1e-3+2e+1i") == cd(1e-3, 20));
  CHECK_FALSE(parse_complex("abc").has_value());
}

TEST_CASE("canonical config text round trips") {
  ModelConfig cfg = load_config(kSource + "/configs/example2.cfg");
  std::string text = write_config(cfg);
  ModelConfig back = parse_config(text);
  CHECK(write_config(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));
  for (const auto& name : builtin_model_names()) {
    ModelConfig b = config_from_builtin(builtin_model(name), false);
    CHECK(write_config(parse_config(write_config(b))) == write_config(b));
  }
  ModelConfig other = cfg;
  other.analysis.seed = 7;
  CHECK(config_hash(other) != config_hash(cfg));
  CHECK_THROWS_AS(config_from_builtin(builtin_model("nems-ring"), true), ConfigError);
}

TEST_CASE("analysis bundle is deterministic and complete") {
  ModelConfig cfg = config_from_builtin(builtin_model("example2"), false);
  AnalysisResult a = analyze(cfg);
  AnalysisResult b = analyze(cfg);
  CHECK(a.bundle.dump() == b.bundle.dump());
  CHECK(a.verdict == Verdict::Unobservable);
  const Json& j = a.bundle;
  CHECK(j["schema"] == kBundleSchema);
  CHECK(j["provenance"]["seed"] == 42);
  CHECK(j["provenance"]["config_hash"] == config_hash(cfg));
  CHECK(j["verdict"]["theorem"] == theorem_label(Basis::SymmetricMeasurement));
  CHECK(j["verdict"]["min_measurements"] == 2);
  CHECK(j["verdict"]["agreement"] == true);
  for (const auto& r : j["reports"]) CHECK(r.contains("tolerances"));

  ModelConfig seeded = cfg;
  seeded.analysis.seed = 7;
  AnalysisResult c = analyze(seeded);
  CHECK(c.bundle["provenance"]["seed"] == 7);
  CHECK(c.verdict == Verdict::Unobservable);
}

TEST_CASE("report rendering") {
  AnalysisResult r = analyze(config_from_builtin(builtin_model("example2"), false));
  std::string text = render_report(r.bundle);
  CHECK(text.find(std::string("verdict: Unobservable (") +
                  theorem_label(Basis::SymmetricMeasurement) + ")") != std::string::npos);
  CHECK(text.find("  1                     2   0     FAIL") != std::string::npos);
  CHECK(text.find("  2                     2   1     FAIL") != std::string::npos);
  CHECK(text.find("  4                     1   1     pass") != std::string::npos);
  CHECK(text == render_report(r.bundle));

  AnalysisResult u = analyze(config_from_builtin(builtin_model("consensus-undirected"), false));
  CHECK(render_report(u.bundle).find(std::string("q=1 < max multiplicity 2 (") +
                                     theorem_label(Basis::MultiplicityBound) + ")") !=
        std::string::npos);

  Json empty = r.bundle;
  for (auto& rep : empty["reports"]) {
    if (rep["method"] == "KoopmanRank") rep["groups"] = Json::array();
  }
  CHECK_THROWS_AS(render_report(empty), SchemaError);
  Json wrong = r.bundle;
  wrong["schema"] = "other/2";
  CHECK_THROWS_AS(render_report(wrong), SchemaError);
  CHECK_THROWS_AS(render_report(Json::array()), SchemaError);
  Json missing = r.bundle;
  missing.erase("verdict");
  CHECK_THROWS_AS(render_report(missing), SchemaError);
}

TEST_CASE("every tool-produced bundle renders") {
  for (const auto& name : builtin_model_names()) {
    for (bool alt : {false, true}) {
      BuiltinModel m = builtin_model(name);
      if (alt && !m.alt_measurement) continue;
      AnalysisResult r = analyze(config_from_builtin(m, alt));
      CHECK_NOTHROW(render_report(r.bundle));
      CHECK_NOTHROW(render_report(Json::parse(r.bundle.dump(2))));
    }
  }
}

TEST_CASE("analyze exit codes") {
  CHECK(cli({"analyze", "example2"}).code == 3);
  CHECK(cli({"analyze", "example2", "--measurement", "alt"}).code == 0);
  CHECK(cli({"analyze", "consensus-directed"}).code == 0);
  CHECK(cli({"analyze", "consensus-undirected"}).code == 3);
  CHECK(cli({"analyze", kSource + "/configs/example2.cfg", "--measurement", "alt"}).code == 0);

  Run missing = cli({"analyze", "no-such-model"});
  CHECK(missing.code == 1);
  CHECK_FALSE(missing.err.empty());
  CHECK(cli({"analyze"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"analyze", "nems-ring", "--measurement", "alt"}).code == 1);

  fs::path dir = scratch("span");
  std::ofstream(dir / "bad.cfg") << "[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1^3\"]\n"
                                    "[koopman]\nlambda = 1\npsi = \"x1\"\nmode = [1]\n";
  Run span = cli({"analyze", (dir / "bad.cfg").string()});
  CHECK(span.code == 2);
  CHECK(span.err.find("measurement-span") != std::string::npos);

  // no Koopman set and no test points: nothing can decide
  std::ofstream(dir / "none.cfg") << "[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1\"]\n"
                                     "[analysis]\nlie_points = 0\n";
  CHECK(cli({"analyze", (dir / "none.cfg").string()}).code == 4);
}

TEST_CASE("no analysis path exits 0 while a method says Unobservable") {
  for (const auto& name : builtin_model_names()) {
    for (std::string meas : {"default", "alt"}) {
      BuiltinModel m = builtin_model(name);
      if (meas == "alt" && !m.alt_measurement) continue;
      Run r = cli({"analyze", name, "--measurement", meas});
      Json j = Json::parse(r.out);
      bool any_unobservable = false;
      for (const auto& [method, v] : j["verdict"]["methods"].items()) {
        if (v == "Unobservable") any_unobservable = true;
      }
      if (any_unobservable) CHECK(r.code == 3);
    }
  }
}

TEST_CASE("global flags and output files") {
  fs::path dir = scratch("analyze");
  Run r = cli({"--seed", "9", "--samples", "300", "--tol-rank", "1e-11", "--tol-group", "1e-7",
               "--out", dir.string(), "analyze", "example2"});
  CHECK(r.code == 3);
  Json j = Json::parse(slurp(dir / "bundle.json"));
  CHECK(j.dump() == Json::parse(r.out).dump());
  CHECK(j["provenance"]["seed"] == 9);
  CHECK(j["settings"]["samples"] == 300);
  CHECK(j["settings"]["tol_rank"] == 1e-11);
  CHECK(j["settings"]["tol_group"] == 1e-7);

  Run again = cli({"--seed", "9", "--samples", "300", "--tol-rank", "1e-11", "--tol-group", "1e-7",
                   "analyze", "example2"});
  CHECK(again.out == r.out);

  Run text = cli({"analyze", "example2", "--format", "text"});
  CHECK(text.out.rfind("model: example2", 0) == 0);
  CHECK(cli({"--format", "yaml", "analyze", "example2"}).code == 1);

  Run rep = cli({"report", (dir / "bundle.json").string()});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("agreement: yes") != std::string::npos);
  std::ofstream(dir / "junk.json") << "{not json";
  CHECK(cli({"report", (dir / "junk.json").string()}).code == 1);
  std::ofstream(dir / "other.json") << "{\"schema\": \"x\"}";
  CHECK(cli({"report", (dir / "other.json").string()}).code == 1);
}

TEST_CASE("simulate") {
  fs::path dir = scratch("simulate");
  Run r = cli({"--out", dir.string(), "simulate", "example2", "--x0", "1,2,1", "--mirror", "P",
               "--t", "1", "--plot"});
  REQUIRE(r.code == 0);
  auto a = read_csv(dir / "traj_run1.csv");
  auto b = read_csv(dir / "traj_run1_mirror.csv");
  REQUIRE(a.size() == 1001);
  REQUIRE(b.size() == a.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::fabs(a[k][4] - b[k][4]));
  CHECK(worst <= 1e-8);
  CHECK(b[0][1] == 2.0);
  CHECK(b[0][2] == 1.0);
  std::string svg = slurp(dir / "plot_example2.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("run1_mirror y1") != std::string::npos);

  fs::path zero = scratch("simulate_zero");
  REQUIRE(cli({"--out", zero.string(), "simulate", "example2", "--t", "0"}).code == 0);
  CHECK(read_csv(zero / "traj_run1.csv").size() == 1);

  fs::path nems = scratch("simulate_nems");
  Run nr = cli({"--out", nems.string(), "simulate", "nems-ring", "--t", "50", "--mirror", "P",
                "--stride", "100", "--wrap-phases"});
  REQUIRE(nr.code == 0);
  Json s = Json::parse(nr.out);
  CHECK(s["mirror_pairs"][0]["measurement_distance"].get<double>() <= 1e-6);
  CHECK(s["mirror_pairs"][0]["state_distance"].get<double>() <= 1e-7);
  auto rows = read_csv(nems / "traj_run1.csv");
  CHECK(rows.size() == 501);
  for (const auto& row : rows) {
    for (std::size_t i = 9; i <= 16; ++i) {
      CHECK(row[i] > -M_PI - 1e-12);
      CHECK(row[i] <= M_PI + 1e-12);
    }
  }

  fs::path cfg = scratch("simulate_cfg");
  REQUIRE(cli({"--out", cfg.string(), "simulate", kSource + "/configs/example2.cfg"}).code == 0);
  CHECK(fs::exists(cfg / "traj_run2.csv"));

  CHECK(cli({"simulate", "example2", "--x0", "1,2"}).code == 1);
  CHECK(cli({"simulate", "example2", "--mirror", "1,1,2"}).code == 1);
  CHECK(cli({"simulate", "example2", "--x0", "a,b,c"}).code == 1);
  std::ofstream(cfg / "pole.cfg") << "[system]\nn = 1\nf = [\"-1/x1\"]\nh = [\"x1\"]\n"
                                      "domain = [[1, 2]]\nguards = [[1, 0.001]]\n";
  Run fault = cli({"--out", cfg.string(), "simulate", (cfg / "pole.cfg").string(), "--x0", "1",
                   "--t", "1"});
  CHECK(fault.code == 2);
  CHECK(fault.err.find("integration failed") != std::string::npos);
}

TEST_CASE("validate-koopman and list-models") {
  CHECK(cli({"validate-koopman", "example2"}).code == 0);
  CHECK(cli({"validate-koopman", kSource + "/configs/directed.cfg"}).code == 0);
  Run none = cli({"validate-koopman", "nems-ring"});
  CHECK(none.code == 2);
  CHECK(none.err.find("koopman-set") != std::string::npos);

  fs::path dir = scratch("validate");
  std::ofstream(dir / "wrong.cfg") << "[system]\nn = 1\nf = [\"x1\"]\nh = [\"x1\"]\n"
                                      "[koopman]\nlambda = 2\npsi = \"x1\"\nmode = [1]\n";
  Run wrong = cli({"validate-koopman", (dir / "wrong.cfg").string()});
  CHECK(wrong.code == 2);
  CHECK(Json::parse(wrong.out)["passed"] == false);

  Run list = cli({"list-models"});
  CHECK(list.code == 0);
  Json arr = Json::parse(list.out);
  CHECK(arr.size() == 4);
  CHECK(arr[2]["name"] == "example2");
  CHECK(cli({"--help"}).code == 0);
}
