#include "koopobs/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace koopobs {

using nlohmann::json;

ConfigError::ConfigError(std::size_t line, const std::string& msg)
    : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + msg
                              : "config: " + msg),
      line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct Entry {
  std::string key;
  std::string raw;
  json value;  // discarded when raw is not JSON
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::vector<Entry> entries;
};

std::vector<Section> tokenize(std::string_view text) {
  std::vector<Section> sections;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "unterminated section header");
      std::string name(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known = {"system", "koopman", "symmetry", "analysis",
                                                   "simulate"};
      if (!known.count(name)) throw ConfigError(lineno, "unknown section [" + name + "]");
      sections.push_back({name, lineno, {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(lineno, "expected key = value");
    if (sections.empty()) throw ConfigError(lineno, "key outside of any section");
    Entry e;
    e.key = std::string(trim(line.substr(0, eq)));
    e.raw = std::string(trim(line.substr(eq + 1)));
    e.line = lineno;
    if (e.key.empty()) throw ConfigError(lineno, "empty key");
    if (e.raw.empty()) throw ConfigError(lineno, "empty value for '" + e.key + "'");
    e.value = json::parse(e.raw, nullptr, false);
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

std::string as_text(const Entry& e) {
  if (e.value.is_string()) return e.value.get<std::string>();
  return e.raw;
}

double as_real(const Entry& e) {
  if (e.value.is_number()) return e.value.get<double>();
  throw ConfigError(e.line, "'" + e.key + "' must be a number");
}

std::size_t as_count(const Entry& e) {
  if (e.value.is_number_unsigned()) return e.value.get<std::size_t>();
  if (e.value.is_number_integer() && e.value.get<long long>() >= 0) {
    return static_cast<std::size_t>(e.value.get<long long>());
  }
  throw ConfigError(e.line, "'" + e.key + "' must be a non-negative integer");
}

std::uint64_t as_seed(const Entry& e) {
  if (e.value.is_number_unsigned()) return e.value.get<std::uint64_t>();
  if (e.value.is_number_integer() && e.value.get<long long>() >= 0) {
    return static_cast<std::uint64_t>(e.value.get<long long>());
  }
  throw ConfigError(e.line, "'seed' must be a non-negative integer");
}

std::vector<double> number_list(const json& v, std::size_t line, const std::string& key) {
  if (!v.is_array()) throw ConfigError(line, "'" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(line, "'" + key + "' must contain numbers only");
    out.push_back(x.get<double>());
  }
  return out;
}

/// A single point [..] or a list of points [[..], [..]].
std::vector<Point> point_list(const Entry& e) {
  if (!e.value.is_array() || e.value.empty()) {
    throw ConfigError(e.line, "'" + e.key + "' must be a point or a list of points");
  }
  if (e.value.front().is_array()) {
    std::vector<Point> out;
    for (const auto& p : e.value) out.push_back(number_list(p, e.line, e.key));
    return out;
  }
  return {number_list(e.value, e.line, e.key)};
}

cd complex_value(const json& v, std::size_t line, const std::string& key) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_string()) {
    if (auto c = parse_complex(v.get<std::string>())) return *c;
  }
  throw ConfigError(line, "'" + key + "' has an invalid complex number");
}

cd complex_entry(const Entry& e) {
  if (e.value.is_discarded()) {
    if (auto c = parse_complex(e.raw)) return *c;
    throw ConfigError(e.line, "'" + e.key + "' has an invalid complex number");
  }
  return complex_value(e.value, e.line, e.key);
}

Expr expr_of(const std::string& src, std::size_t n, const Entry& e) {
  try {
    return parse(src, n);
  } catch (const ParseError& err) {
    throw ConfigError(e.line, "'" + e.key + "': " + err.what());
  }
}

ExprVector expr_list(const Entry& e, std::size_t n) {
  ExprVector out;
  if (e.value.is_array()) {
    for (const auto& s : e.value) {
      if (!s.is_string()) throw ConfigError(e.line, "'" + e.key + "' must be a list of strings");
      out.push_back(expr_of(s.get<std::string>(), n, e));
    }
  } else {
    out.push_back(expr_of(as_text(e), n, e));
  }
  if (out.empty()) throw ConfigError(e.line, "'" + e.key + "' is empty");
  return out;
}

[[noreturn]] void unknown_key(const Entry& e, const std::string& section) {
  throw ConfigError(e.line, "unknown key '" + e.key + "' in [" + section + "]");
}

void check_dim(const Point& p, std::size_t n, std::size_t line, const std::string& what) {
  if (p.size() != n) {
    throw ConfigError(line, what + " has " + std::to_string(p.size()) + " entries, expected " +
                                std::to_string(n));
  }
}

}  // namespace

std::optional<cd> parse_complex(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.empty()) return std::nullopt;
  if (s.back() != 'i' && s.back() != 'j') {
    auto r = parse_real(s);
    if (!r) return std::nullopt;
    return cd(*r, 0.0);
  }
  s.pop_back();
  // split at the last sign that is not part of an exponent
  std::size_t split = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  std::string re_part = split == std::string::npos ? "" : s.substr(0, split);
  std::string im_part = split == std::string::npos ? s : s.substr(split);
  double re = 0.0;
  if (!re_part.empty()) {
    auto r = parse_real(re_part);
    if (!r) return std::nullopt;
    re = *r;
  }
  double im = 0.0;
  if (im_part.empty() || im_part == "+") {
    im = 1.0;
  } else if (im_part == "-") {
    im = -1.0;
  } else {
    auto r = parse_real(im_part);
    if (!r) return std::nullopt;
    im = *r;
  }
  return cd(re, im);
}

ModelConfig parse_config(std::string_view text) {
  auto sections = tokenize(text);
  ModelConfig cfg;

  const Section* system = nullptr;
  for (const auto& s : sections) {
    if (s.name != "system") continue;
    if (system) throw ConfigError(s.line, "duplicate [system] section");
    system = &s;
  }
  if (!system) throw ConfigError(0, "missing [system] section");

  std::map<std::string, const Entry*> sys_keys;
  for (const auto& e : system->entries) {
    static const std::set<std::string> allowed = {"name", "n", "q", "f", "h", "h_alt",
                                                  "domain", "guards", "phases"};
    if (!allowed.count(e.key)) unknown_key(e, "system");
    if (sys_keys.count(e.key)) throw ConfigError(e.line, "duplicate key '" + e.key + "'");
    sys_keys[e.key] = &e;
  }
  for (const char* required : {"n", "f", "h"}) {
    if (!sys_keys.count(required)) {
      throw ConfigError(system->line, std::string("[system] needs '") + required + "'");
    }
  }
  const std::size_t n = as_count(*sys_keys["n"]);
  if (n == 0) throw ConfigError(sys_keys["n"]->line, "n must be at least 1");
  std::string name = sys_keys.count("name") ? as_text(*sys_keys["name"]) : "model";
  ExprVector f = expr_list(*sys_keys["f"], n);
  if (f.size() != n) {
    throw ConfigError(sys_keys["f"]->line,
                      "f has " + std::to_string(f.size()) + " components, expected n = " +
                          std::to_string(n));
  }
  ExprVector h = expr_list(*sys_keys["h"], n);
  if (sys_keys.count("q") && as_count(*sys_keys["q"]) != h.size()) {
    throw ConfigError(sys_keys["q"]->line, "q does not match the number of measurements");
  }
  Box box(n, Interval{-2.0, 2.0});
  if (sys_keys.count("domain")) {
    const Entry& e = *sys_keys["domain"];
    auto pts = point_list(e);
    if (pts.size() == 1 && pts[0].size() == 2 && n != 1) {
      box.assign(n, Interval{pts[0][0], pts[0][1]});
    } else {
      if (pts.size() != n) throw ConfigError(e.line, "domain needs one [lo, hi] per coordinate");
      for (std::size_t i = 0; i < n; ++i) {
        if (pts[i].size() != 2 || !(pts[i][0] <= pts[i][1])) {
          throw ConfigError(e.line, "domain interval " + std::to_string(i + 1) + " is invalid");
        }
        box[i] = {pts[i][0], pts[i][1]};
      }
    }
  }
  cfg.system = make_system(name, std::move(f), std::move(h), std::move(box));
  if (sys_keys.count("h_alt")) cfg.alt_measurement = expr_list(*sys_keys["h_alt"], n);
  if (sys_keys.count("guards")) {
    const Entry& e = *sys_keys["guards"];
    for (const auto& g : point_list(e)) {
      if (g.size() != 2 || g[0] < 1 || g[0] > static_cast<double>(n) || g[0] != std::floor(g[0])) {
        throw ConfigError(e.line, "guards are [index, min_value] pairs");
      }
      cfg.system.guards.push_back({static_cast<std::size_t>(g[0]), g[1]});
    }
  }
  if (sys_keys.count("phases")) {
    const Entry& e = *sys_keys["phases"];
    for (double p : number_list(e.value, e.line, e.key)) {
      if (p < 1 || p > static_cast<double>(n) || p != std::floor(p)) {
        throw ConfigError(e.line, "phase index out of range");
      }
      cfg.system.phase_coords.push_back(static_cast<std::size_t>(p));
    }
  }
  try {
    cfg.system.validate(100, 0);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(system->line, err.what());
  }

  for (const auto& s : sections) {
    if (s.name == "system") continue;
    if (s.name == "koopman") {
      if (!cfg.koopman) {
        cfg.koopman = KoopmanSet{};
        cfg.koopman->n = n;
      }
      KoopmanEigenpair pair;
      bool have_lambda = false, have_mode = false, have_psi = false;
      std::optional<Expr> re, im;
      for (const auto& e : s.entries) {
        if (e.key == "lambda") {
          pair.lambda = complex_entry(e);
          have_lambda = true;
        } else if (e.key == "psi" || e.key == "psi_re") {
          if (re) throw ConfigError(e.line, "eigenfunction given twice");
          re = expr_of(as_text(e), n, e);
        } else if (e.key == "psi_im") {
          im = expr_of(as_text(e), n, e);
        } else if (e.key == "mode") {
          if (!e.value.is_array()) throw ConfigError(e.line, "mode must be a list");
          for (const auto& v : e.value) pair.mode.push_back(complex_value(v, e.line, "mode"));
          if (pair.mode.size() != n) {
            throw ConfigError(e.line, "mode has " + std::to_string(pair.mode.size()) +
                                          " entries, expected " + std::to_string(n));
          }
          have_mode = true;
        } else {
          unknown_key(e, "koopman");
        }
      }
      have_psi = re.has_value();
      if (!have_lambda || !have_psi || !have_mode) {
        throw ConfigError(s.line, "[koopman] needs lambda, psi (or psi_re) and mode");
      }
      pair.psi = ComplexExpr{*re, im};
      cfg.koopman->pairs.push_back(std::move(pair));
    } else if (s.name == "symmetry") {
      for (const auto& e : s.entries) {
        if (e.key != "P") unknown_key(e, "symmetry");
        auto p = number_list(e.value, e.line, e.key);
        std::vector<std::size_t> perm;
        for (double v : p) {
          if (v < 1 || v != std::floor(v)) throw ConfigError(e.line, "P entries are indices >= 1");
          perm.push_back(static_cast<std::size_t>(v));
        }
        if (perm.size() != n) throw ConfigError(e.line, "P must have n entries");
        try {
          cfg.symmetries.emplace_back(std::move(perm));
        } catch (const std::invalid_argument& err) {
          throw ConfigError(e.line, err.what());
        }
      }
    } else if (s.name == "analysis") {
      auto& a = cfg.analysis;
      for (const auto& e : s.entries) {
        if (e.key == "seed") a.seed = as_seed(e);
        else if (e.key == "tol_rank") a.tol_rank = as_real(e);
        else if (e.key == "tol_group") a.tol_group = as_real(e);
        else if (e.key == "samples") a.samples = as_count(e);
        else if (e.key == "lie_points") a.lie_points = as_count(e);
        else if (e.key == "lie_max_order") a.lie_max_order = as_count(e);
        else if (e.key == "node_budget") a.node_budget = as_count(e);
        else if (e.key == "gramian_eps") a.gramian_eps = as_real(e);
        else if (e.key == "gramian_t") a.gramian_t = as_real(e);
        else if (e.key == "dt") a.dt = as_real(e);
        else if (e.key == "koopman_tol") a.koopman_tol = as_real(e);
        else if (e.key == "points") {
          a.points = point_list(e);
          for (const auto& p : a.points) check_dim(p, n, e.line, "analysis point");
        } else unknown_key(e, "analysis");
      }
    } else if (s.name == "simulate") {
      auto& sim = cfg.simulate;
      for (const auto& e : s.entries) {
        if (e.key == "x0") {
          sim.x0 = point_list(e);
          for (const auto& p : sim.x0) check_dim(p, n, e.line, "x0");
        } else if (e.key == "t_final") sim.t_final = as_real(e);
        else if (e.key == "dt") sim.dt = as_real(e);
        else if (e.key == "stride") sim.stride = as_count(e);
        else unknown_key(e, "simulate");
      }
    }
  }
  if (cfg.alt_measurement) {
    for (const auto& e : *cfg.alt_measurement) {
      if (e.max_var() > n) throw ConfigError(0, "h_alt references a variable beyond n");
    }
  }
  return cfg;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ModelConfig config_from_builtin(const BuiltinModel& model, bool alt) {
  ModelConfig cfg;
  cfg.system = model.system;
  if (alt) {
    if (!model.alt_measurement) {
      throw ConfigError(0, "model '" + model.name + "' has no alternative measurement");
    }
    cfg.system = model.system.with_measurement(*model.alt_measurement);
  } else if (model.alt_measurement) {
    cfg.alt_measurement = model.alt_measurement;
  }
  cfg.koopman = model.koopman;
  cfg.symmetries = {model.symmetry};
  cfg.simulate.x0 = {model.default_x0};
  cfg.simulate.t_final = model.default_t;
  return cfg;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string complex_text(cd c) {
  if (c.imag() == 0.0) return num(c.real());
  std::string im = num(c.imag());
  if (im.front() != '-') im = "+" + im;
  return num(c.real()) + im + "i";
}

std::string expr_list_text(const ExprVector& v) {
  json arr = json::array();
  for (const auto& e : v) arr.push_back(to_string(e));
  return arr.dump();
}

std::string points_text(const std::vector<Point>& pts) {
  std::string out = "[";
  for (std::size_t k = 0; k < pts.size(); ++k) {
    out += k ? ", [" : "[";
    for (std::size_t i = 0; i < pts[k].size(); ++i) out += (i ? ", " : "") + num(pts[k][i]);
    out += "]";
  }
  return out + "]";
}

}  // namespace

std::string write_config(const ModelConfig& cfg) {
  std::ostringstream os;
  const auto& s = cfg.system;
  os << "[system]\n";
  os << "name = " << json(s.name).dump() << "\n";
  os << "n = " << s.n << "\n";
  os << "q = " << s.q << "\n";
  os << "f = " << expr_list_text(s.f) << "\n";
  os << "h = " << expr_list_text(s.h) << "\n";
  if (cfg.alt_measurement) os << "h_alt = " << expr_list_text(*cfg.alt_measurement) << "\n";
  std::vector<Point> box;
  for (const auto& iv : s.domain) box.push_back({iv.lo, iv.hi});
  os << "domain = " << points_text(box) << "\n";
  if (!s.guards.empty()) {
    std::vector<Point> g;
    for (const auto& gd : s.guards) g.push_back({static_cast<double>(gd.index), gd.min_value});
    os << "guards = " << points_text(g) << "\n";
  }
  if (!s.phase_coords.empty()) {
    os << "phases = [";
    for (std::size_t i = 0; i < s.phase_coords.size(); ++i) os << (i ? ", " : "") << s.phase_coords[i];
    os << "]\n";
  }
  if (cfg.koopman) {
    for (const auto& p : cfg.koopman->pairs) {
      os << "\n[koopman]\n";
      os << "lambda = " << complex_text(p.lambda) << "\n";
      if (p.psi.im) {
        os << "psi_re = " << json(to_string(p.psi.re)).dump() << "\n";
        os << "psi_im = " << json(to_string(*p.psi.im)).dump() << "\n";
      } else {
        os << "psi = " << json(to_string(p.psi.re)).dump() << "\n";
      }
      os << "mode = [";
      for (std::size_t i = 0; i < p.mode.size(); ++i) {
        os << (i ? ", " : "");
        if (p.mode[i].imag() == 0.0) {
          os << num(p.mode[i].real());
        } else {
          os << '"' << complex_text(p.mode[i]) << '"';
        }
      }
      os << "]\n";
    }
  }
  if (!cfg.symmetries.empty()) {
    os << "\n[symmetry]\n";
    for (const auto& P : cfg.symmetries) os << "P = " << to_string(P) << "\n";
  }
  const auto& a = cfg.analysis;
  os << "\n[analysis]\n";
  os << "seed = " << a.seed << "\n";
  os << "tol_rank = " << num(a.tol_rank) << "\n";
  os << "tol_group = " << num(a.tol_group) << "\n";
  os << "samples = " << a.samples << "\n";
  os << "lie_points = " << a.lie_points << "\n";
  os << "lie_max_order = " << a.lie_max_order << "\n";
  os << "node_budget = " << a.node_budget << "\n";
  os << "gramian_eps = " << num(a.gramian_eps) << "\n";
  os << "gramian_t = " << num(a.gramian_t) << "\n";
  os << "dt = " << num(a.dt) << "\n";
  if (a.koopman_tol) os << "koopman_tol = " << num(*a.koopman_tol) << "\n";
  else if (cfg.koopman) os << "koopman_tol = " << num(cfg.koopman->validation_tol) << "\n";
  if (!a.points.empty()) os << "points = " << points_text(a.points) << "\n";
  const auto& sim = cfg.simulate;
  os << "\n[simulate]\n";
  if (!sim.x0.empty()) os << "x0 = " << points_text(sim.x0) << "\n";
  os << "t_final = " << num(sim.t_final) << "\n";
  os << "dt = " << num(sim.dt) << "\n";
  os << "stride = " << sim.stride << "\n";
  return os.str();
}

}  // namespace koopobs
