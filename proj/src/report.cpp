#include "koopobs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace koopobs {

namespace {

const Json& require(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(std::string("bundle: missing '") + key + "' in " + where);
  }
  return j.at(key);
}

std::string str(const Json& j, const char* key, const char* where) {
  const Json& v = require(j, key, where);
  if (!v.is_string()) throw SchemaError(std::string("bundle: '") + key + "' must be a string");
  return v.get<std::string>();
}

std::string fmt(double v) {
  char buf[32];
  if (std::fabs(v) < 5e-13) v = 0.0;
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string lambda_text(double re, double im) {
  if (std::fabs(im) < 5e-13) return fmt(re);
  std::string s = fmt(re);
  s += im < 0 ? " - " : " + ";
  s += fmt(std::fabs(im)) + "i";
  return s;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string perm_text(const Json& p) {
  std::string s = "[";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + std::to_string(p[i].get<long>());
  return s + "]";
}

}  // namespace

std::string render_report(const Json& bundle) {
  if (!bundle.is_object()) throw SchemaError("bundle: not a JSON object");
  if (str(bundle, "schema", "bundle") != kBundleSchema) {
    throw SchemaError("bundle: unsupported schema '" + bundle["schema"].get<std::string>() + "'");
  }
  const Json& prov = require(bundle, "provenance", "bundle");
  const Json& model = require(bundle, "model", "bundle");
  const Json& reports = require(bundle, "reports", "bundle");
  const Json& verdict = require(bundle, "verdict", "bundle");
  if (!reports.is_array() || reports.empty()) throw SchemaError("bundle: no reports");

  std::ostringstream os;
  os << "model: " << str(model, "name", "model") << " (n=" << require(model, "n", "model")
     << ", q=" << require(model, "q", "model") << ")\n";
  os << "tool: " << str(prov, "tool", "provenance") << " " << str(prov, "version", "provenance")
     << "  config: " << str(prov, "config_hash", "provenance")
     << "  seed: " << require(prov, "seed", "provenance") << "\n";
  os << "verdict: " << str(verdict, "overall", "verdict");
  const Json& theorem = require(verdict, "theorem", "verdict");
  if (theorem.is_string()) os << " (" << theorem.get<std::string>() << ")";
  os << "\n";
  if (verdict.contains("min_measurements")) {
    os << "min_measurements: " << verdict["min_measurements"] << "\n";
  }

  const Json* rank = nullptr;
  for (const auto& r : reports) {
    if (str(r, "method", "report") == "KoopmanRank") rank = &r;
  }
  os << "\nKoopman rank test\n";
  if (rank) {
    const Json& groups = require(*rank, "groups", "KoopmanRank report");
    if (!groups.is_array() || groups.empty()) {
      throw SchemaError("bundle: Koopman rank report has no eigenvalue groups");
    }
    os << "  " << pad("lambda", 22) << pad("r", 4) << pad("rank", 6) << "status\n";
    for (const auto& g : groups) {
      double re = require(g, "lambda_re", "group").get<double>();
      double im = require(g, "lambda_im", "group").get<double>();
      bool passed = require(g, "passed", "group").get<bool>();
      os << "  " << pad(lambda_text(re, im), 22)
         << pad(std::to_string(require(g, "multiplicity", "group").get<long>()), 4)
         << pad(std::to_string(require(g, "rank", "group").get<long>()), 6)
         << (passed ? "pass" : "FAIL") << "\n";
    }
    os << "  verdict: " << str(*rank, "verdict", "KoopmanRank report") << " ("
       << theorem_label(Basis::RankCondition) << ")\n";
  } else {
    os << "  not available: no Koopman set\n";
  }

  if (bundle.contains("symmetry") && bundle["symmetry"].is_array()) {
    for (const auto& s : bundle["symmetry"]) {
      os << "\nsymmetry P=" << perm_text(require(s, "P", "symmetry"))
         << " (order " << require(s, "order", "symmetry") << ")\n";
      const Json& state = require(s, "state", "symmetry");
      os << "  state symmetry: " << (state["passed"].get<bool>() ? "holds" : "fails")
         << " (residual " << fmt(state["residual"].get<double>()) << ")\n";
      if (str(s, "status", "symmetry") != "ok") continue;
      const Json& meas = require(s, "measurement", "symmetry");
      os << "  measurement symmetry: " << (meas["passed"].get<bool>() ? "holds" : "fails")
         << " (residual " << fmt(meas["residual"].get<double>()) << ")\n";
      if (s.contains("classification")) {
        const Json& c = s["classification"];
        os << "  eigenfunctions: " << c["rotational"].size() << " rotational, "
           << c["reflectional"].size() << " reflectional pair(s)\n";
      }
      std::string line = str(s, "rationale", "symmetry");
      const Json& th = require(s, "theorem", "symmetry");
      os << "  " << line;
      if (th.is_string()) os << " (" << th.get<std::string>() << ")";
      os << "\n  verdict: " << str(s, "verdict", "symmetry") << "\n";
      if (s.contains("note")) os << "  note: " << s["note"].get<std::string>() << "\n";
    }
  }

  os << "\nmethod agreement\n";
  for (const auto& r : reports) {
    std::string method = str(r, "method", "report");
    const Json& v = require(r, "verdict", "report");
    os << "  " << pad(method, 18);
    if (v.is_string()) {
      os << v.get<std::string>();
    } else {
      os << str(r, "status", "report");
      if (r.contains("reason")) os << ": " << r["reason"].get<std::string>();
    }
    os << "\n";
  }
  const Json& methods = require(verdict, "methods", "verdict");
  if (methods.contains("Symmetry")) {
    os << "  " << pad("Symmetry", 18) << methods["Symmetry"].get<std::string>() << "\n";
  }
  os << "  agreement: " << (require(verdict, "agreement", "verdict").get<bool>() ? "yes" : "NO")
     << "\n";
  return os.str();
}

std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  const double W = 800, H = 450, left = 70, right = 20, top = 40, bottom = 50;
  double tmin = 0, tmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.traj->size(); ++k) {
      double t = s.traj->times[k];
      if (first) {
        tmin = tmax = t;
        ymin = ymax = s.traj->measurements[k].empty() ? 0.0 : s.traj->measurements[k][0];
        first = false;
      }
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
      for (double y : s.traj->measurements[k]) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (tmax <= tmin) tmax = tmin + 1.0;
  if (ymax <= ymin) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  auto X = [&](double t) { return left + (t - tmin) / (tmax - tmin) * (W - left - right); };
  auto Y = [&](double y) { return H - bottom - (y - ymin) / (ymax - ymin) * (H - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  std::ostringstream os;
  char buf[64];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">"
     << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
     << H - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << H - bottom << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    double t = tmin + (tmax - tmin) * k / 4.0;
    double y = ymin + (ymax - ymin) * k / 4.0;
    std::snprintf(buf, sizeof buf, "%.4g", t);
    os << "<text x=\"" << X(t) << "\" y=\"" << H - bottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << buf
       << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", y);
    os << "<text x=\"" << left - 6 << "\" y=\"" << Y(y) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
       << "</text>\n";
  }
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t</text>\n";

  std::size_t color = 0;
  double legend_y = top + 4;
  for (const auto& s : series) {
    const std::size_t q = s.traj->measurements.empty() ? 0 : s.traj->measurements.front().size();
    const std::size_t count = s.traj->size();
    const std::size_t step = std::max<std::size_t>(1, count / 2000);
    for (std::size_t j = 0; j < q; ++j) {
      const char* c = colors[color++ % 8];
      // later series dashed so that coinciding curves stay visible
      const bool dashed = &s != &series.front();
      os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\""
         << (dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
      for (std::size_t k = 0; k < count; k += step) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(s.traj->times[k]),
                      Y(s.traj->measurements[k][j]));
        os << buf;
      }
      std::snprintf(buf, sizeof buf, "%.2f,%.2f", X(s.traj->times[count - 1]),
                    Y(s.traj->measurements[count - 1][j]));
      os << buf << "\"/>\n";
      os << "<text x=\"" << W - right - 150 << "\" y=\"" << legend_y
         << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << c << "\">" << s.label
         << " y" << j + 1 << "</text>\n";
      legend_y += 14;
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace koopobs
