#include "koopobs/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

namespace koopobs {

void NonlinearSystem::validate(std::size_t samples, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument(name + ": state dimension must be >= 1");
  if (q < 1) throw std::invalid_argument(name + ": measurement dimension must be >= 1");
  if (f.size() != n) throw std::invalid_argument(name + ": vector field length differs from n");
  if (h.size() != q) throw std::invalid_argument(name + ": measurement length differs from q");
  if (domain.size() != n) throw std::invalid_argument(name + ": domain box must have n intervals");
  for (const auto& iv : domain) {
    if (!(iv.lo <= iv.hi)) throw std::invalid_argument(name + ": empty domain interval");
  }
  for (const auto& e : f) {
    if (e.max_var() > n) throw std::invalid_argument(name + ": f references a variable beyond n");
  }
  for (const auto& e : h) {
    if (e.max_var() > n) throw std::invalid_argument(name + ": h references a variable beyond n");
  }
  Rng rng(seed);
  for (const auto& x : sample_box(domain, samples, rng)) {
    try {
      evaluate(f, x);
      evaluate(h, x);
    } catch (const EvalError& err) {
      throw std::invalid_argument(name + ": fault on domain sample: " + err.what());
    }
  }
}

NonlinearSystem NonlinearSystem::with_measurement(ExprVector new_h) const {
  NonlinearSystem out = *this;
  out.q = new_h.size();
  out.h = std::move(new_h);
  return out;
}

NonlinearSystem make_system(std::string name, ExprVector f, ExprVector h, Box domain) {
  NonlinearSystem sys;
  sys.name = std::move(name);
  sys.n = f.size();
  sys.q = h.size();
  sys.f = std::move(f);
  sys.h = std::move(h);
  sys.domain = std::move(domain);
  return sys;
}

IntegrationError::IntegrationError(const std::string& why, double time, Point state)
    : std::runtime_error([&] {
        std::ostringstream os;
        os.precision(17);
        os << why << " at t = " << time << ", state = [";
        for (std::size_t i = 0; i < state.size(); ++i) os << (i ? ", " : "") << state[i];
        os << "]";
        return os.str();
      }()),
      time_(time),
      state_(std::move(state)) {}

namespace {

void check_guards(const NonlinearSystem& sys, const Point& x, double t) {
  for (const auto& g : sys.guards) {
    double v = x[g.index - 1];
    if (!(v >= g.min_value)) {
      throw IntegrationError("x" + std::to_string(g.index) + " fell below " +
                                 std::to_string(g.min_value),
                             t, x);
    }
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw IntegrationError("state is not finite", t, x);
  }
}

Point rhs(const NonlinearSystem& sys, const Point& x, double t) {
  try {
    return evaluate(sys.f, x);
  } catch (const EvalError& err) {
    throw IntegrationError(err.what(), t, x);
  }
}

Point measure(const NonlinearSystem& sys, const Point& x, double t) {
  try {
    return evaluate(sys.h, x);
  } catch (const EvalError& err) {
    throw IntegrationError(err.what(), t, x);
  }
}

void axpy(Point& out, const Point& x, double a, const Point& k) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * k[i];
}

}  // namespace

Trajectory flow(const NonlinearSystem& sys, const Point& x0, double t_final,
                const FlowOptions& opts) {
  if (!(opts.dt > 0.0)) throw std::invalid_argument("flow: dt must be positive");
  if (!(t_final >= 0.0)) throw std::invalid_argument("flow: t_final must be non-negative");
  if (x0.size() != sys.n) throw std::invalid_argument("flow: x0 has wrong dimension");
  std::size_t stride = std::max<std::size_t>(opts.stride, 1);

  Trajectory traj;
  Point x = x0;
  check_guards(sys, x, 0.0);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.measurements.push_back(measure(sys, x, 0.0));

  double ratio = t_final / opts.dt;
  auto steps = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
  const std::size_t n = sys.n;
  Point k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t s = 1; s <= steps; ++s) {
    double t0 = static_cast<double>(s - 1) * opts.dt;
    double t1 = s == steps ? t_final : static_cast<double>(s) * opts.dt;
    double h = t1 - t0;
    k1 = rhs(sys, x, t0);
    axpy(tmp, x, 0.5 * h, k1);
    k2 = rhs(sys, tmp, t0 + 0.5 * h);
    axpy(tmp, x, 0.5 * h, k2);
    k3 = rhs(sys, tmp, t0 + 0.5 * h);
    axpy(tmp, x, h, k3);
    k4 = rhs(sys, tmp, t1);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check_guards(sys, x, t1);
    if (s % stride == 0 || s == steps) {
      traj.times.push_back(t1);
      traj.states.push_back(x);
      traj.measurements.push_back(measure(sys, x, t1));
    }
  }
  return traj;
}

namespace {

double max_distance(const Trajectory& a, const Trajectory& b, const std::vector<Point>& pa,
                    const std::vector<Point>& pb) {
  if (a.times.size() != b.times.size()) throw std::invalid_argument("time grids differ in length");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (a.times[k] != b.times[k]) throw std::invalid_argument("time grids differ");
    if (pa[k].size() != pb[k].size()) throw std::invalid_argument("dimension mismatch");
    for (std::size_t i = 0; i < pa[k].size(); ++i) {
      worst = std::max(worst, std::fabs(pa[k][i] - pb[k][i]));
    }
  }
  return worst;
}

}  // namespace

double measurement_distance(const Trajectory& a, const Trajectory& b) {
  return max_distance(a, b, a.measurements, b.measurements);
}

double state_distance(const Trajectory& a, const Trajectory& b) {
  return max_distance(a, b, a.states, b.states);
}

double wrap_phase(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(phi + std::numbers::pi, two_pi);
  if (w <= 0.0) w += two_pi;
  return w - std::numbers::pi;
}

void write_csv(std::ostream& out, const Trajectory& traj,
               const std::vector<std::size_t>& wrap_coords) {
  std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  std::size_t q = traj.measurements.empty() ? 0 : traj.measurements.front().size();
  out << 't';
  for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
  for (std::size_t j = 1; j <= q; ++j) out << ",y" << j;
  out << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    put(traj.times[k]);
    for (std::size_t i = 0; i < n; ++i) {
      out << ',';
      double v = traj.states[k][i];
      if (std::find(wrap_coords.begin(), wrap_coords.end(), i + 1) != wrap_coords.end()) {
        v = wrap_phase(v);
      }
      put(v);
    }
    for (std::size_t j = 0; j < q; ++j) {
      out << ',';
      put(traj.measurements[k][j]);
    }
    out << '\n';
  }
}

}  // namespace koopobs
