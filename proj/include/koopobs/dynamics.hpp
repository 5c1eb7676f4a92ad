#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "koopobs/expr.hpp"
#include "koopobs/sampling.hpp"

namespace koopobs {

/// Lower bound that a coordinate must respect during integration
/// (e.g. an oscillator amplitude that appears in a denominator).
struct CoordinateGuard {
  std::size_t index = 0;  // 1-based
  double min_value = 0.0;
};

/// x' = f(x), y = h(x).
struct NonlinearSystem {
  std::string name;
  std::size_t n = 0;
  std::size_t q = 0;
  ExprVector f;
  ExprVector h;
  Box domain;
  std::vector<CoordinateGuard> guards;
  /// Coordinates that are angles; only wrapped when written out.
  std::vector<std::size_t> phase_coords;

  /// Checks dimensions and that f and h evaluate without fault on
  /// `samples` seeded points of the domain box. Throws std::invalid_argument.
  void validate(std::size_t samples = 100, std::uint64_t seed = 0) const;

  NonlinearSystem with_measurement(ExprVector new_h) const;
};

NonlinearSystem make_system(std::string name, ExprVector f, ExprVector h, Box domain);

struct Trajectory {
  std::vector<double> times;
  std::vector<Point> states;
  std::vector<Point> measurements;

  std::size_t size() const { return times.size(); }
};

/// Integration stopped on an evaluation fault or a violated guard.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& why, double time, Point state);
  double time() const { return time_; }
  const Point& state() const { return state_; }

 private:
  double time_;
  Point state_;
};

struct FlowOptions {
  double dt = 1e-3;
  /// Store every `stride`-th step; the final state is always stored.
  std::size_t stride = 1;
};

/// Classical fixed-step RK4 from t = 0 to t_final. A last partial step is
/// taken when t_final is not a multiple of dt.
Trajectory flow(const NonlinearSystem& sys, const Point& x0, double t_final,
                const FlowOptions& opts = {});

/// Max over samples of the infinity norm of the measurement difference.
double measurement_distance(const Trajectory& a, const Trajectory& b);

/// Max over samples of the infinity norm of the state difference.
double state_distance(const Trajectory& a, const Trajectory& b);

double wrap_phase(double phi);

/// CSV with header t,x1..xn,y1..yq and 17 significant digits.
void write_csv(std::ostream& out, const Trajectory& traj,
               const std::vector<std::size_t>& wrap_coords = {});

}  // namespace koopobs
