#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "koopobs/dynamics.hpp"
#include "koopobs/koopman.hpp"
#include "koopobs/models.hpp"
#include "koopobs/symmetry.hpp"

namespace koopobs {

/// Invalid or inconsistent model configuration. Line is 0 when the problem
/// is not tied to a single line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& msg);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct AnalysisSettings {
  std::uint64_t seed = 42;
  double tol_rank = kExactRankEps;
  double tol_group = 1e-8;
  std::size_t samples = 200;
  std::size_t lie_points = 5;
  std::size_t lie_max_order = 0;
  std::size_t node_budget = 2'000'000;
  double gramian_eps = 1e-4;
  double gramian_t = 1.0;
  double dt = 1e-3;
  /// Overrides the eigenpair validation tolerance of the Koopman set.
  std::optional<double> koopman_tol;
  /// Explicit test points; random domain samples when empty.
  std::vector<Point> points;
};

struct SimulateSettings {
  std::vector<Point> x0;
  double t_final = 1.0;
  double dt = 1e-3;
  std::size_t stride = 1;
};

struct ModelConfig {
  NonlinearSystem system;
  std::optional<ExprVector> alt_measurement;
  std::optional<KoopmanSet> koopman;
  std::vector<PermutationSymmetry> symmetries;
  AnalysisSettings analysis;
  SimulateSettings simulate;
};

/// Sections [system], [koopman] (one per eigenpair), [symmetry], [analysis]
/// and [simulate]; `key = value` lines where values are JSON or bare text;
/// '#' starts a comment line. Unknown sections and keys are rejected.
ModelConfig parse_config(std::string_view text);
ModelConfig load_config(const std::string& path);

/// Wraps a built-in model. `alt` selects its alternative measurement.
ModelConfig config_from_builtin(const BuiltinModel& model, bool alt);

/// "1", "-2.5", "3i", "-1.5+0.866i", "2-j".
std::optional<cd> parse_complex(std::string_view text);

/// Canonical text form of a config; parse_config(write_config(c)) rebuilds
/// the same model.
std::string write_config(const ModelConfig& cfg);

}  // namespace koopobs
