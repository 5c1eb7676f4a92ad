#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "koopobs/analysis.hpp"
#include "koopobs/dynamics.hpp"

namespace koopobs {

/// Bundle does not have the expected shape.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic text summary: verdict, per-group table, symmetry verdicts
/// and the method agreement table. Throws SchemaError.
std::string render_report(const Json& bundle);

struct PlotSeries {
  std::string label;
  const Trajectory* traj = nullptr;
};

/// Measurement-vs-time overlay of every series and every output component.
std::string render_svg(const std::vector<PlotSeries>& series, const std::string& title);

}  // namespace koopobs
