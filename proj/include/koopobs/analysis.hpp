#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "koopobs/config.hpp"
#include "koopobs/observability.hpp"
#include "koopobs/symmetry.hpp"

namespace koopobs {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "koopobs";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kBundleSchema = "koopobs-bundle/1";

/// Result the verdict rests on. theorem_label() gives the published name
/// used in the `theorem` fields of the bundle.
enum class Basis { RankCondition, SymmetricMeasurement, MultiplicityBound };
const char* theorem_label(Basis b);
Basis basis_of(SymmetryRoute route);

/// 0 Observable, 3 Unobservable, 4 Inconclusive.
int exit_code(Verdict v);
Verdict parse_verdict(std::string_view s);

std::uint64_t fnv1a64(std::string_view data);
/// "fnv1a64:<16 hex digits>" of the canonical config text.
std::string config_hash(const ModelConfig& cfg);

Json to_json(const ObservabilityReport& rep);
Json to_json(const SymmetryClassification& cls);

struct AnalysisResult {
  Json bundle;
  Verdict verdict = Verdict::Inconclusive;
};

/// Full pipeline: Koopman set validation and canonical form, rank test,
/// symmetry checks and verdicts, Lie rank and empirical Gramian at the
/// configured points. Precondition failures propagate as PreconditionError.
AnalysisResult analyze(const ModelConfig& cfg);

}  // namespace koopobs
