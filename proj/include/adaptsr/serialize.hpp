#pragma once

#include <filesystem>
#include <string>

#include "adaptsr/artifact_guard.hpp"
#include "adaptsr/calibration.hpp"
#include "adaptsr/core.hpp"
#include "adaptsr/error.hpp"
#include "adaptsr/gating.hpp"
#include "adaptsr/resource.hpp"
#include "adaptsr/simharness.hpp"
#include "json.hpp"

namespace adaptsr {

using Json = nlohmann::ordered_json;

// JSON mapping for configs and reports. from_json merges onto the current value:
// absent keys keep it, unknown keys and wrong types throw InvalidArgument.
// Behavior classes are keyed by name, SR levels by "none" / "2x" / "4x".

Json class_set_json(const ClassSet& set);
void to_json(Json& j, const ClassSet& set);
void from_json(const Json& j, ClassSet& set);

void to_json(Json& j, const Thresholds& t);
void from_json(const Json& j, Thresholds& t);
void to_json(Json& j, const AdaptiveTauConfig& c);
void from_json(const Json& j, AdaptiveTauConfig& c);
/// Missing entries are written as null; reading null erases the entry.
void to_json(Json& j, const DeltaAccTable& t);
void from_json(const Json& j, DeltaAccTable& t);
void to_json(Json& j, const UtilityParams& p);
void from_json(const Json& j, UtilityParams& p);
void to_json(Json& j, const LevelCost& c);
void from_json(const Json& j, LevelCost& c);
void to_json(Json& j, const CostProfile& p);
void from_json(const Json& j, CostProfile& p);
void to_json(Json& j, const GuardConfig& c);
void from_json(const Json& j, GuardConfig& c);
void to_json(Json& j, const TruncatedNormal& d);
void from_json(const Json& j, TruncatedNormal& d);
void to_json(Json& j, const ConfidenceDistribution& d);
void from_json(const Json& j, ConfidenceDistribution& d);
void to_json(Json& j, const BehaviorConfidenceModel& m);
void from_json(const Json& j, BehaviorConfidenceModel& m);
void to_json(Json& j, const ArtifactModel& m);
void from_json(const Json& j, ArtifactModel& m);
void to_json(Json& j, const SrEffectModel& m);
void from_json(const Json& j, SrEffectModel& m);
void to_json(Json& j, const Scenario& s);
void from_json(const Json& j, Scenario& s);
void to_json(Json& j, const ExperimentConfig& c);
void from_json(const Json& j, ExperimentConfig& c);

Json to_json(const CalibrationReport& r);
CalibrationReport calibration_report_from_json(const Json& j);
Json to_json(const CostSummary& s);
Json to_json(const GateDecision& d);

/// Pretty-printed with a trailing newline.
std::string dump_json(const Json& j);
/// Throws IoFailure when unreadable, `parse_errc` when not valid JSON.
Json load_json_file(const std::filesystem::path& path, Errc parse_errc = Errc::invalid_argument);
/// Throws IoFailure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace adaptsr
