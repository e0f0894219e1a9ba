#pragma once

// nlohmann/json conversions for every document the tools read or write.

#include <json.hpp>

#include "tep/fusion.hpp"
#include "tep/manifest.hpp"
#include "tep/metrics.hpp"
#include "tep/simulator.hpp"

namespace tep {

using Json = nlohmann::ordered_json;

Json to_json(const BBox& b);
/// Accepts [x0,y0,x1,y1]; null gives absent. Throws InvalidArgument.
std::optional<BBox> bbox_from_json(const Json& j);

Json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const Json& j);

Json to_json(const Manifest& manifest);
Manifest manifest_from_json(const Json& j);

Json to_json(const Scores& s);
Scores scores_from_json(const Json& j);
Json to_json(const EvalReport& r);
EvalReport report_from_json(const Json& j);

Json to_json(const FusionConfig& cfg);
/// Strict: every field is required and unknown keys are rejected. A missing
/// key raises ConfigError naming the key and its default.
FusionConfig fusion_config_from_json(const Json& j);

/// Canonical text for files: 2-space indent plus trailing newline.
std::string dump_document(const Json& j);

}  // namespace tep
