#pragma once

#include <json.hpp>

#include "wimpute/engine.hpp"
#include "wimpute/mask_sim.hpp"
#include "wimpute/metrics.hpp"
#include "wimpute/regressors.hpp"

namespace wimpute {

using nlohmann::json;

// Parsers reject unknown keys so typos in config files surface early.

json to_json(const RegressorSpec& spec);
RegressorSpec regressor_spec_from_json(const json& j);

json to_json(const ImputationConfig& cfg);
ImputationConfig imputation_config_from_json(const json& j);

json to_json(const MarSpec& spec);
MarSpec mar_spec_from_json(const json& j);

/// Spec, intercepts and achieved expected missing rates (no per-row probabilities).
json to_json(const CalibratedMechanism& mech);

json to_json(const MetricsReport& report);
json to_json(const WilcoxonResult& result);
json to_json(const std::vector<IterationDiagnostics>& per_sweep);

/// Throws std::invalid_argument naming the first key not in `allowed`.
void require_known_keys(const json& j, std::initializer_list<const char*> allowed, const char* context);

}  // namespace wimpute
