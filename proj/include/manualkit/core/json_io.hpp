#pragma once

#include "manualkit/core/action.hpp"
#include "manualkit/core/appliance.hpp"

#include <nlohmann/json.hpp>

namespace manualkit {

using nlohmann::json;

json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const json& j);

json to_json(const ApplianceModel& model);
ApplianceModel model_from_json(const json& j);

json to_json(const ApplianceState& state);
ApplianceState state_from_json(const json& j);

json to_json(const ExecutionStep& step);

}  // namespace manualkit
