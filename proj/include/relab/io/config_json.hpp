#pragma once

// JSON forms of the library configs. Readers reject unknown keys and
// wrongly typed values with ConfigError.

#include <json.hpp>

#include "relab/model/config.hpp"
#include "relab/optim/adamw.hpp"
#include "relab/optim/schedule.hpp"
#include "relab/relora/relora.hpp"

namespace relab {

nlohmann::json to_json(const DecoderConfig& c);
nlohmann::json to_json(const ReloraConfig& c);
nlohmann::json to_json(const ScheduleConfig& c);
nlohmann::json to_json(const AdamWOptions& o);

/// Accepts a preset name, or an object with an optional "preset" base plus
/// field overrides.
DecoderConfig decoder_config_from_json(const nlohmann::json& j);
ReloraConfig relora_config_from_json(const nlohmann::json& j);

}  // namespace relab
