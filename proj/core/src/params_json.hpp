#pragma once

#include <json.hpp>

#include "bpsim/bps_model.hpp"

// JSON pieces of the parameter document shared with the service.
namespace bpsim {

Calendar parse_calendar(const nlohmann::json& intervals, Duration utc_offset);
nlohmann::json calendar_json(const Calendar& cal);
ResourceProfile parse_resource(const nlohmann::json& j);
nlohmann::json resource_json(const ResourceProfile& r);
/// "+01:00" style.
std::string format_offset(Duration d);

}  // namespace bpsim
