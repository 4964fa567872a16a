#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpsim/bps_model.hpp"
#include "bpsim/sim_engine.hpp"

namespace bpsim::service {

/// A what-if variant of a session's base model plus the run settings.
///
///   {"id": "plus-one",
///    "horizon": "2024-01-02T00:00:00Z" | "horizon_hours": 24,
///    "runs": 10, "seed": 1, "dispatch": "fifo", "wip_step_minutes": 60,
///    "add_resources": [<resource as in the parameter document>],
///    "remove_resources": ["Bob"],
///    "calendars": {"Alice": [{"day": "MON", "from": "09:00", "to": "17:00"}]
///                  | {"timezone": "+01:00", "calendar": [...]}},
///    "arrival_scale": 1.5,
///    "duration_scale": {"<task label>": 2.0},
///    "branching": {"<flow id>": 0.7}}
struct Scenario {
  std::string id = "as-is";
  std::vector<ResourceProfile> add_resources;
  std::vector<std::string> remove_resources;
  std::map<std::string, Calendar> calendars;
  /// Multiplies the arrival rate.
  double arrival_scale = 1.0;
  std::map<std::string, double> duration_scale;
  /// Weights for conditional flows; each touched gateway is re-normalized.
  std::map<std::string, double> branching;
  std::optional<Timestamp> horizon;
  Duration horizon_offset = std::chrono::hours{24};
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  DispatchPolicy policy = DispatchPolicy::Fifo;
  Duration wip_step = std::chrono::hours{1};

  Timestamp horizon_for(Timestamp start) const { return horizon.value_or(start + horizon_offset); }
};

/// Throws ValidationError on malformed fields.
Scenario parse_scenario(const nlohmann::json& j);
nlohmann::json scenario_json(const Scenario& s);

/// The base model with the scenario's overrides applied and validated.
/// Throws ValidationError for unknown references, non-positive factors or a
/// removal that leaves a task without resources.
BPSModel apply_scenario(const BPSModel& base, const Scenario& scenario);

}  // namespace bpsim::service
