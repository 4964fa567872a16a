#include "bpsim/service/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "../params_json.hpp"
#include "bpsim/errors.hpp"

namespace bpsim::service {
namespace {

using json = nlohmann::json;

double positive_factor(const json& v, const std::string& what) {
  if (!v.is_number()) throw ValidationError(what + " must be a number");
  const double f = v.get<double>();
  if (!(f > 0.0) || !std::isfinite(f)) throw ValidationError(what + " must be positive");
  return f;
}

Calendar calendar_override(const json& v) {
  if (v.is_array()) return parse_calendar(v, Duration{0});
  Duration offset{0};
  if (v.contains("timezone")) offset = parse_utc_offset(v.at("timezone").get<std::string>());
  return parse_calendar(v.at("calendar"), offset);
}

}  // namespace

Scenario parse_scenario(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
  Scenario s;
  try {
    if (j.contains("id")) s.id = j.at("id").get<std::string>();
    if (j.contains("horizon")) s.horizon = parse_timestamp(j.at("horizon").get<std::string>());
    if (j.contains("horizon_hours")) {
      const double h = j.at("horizon_hours").get<double>();
      if (!(h >= 0.0)) throw ValidationError("horizon_hours must not be negative");
      s.horizon_offset = from_seconds(h * 3600.0);
    }
    if (j.contains("runs")) {
      s.runs = j.at("runs").get<std::size_t>();
      if (s.runs == 0 || s.runs > 1000) throw ValidationError("runs must lie in [1, 1000]");
    }
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dispatch")) s.policy = parse_policy(j.at("dispatch").get<std::string>());
    if (j.contains("wip_step_minutes")) {
      const double m = positive_factor(j.at("wip_step_minutes"), "wip_step_minutes");
      s.wip_step = from_seconds(m * 60.0);
    }
    if (j.contains("add_resources")) {
      for (const auto& r : j.at("add_resources")) s.add_resources.push_back(parse_resource(r));
    }
    if (j.contains("remove_resources")) {
      s.remove_resources = j.at("remove_resources").get<std::vector<std::string>>();
    }
    if (j.contains("calendars")) {
      for (const auto& [id, v] : j.at("calendars").items()) {
        try {
          s.calendars.emplace(id, calendar_override(v));
        } catch (const ValidationError& e) {
          throw ValidationError("calendar of '" + id + "': " + e.what());
        }
      }
    }
    if (j.contains("arrival_scale")) s.arrival_scale = positive_factor(j.at("arrival_scale"), "arrival_scale");
    if (j.contains("duration_scale")) {
      for (const auto& [label, v] : j.at("duration_scale").items()) {
        s.duration_scale.emplace(label, positive_factor(v, "duration_scale of '" + label + "'"));
      }
    }
    if (j.contains("branching")) {
      for (const auto& [flow, v] : j.at("branching").items()) {
        if (!v.is_number() || v.get<double>() < 0.0) {
          throw ValidationError("branching weight of '" + flow + "' must be a non-negative number");
        }
        s.branching.emplace(flow, v.get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
  return s;
}

json scenario_json(const Scenario& s) {
  json j{{"id", s.id},
         {"runs", s.runs},
         {"seed", s.seed},
         {"dispatch", std::string(to_string(s.policy))},
         {"wip_step_minutes", to_seconds(s.wip_step) / 60.0},
         {"arrival_scale", s.arrival_scale},
         {"remove_resources", s.remove_resources},
         {"duration_scale", s.duration_scale},
         {"branching", s.branching}};
  if (s.horizon) {
    j["horizon"] = format_timestamp(*s.horizon);
  } else {
    j["horizon_hours"] = to_hours(s.horizon_offset);
  }
  j["add_resources"] = json::array();
  for (const auto& r : s.add_resources) j["add_resources"].push_back(resource_json(r));
  j["calendars"] = json::object();
  for (const auto& [id, cal] : s.calendars) {
    j["calendars"][id] = cal.utc_offset() == Duration{0}
                             ? calendar_json(cal)
                             : json{{"timezone", format_offset(cal.utc_offset())},
                                    {"calendar", calendar_json(cal)}};
  }
  return j;
}

BPSModel apply_scenario(const BPSModel& base, const Scenario& s) {
  BPSModel model = base;
  const WFGraph& g = model.graph;

  for (const auto& id : s.remove_resources) {
    auto it = std::find_if(model.resources.begin(), model.resources.end(),
                           [&](const ResourceProfile& r) { return r.id == id; });
    if (it == model.resources.end()) throw ValidationError("cannot remove unknown resource '" + id + "'");
    model.resources.erase(it);
  }
  for (const auto& r : s.add_resources) {
    if (model.find_resource(r.id)) throw ValidationError("resource '" + r.id + "' already exists");
    model.resources.push_back(r);
  }
  std::sort(model.resources.begin(), model.resources.end(),
            [](const ResourceProfile& a, const ResourceProfile& b) { return a.id < b.id; });
  for (const auto& [id, cal] : s.calendars) {
    auto it = std::find_if(model.resources.begin(), model.resources.end(),
                           [&](const ResourceProfile& r) { return r.id == id; });
    if (it == model.resources.end()) throw ValidationError("calendar for unknown resource '" + id + "'");
    it->calendar = cal;
  }

  if (s.arrival_scale != 1.0) model.inter_arrival = model.inter_arrival.scaled(1.0 / s.arrival_scale);
  for (const auto& [label, f] : s.duration_scale) {
    auto it = model.durations.find(label);
    if (it == model.durations.end()) throw ValidationError("duration_scale for unknown task '" + label + "'");
    it->second = it->second.scaled(f);
  }

  std::set<NodeIndex> gateways;
  for (const auto& [flow_id, w] : s.branching) {
    const auto f = g.find_flow(flow_id);
    const auto conditional = g.conditional_flows();
    if (!f || std::find(conditional.begin(), conditional.end(), *f) == conditional.end()) {
      throw ValidationError("branching override for '" + flow_id + "', which is not a conditional flow");
    }
    model.branching[flow_id] = w;
    gateways.insert(g.flow(*f).source);
  }
  for (NodeIndex gw : gateways) {
    double total = 0.0;
    for (FlowIndex o : g.node(gw).outgoing) total += model.branching[g.flow(o).id];
    if (!(total > 0.0)) {
      throw ValidationError("branching weights at gateway '" + g.node(gw).id + "' sum to zero");
    }
    for (FlowIndex o : g.node(gw).outgoing) model.branching[g.flow(o).id] /= total;
  }

  validate(model);
  return model;
}

}  // namespace bpsim::service
