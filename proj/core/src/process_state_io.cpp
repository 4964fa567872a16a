#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "bpsim/errors.hpp"
#include "bpsim/random.hpp"
#include "bpsim/state_discovery.hpp"

namespace bpsim {
namespace {

using json = nlohmann::json;

json state_json(const ProcessState& state) {
  json cases = json::array();
  for (const auto& c : state.cases) {
    json flows = json::array();
    for (const auto& f : c.flows) {
      flows.push_back({{"flow", f.flow}, {"enabled", format_timestamp(f.enabled)}});
    }
    json ongoing = json::array();
    for (const auto& a : c.ongoing) {
      ongoing.push_back({{"activity", a.activity},
                         {"enabled", format_timestamp(a.enabled)},
                         {"started", format_timestamp(a.started)},
                         {"resources", a.resources}});
    }
    cases.push_back({{"id", c.id},
                     {"arrival", format_timestamp(c.arrival)},
                     {"flows", std::move(flows)},
                     {"ongoing", std::move(ongoing)}});
  }
  return {{"at", format_timestamp(state.at)}, {"cases", std::move(cases)}};
}

Timestamp timestamp_field(const json& j, const char* key) {
  return parse_timestamp(j.at(key).get<std::string>());
}

}  // namespace

std::string write_state(const ProcessState& state, int indent) {
  return state_json(state).dump(indent);
}

ProcessState parse_state(std::string_view json_document) {
  ProcessState state;
  try {
    const json doc = json::parse(json_document);
    state.at = timestamp_field(doc, "at");
    std::set<std::string> ids;
    for (const auto& jc : doc.at("cases")) {
      CaseState c;
      c.id = jc.at("id").get<std::string>();
      if (!ids.insert(c.id).second) throw ValidationError("duplicate case '" + c.id + "'");
      c.arrival = timestamp_field(jc, "arrival");
      if (jc.contains("flows")) {
        for (const auto& jf : jc.at("flows")) {
          c.flows.push_back({jf.at("flow").get<std::string>(), timestamp_field(jf, "enabled")});
        }
      }
      if (jc.contains("ongoing")) {
        for (const auto& ja : jc.at("ongoing")) {
          OngoingActivity a;
          a.activity = ja.at("activity").get<std::string>();
          a.started = timestamp_field(ja, "started");
          a.enabled = ja.contains("enabled") ? timestamp_field(ja, "enabled") : a.started;
          if (ja.contains("resources")) a.resources = ja.at("resources").get<std::vector<std::string>>();
          if (a.enabled > a.started) {
            throw ValidationError("case '" + c.id + "': '" + a.activity +
                                  "' enabled after it started");
          }
          c.ongoing.push_back(std::move(a));
        }
      }
      std::sort(c.flows.begin(), c.flows.end(),
                [](const FlowToken& a, const FlowToken& b) { return a.flow < b.flow; });
      std::sort(c.ongoing.begin(), c.ongoing.end(),
                [](const OngoingActivity& a, const OngoingActivity& b) { return a.activity < b.activity; });
      state.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed state document: ") + e.what());
  }
  std::sort(state.cases.begin(), state.cases.end(),
            [](const CaseState& a, const CaseState& b) { return a.id < b.id; });
  return state;
}

std::string state_hash(const ProcessState& state) {
  const std::uint64_t h = hash_string(state_json(state).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bpsim
