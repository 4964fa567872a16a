#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "bpsim/errors.hpp"
#include "bpsim/sim_engine.hpp"
#include "csv.hpp"

namespace bpsim {

const CaseRecord* SimLog::find_case(std::string_view id) const {
  auto it = std::find_if(cases.begin(), cases.end(), [&](const CaseRecord& c) { return c.id == id; });
  return it == cases.end() ? nullptr : &*it;
}

EventLog SimLog::to_event_log() const {
  EventLog log = make_log(instances);
  if (horizon) log.reference_time = std::max(log.reference_time, *horizon);
  return log;
}

std::string write_simlog_csv(const SimLog& log) {
  std::map<std::string, Timestamp> arrival;
  for (const auto& c : log.cases) arrival.emplace(c.id, c.arrival);

  std::ostringstream out;
  out << "case_id,activity,start_time,end_time,resource,case_arrival,enabled_time\n";
  for (const auto& inst : log.instances) {
    auto it = arrival.find(inst.case_id);
    out << csv::escape(inst.case_id) << ',' << csv::escape(inst.activity) << ','
        << format_timestamp(inst.start) << ',' << (inst.end ? format_timestamp(*inst.end) : "")
        << ',' << csv::escape(inst.resource.value_or("")) << ','
        << (it != arrival.end() ? format_timestamp(it->second) : "") << ','
        << (inst.enablement ? format_timestamp(*inst.enablement) : "") << '\n';
  }
  return out.str();
}

std::string write_simlog_metadata(const SimLog& log) {
  nlohmann::json j{{"seed", log.seed},
                   {"origin", format_timestamp(log.origin)},
                   {"horizon", log.horizon ? nlohmann::json(format_timestamp(*log.horizon))
                                           : nlohmann::json(nullptr)},
                   {"policy", std::string(to_string(log.policy))},
                   {"initial_wip", log.initial_wip},
                   {"cases", log.cases.size()},
                   {"instances", log.instances.size()}};
  if (!log.warmup_stop.empty()) j["warmup_stop"] = log.warmup_stop;
  return j.dump(2);
}

SimLog parse_simlog_csv(std::string_view csv_document) {
  // parse_log validates the common columns and timestamps.
  const EventLog base = parse_log(csv_document);
  const auto rows = csv::parse(csv_document);
  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const std::size_t c_case = *column("case_id");
  const std::size_t c_act = *column("activity");
  const std::size_t c_start = *column("start_time");
  const auto c_arrival = column("case_arrival");
  const auto c_enabled = column("enabled_time");
  auto cell = [](const std::vector<std::string>& row, std::optional<std::size_t> c) {
    return c && *c < row.size() ? row[*c] : std::string();
  };

  std::map<std::string, Timestamp> arrivals;
  std::map<std::tuple<std::string, std::string, Timestamp>, Timestamp> enabled;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (const auto a = cell(row, c_arrival); !a.empty()) arrivals.emplace(row[c_case], parse_timestamp(a));
    if (const auto e = cell(row, c_enabled); !e.empty()) {
      enabled.emplace(std::tuple{row[c_case], row[c_act], parse_timestamp(row[c_start])},
                      parse_timestamp(e));
    }
  }

  SimLog out;
  for (const auto& trace : base.traces) {
    for (ActivityInstance inst : trace.instances) {
      auto it = enabled.find({inst.case_id, inst.activity, inst.start});
      if (it != enabled.end()) inst.enablement = it->second;
      out.instances.push_back(std::move(inst));
    }
    auto it = arrivals.find(trace.case_id);
    out.cases.push_back({trace.case_id, it != arrivals.end() ? it->second : trace.arrival(),
                         trace.completion(), false});
  }
  std::stable_sort(out.instances.begin(), out.instances.end(),
                   [](const ActivityInstance& a, const ActivityInstance& b) {
                     return std::tie(a.start, a.case_id, a.activity) <
                            std::tie(b.start, b.case_id, b.activity);
                   });
  std::sort(out.cases.begin(), out.cases.end(), [](const CaseRecord& a, const CaseRecord& b) {
    return std::tie(a.arrival, a.id) < std::tie(b.arrival, b.id);
  });
  return out;
}

}  // namespace bpsim
