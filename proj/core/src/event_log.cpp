#include "bpsim/event_log.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "bpsim/errors.hpp"
#include "csv.hpp"

namespace bpsim {

Timestamp Trace::arrival() const {
  Timestamp earliest = Timestamp::max();
  for (const auto& inst : instances) earliest = std::min(earliest, inst.start);
  return earliest;
}

std::optional<Timestamp> Trace::completion() const {
  std::optional<Timestamp> latest;
  for (const auto& inst : instances) {
    if (!inst.end) return std::nullopt;
    latest = latest ? std::max(*latest, *inst.end) : *inst.end;
  }
  return latest;
}

std::size_t EventLog::instance_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.instances.size();
  return n;
}

const Trace* EventLog::find(std::string_view case_id) const {
  auto it = std::lower_bound(traces.begin(), traces.end(), case_id,
                             [](const Trace& t, std::string_view id) { return t.case_id < id; });
  if (it == traces.end() || it->case_id != case_id) return nullptr;
  return &*it;
}

void sort_instances(std::vector<ActivityInstance>& instances) {
  std::stable_sort(instances.begin(), instances.end(),
                   [](const ActivityInstance& a, const ActivityInstance& b) {
                     if (a.start != b.start) return a.start < b.start;
                     const Timestamp ae = a.end.value_or(Timestamp::max());
                     const Timestamp be = b.end.value_or(Timestamp::max());
                     if (ae != be) return ae < be;
                     return a.activity < b.activity;
                   });
}

EventLog make_log(std::vector<ActivityInstance> instances) {
  std::map<std::string, std::vector<ActivityInstance>> by_case;
  EventLog log;
  bool any = false;
  for (auto& inst : instances) {
    log.reference_time = any ? std::max(log.reference_time, inst.start) : inst.start;
    any = true;
    if (inst.end) log.reference_time = std::max(log.reference_time, *inst.end);
    by_case[inst.case_id].push_back(std::move(inst));
  }
  for (auto& [id, list] : by_case) {
    sort_instances(list);
    log.traces.push_back(Trace{id, std::move(list)});
  }
  return log;
}

EventLog parse_log(std::string_view csv_document) {
  const auto rows = csv::parse(csv_document);
  if (rows.empty()) throw ValidationError("empty log: no header row");

  const auto& header = rows.front();
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError("missing required column '" + std::string(name) + "'");
  };
  const std::size_t c_case = column("case_id");
  const std::size_t c_act = column("activity");
  const std::size_t c_start = column("start_time");
  const std::size_t c_end = column("end_time");
  const std::size_t c_res = column("resource");
  const std::size_t needed = std::max({c_case, c_act, c_start, c_end, c_res}) + 1;

  std::vector<ActivityInstance> instances;
  instances.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (row.size() < needed) {
      throw ValidationError(where + ": expected at least " + std::to_string(needed) + " fields");
    }
    ActivityInstance inst;
    inst.case_id = row[c_case];
    inst.activity = row[c_act];
    if (inst.case_id.empty()) throw ValidationError(where + ": empty case_id");
    if (inst.activity.empty()) throw ValidationError(where + ": empty activity");
    try {
      inst.start = parse_timestamp(row[c_start]);
      if (!row[c_end].empty()) inst.end = parse_timestamp(row[c_end]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (inst.end && *inst.end < inst.start) {
      throw ValidationError(where + ": end_time " + row[c_end] + " is before start_time " +
                            row[c_start]);
    }
    if (!row[c_res].empty()) inst.resource = row[c_res];
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) throw ValidationError("empty log: header only");
  return make_log(std::move(instances));
}

std::string write_log(const EventLog& log) {
  std::ostringstream out;
  out << "case_id,activity,start_time,end_time,resource\n";
  for (const auto& trace : log.traces) {
    for (const auto& inst : trace.instances) {
      out << csv::escape(inst.case_id) << ',' << csv::escape(inst.activity) << ','
          << format_timestamp(inst.start) << ',' << (inst.end ? format_timestamp(*inst.end) : "")
          << ',' << csv::escape(inst.resource.value_or("")) << '\n';
    }
  }
  return out.str();
}

EventLog observe_log(const EventLog& full, Timestamp at) {
  EventLog out;
  out.reference_time = at;
  for (const auto& trace : full.traces) {
    Trace kept{trace.case_id, {}};
    for (const auto& inst : trace.instances) {
      if (inst.start > at) continue;
      ActivityInstance copy = inst;
      if (copy.end && *copy.end > at) copy.end.reset();
      copy.enablement.reset();
      kept.instances.push_back(std::move(copy));
    }
    if (kept.instances.empty()) continue;
    sort_instances(kept.instances);
    out.traces.push_back(std::move(kept));
  }
  return out;
}

EventLog truncate_log(const EventLog& full, Timestamp at) {
  // Completion is judged on the full trace: a case between two activities
  // has only finished records in its prefix but is still ongoing.
  std::set<std::string> finished;
  for (const auto& trace : full.traces) {
    const auto done = trace.completion();
    if (done && *done <= at) finished.insert(trace.case_id);
  }
  EventLog observed = observe_log(full, at);
  std::erase_if(observed.traces, [&](const Trace& t) { return finished.contains(t.case_id); });
  return observed;
}

// ---------------------------------------------------------------------------
// Concurrency oracle

ConcurrencyRelation::ConcurrencyRelation(std::set<std::pair<std::string, std::string>> pairs,
                                         double threshold)
    : threshold_(threshold) {
  for (auto [a, b] : pairs) {
    if (a == b) continue;
    if (b < a) std::swap(a, b);
    pairs_.emplace(std::move(a), std::move(b));
  }
}

bool ConcurrencyRelation::concurrent(std::string_view a, std::string_view b) const {
  if (a == b) return false;
  std::pair<std::string, std::string> key{std::string(std::min(a, b)), std::string(std::max(a, b))};
  return pairs_.contains(key);
}

ConcurrencyRelation discover_concurrency(const EventLog& log, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("concurrency threshold must lie in (0, 1]");
  }
  struct Counts {
    std::size_t together = 0;
    std::size_t overlapping = 0;
  };
  std::map<std::pair<std::string, std::string>, Counts> counts;

  for (const auto& trace : log.traces) {
    std::map<std::string, std::vector<const ActivityInstance*>> by_label;
    for (const auto& inst : trace.instances) by_label[inst.activity].push_back(&inst);
    for (auto a = by_label.begin(); a != by_label.end(); ++a) {
      for (auto b = std::next(a); b != by_label.end(); ++b) {
        Counts& c = counts[{a->first, b->first}];
        ++c.together;
        bool overlap = false;
        for (const auto* x : a->second) {
          for (const auto* y : b->second) {
            const Timestamp lo = std::max(x->start, y->start);
            const Timestamp hi = std::min(x->end.value_or(log.reference_time),
                                          y->end.value_or(log.reference_time));
            if (lo < hi) {
              overlap = true;
              break;
            }
          }
          if (overlap) break;
        }
        if (overlap) ++c.overlapping;
      }
    }
  }

  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& [key, c] : counts) {
    if (c.together > 0 &&
        static_cast<double>(c.overlapping) >= threshold * static_cast<double>(c.together)) {
      pairs.insert(key);
    }
  }
  return ConcurrencyRelation(std::move(pairs), threshold);
}

// ---------------------------------------------------------------------------
// Enablement

std::vector<ActivityInstance> compute_enablement(std::span<const ActivityInstance> trace,
                                                 const ConcurrencyRelation& concurrency,
                                                 Timestamp arrival) {
  std::vector<ActivityInstance> out(trace.begin(), trace.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::optional<Timestamp> best;
    for (std::size_t j = 0; j < trace.size(); ++j) {
      if (j == i || !trace[j].end) continue;
      if (*trace[j].end > trace[i].start) continue;
      if (concurrency.concurrent(trace[j].activity, trace[i].activity)) continue;
      if (!best || *trace[j].end > *best) best = *trace[j].end;
    }
    out[i].enablement = best.value_or(arrival);
  }
  return out;
}

Timestamp pending_flow_enablement(std::span<const ActivityInstance> trace,
                                  const ConcurrencyRelation& concurrency,
                                  std::span<const std::string> target_labels, Timestamp arrival) {
  std::optional<Timestamp> best;
  auto consider = [&](const ActivityInstance& inst) {
    if (!inst.end) return;
    if (!best || *inst.end > *best) best = *inst.end;
  };
  if (target_labels.empty()) {
    for (const auto& inst : trace) consider(inst);
  } else {
    for (const auto& target : target_labels) {
      for (const auto& inst : trace) {
        if (!concurrency.concurrent(inst.activity, target)) consider(inst);
      }
    }
  }
  return best.value_or(arrival);
}

}  // namespace bpsim
