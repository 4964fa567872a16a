#include "bpsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "bpsim/errors.hpp"

namespace bpsim {

std::size_t ocd(std::size_t simulated_ongoing, std::size_t truth_ongoing) {
  return simulated_ongoing > truth_ongoing ? simulated_ongoing - truth_ongoing
                                           : truth_ongoing - simulated_ongoing;
}

std::size_t ocd(const SimLog& sim, const EventLog& truth_ongoing) {
  return ocd(sim.initial_wip, truth_ongoing.traces.size());
}

std::size_t ocd(const ProcessState& state, const EventLog& truth_ongoing) {
  return ocd(state.cases.size(), truth_ongoing.traces.size());
}

double ngd(std::span<const LabelSequence> a, std::span<const LabelSequence> b, std::size_t n) {
  if (n == 0) throw ValidationError("n-gram size must be at least 1");
  if (a.empty() && b.empty()) throw ValidationError("undefined distance");

  // Labels become positive ids; 0 is the boundary symbol.
  std::map<std::string, int> ids;
  using Gram = std::vector<int>;
  std::map<Gram, std::pair<long, long>> counts;
  auto add = [&](std::span<const LabelSequence> log, bool left) {
    for (const auto& seq : log) {
      Gram padded(n - 1, 0);
      for (const auto& label : seq) {
        padded.push_back(ids.emplace(label, static_cast<int>(ids.size()) + 1).first->second);
      }
      padded.insert(padded.end(), n - 1, 0);
      for (std::size_t i = 0; i + n <= padded.size(); ++i) {
        auto& c = counts[Gram(padded.begin() + static_cast<std::ptrdiff_t>(i),
                              padded.begin() + static_cast<std::ptrdiff_t>(i + n))];
        ++(left ? c.first : c.second);
      }
    }
  };
  add(a, true);
  add(b, false);

  long diff = 0;
  long total = 0;
  for (const auto& [gram, c] : counts) {
    diff += std::abs(c.first - c.second);
    total += c.first + c.second;
  }
  // Empty sequences with n = 1 yield no grams at all.
  if (total == 0) return 0.0;
  return static_cast<double>(diff) / static_cast<double>(total);
}

namespace {

bool ongoing_at(Timestamp arrival, std::optional<Timestamp> completion, Timestamp t) {
  return arrival <= t && (!completion || *completion > t);
}

LabelSequence remaining_labels(std::vector<const ActivityInstance*> insts, Timestamp start) {
  std::erase_if(insts, [&](const ActivityInstance* i) { return i->end && *i->end <= start; });
  std::stable_sort(insts.begin(), insts.end(), [](const auto* x, const auto* y) {
    return std::tie(x->start, x->activity) < std::tie(y->start, y->activity);
  });
  LabelSequence out;
  for (const auto* i : insts) out.push_back(i->activity);
  return out;
}

}  // namespace

std::vector<LabelSequence> forecast_sequences(const SimLog& sim, Timestamp start,
                                              Timestamp horizon) {
  std::map<std::string, std::vector<const ActivityInstance*>> by_case;
  for (const auto& inst : sim.instances) by_case[inst.case_id].push_back(&inst);
  std::vector<LabelSequence> out;
  for (const auto& c : sim.cases) {
    if (!c.loaded && !(c.arrival >= start && c.arrival < horizon)) continue;
    out.push_back(remaining_labels(by_case[c.id], start));
  }
  return out;
}

std::vector<LabelSequence> forecast_sequences(const EventLog& full, Timestamp start,
                                              Timestamp horizon) {
  std::vector<LabelSequence> out;
  for (const auto& trace : full.traces) {
    if (trace.instances.empty()) continue;
    const Timestamp arrival = trace.arrival();
    if (!ongoing_at(arrival, trace.completion(), start) && !(arrival > start && arrival < horizon)) {
      continue;
    }
    std::vector<const ActivityInstance*> insts;
    for (const auto& inst : trace.instances) insts.push_back(&inst);
    out.push_back(remaining_labels(std::move(insts), start));
  }
  return out;
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw ValidationError("remaining-time distance needs ongoing cases on both sides");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Integrate |Qa(u) - Qb(u)| over u in [0,1]. Quantile steps sit at i/n and
  // j/m, compared exactly on the common denominator n*m.
  const auto n = a.size();
  const auto m = b.size();
  const double denom = static_cast<double>(n) * static_cast<double>(m);
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t u = 0;
  double acc = 0.0;
  while (i < n && j < m) {
    const std::size_t next_a = (i + 1) * m;
    const std::size_t next_b = (j + 1) * n;
    const std::size_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return acc / denom;
}

std::vector<double> remaining_hours(const SimLog& sim, Timestamp start) {
  std::vector<double> out;
  for (const auto& c : sim.cases) {
    if (!c.loaded) continue;
    if (!c.completion) throw ValidationError("case '" + c.id + "' has no completion time");
    out.push_back(to_hours(*c.completion - start));
  }
  return out;
}

std::vector<double> remaining_hours(const EventLog& full, Timestamp start) {
  std::vector<double> out;
  for (const auto& trace : full.traces) {
    if (trace.instances.empty()) continue;
    const auto done = trace.completion();
    if (!ongoing_at(trace.arrival(), done, start)) continue;
    if (!done) throw ValidationError("case '" + trace.case_id + "' has no completion time");
    out.push_back(to_hours(*done - start));
  }
  return out;
}

double rctd(const SimLog& sim, const EventLog& full, Timestamp start) {
  return wasserstein1(remaining_hours(sim, start), remaining_hours(full, start));
}

std::size_t wip_at(const EventLog& full, Timestamp t) {
  std::size_t n = 0;
  for (const auto& trace : full.traces) {
    if (!trace.instances.empty() && ongoing_at(trace.arrival(), trace.completion(), t)) ++n;
  }
  return n;
}

std::vector<Timestamp> select_start_points(const EventLog& full,
                                           std::span<const double> fractions) {
  std::map<Timestamp, long> delta;
  for (const auto& trace : full.traces) {
    if (trace.instances.empty()) continue;
    ++delta[trace.arrival()];
    if (const auto done = trace.completion()) --delta[*done];
  }
  if (delta.empty()) throw ValidationError("empty log: no cases to select start points from");

  std::vector<std::pair<Timestamp, long>> sweep;
  long wip = 0;
  long peak = 0;
  for (const auto& [t, d] : delta) {
    wip += d;
    sweep.emplace_back(t, wip);
    peak = std::max(peak, wip);
  }

  std::vector<Timestamp> out;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("start-point fractions must lie in (0, 1]");
    const double target = f * static_cast<double>(peak);
    auto best = sweep.front();
    for (const auto& point : sweep) {
      if (std::abs(static_cast<double>(point.second) - target) <
          std::abs(static_cast<double>(best.second) - target)) {
        best = point;
      }
    }
    out.push_back(best.first);
  }
  return out;
}

Duration horizon_from_log(const EventLog& full, double percentile) {
  if (!(percentile > 0.0 && percentile <= 1.0)) {
    throw ValidationError("percentile must lie in (0, 1]");
  }
  std::vector<Duration> cycle;
  for (const auto& trace : full.traces) {
    if (trace.instances.empty()) continue;
    if (const auto done = trace.completion()) cycle.push_back(*done - trace.arrival());
  }
  if (cycle.empty()) throw ValidationError("no completed cases to derive a horizon from");
  std::sort(cycle.begin(), cycle.end());
  const double n = static_cast<double>(cycle.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, cycle.size());
  return cycle[rank - 1];
}

}  // namespace bpsim
