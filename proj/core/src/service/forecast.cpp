#include "bpsim/service/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bpsim/errors.hpp"

namespace bpsim::service {
namespace {

using json = nlohmann::json;

constexpr std::size_t kMaxSeriesPoints = 10'000;

bool in_scope(const CaseRecord& c, Timestamp t, Timestamp start) {
  if (c.completion && t > *c.completion) return false;
  return c.loaded || (t > start && c.arrival <= t);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Forecast summarize(const std::vector<SimLog>& runs, const Scenario& scenario, Timestamp start,
                   Timestamp horizon, std::size_t ongoing) {
  Forecast f;
  f.scenario_id = scenario.id;
  f.start = start;
  f.horizon = horizon;
  f.runs = runs.size();
  f.seed = scenario.seed;
  f.ongoing = ongoing;
  if (runs.empty()) return f;
  const double n_runs = static_cast<double>(runs.size());

  std::map<std::string, std::vector<double>> remaining;
  Timestamp end = horizon;
  double completed = 0.0;
  for (const auto& run : runs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : run.cases) {
      if (!c.completion) continue;
      end = std::max(end, *c.completion);
      if (*c.completion <= horizon) completed += 1.0;
      if (!c.loaded) continue;
      const double h = to_hours(*c.completion - start);
      remaining[c.id].push_back(h);
      sum += h;
      ++n;
    }
    if (n > 0) f.per_run_mean_remaining_hours.push_back(sum / static_cast<double>(n));
  }
  f.completed_by_horizon = completed / n_runs;

  double total = 0.0;
  for (const auto& [id, hs] : remaining) {
    const auto [lo, hi] = std::minmax_element(hs.begin(), hs.end());
    double mean = 0.0;
    for (double h : hs) mean += h;
    mean /= static_cast<double>(hs.size());
    f.cases.push_back({id, mean, *lo, *hi});
    total += mean;
  }
  if (!f.cases.empty()) f.mean_remaining_hours = total / static_cast<double>(f.cases.size());

  const auto step = scenario.wip_step;
  const auto span = end - start;
  const auto steps = static_cast<std::size_t>((span + step - Duration{1}) / step);
  if (steps + 1 > kMaxSeriesPoints) {
    throw ValidationError("WIP series would exceed " + std::to_string(kMaxSeriesPoints) +
                          " points; use a larger wip_step_minutes");
  }
  for (std::size_t k = 0; k <= steps; ++k) {
    const Timestamp t = start + step * static_cast<long>(k);
    WipPoint p{t, 0.0, std::numeric_limits<std::size_t>::max(), 0};
    for (const auto& run : runs) {
      const auto w = static_cast<std::size_t>(std::count_if(
          run.cases.begin(), run.cases.end(), [&](const CaseRecord& c) { return in_scope(c, t, start); }));
      p.mean += static_cast<double>(w);
      p.min = std::min(p.min, w);
      p.max = std::max(p.max, w);
    }
    p.mean /= n_runs;
    f.wip.push_back(p);
  }

  const double width = to_hours(step);
  std::vector<double> bins(std::max<std::size_t>(steps, 1), 0.0);
  for (const auto& run : runs) {
    for (const auto& c : run.cases) {
      if (!c.completion) continue;
      const double h = std::max(0.0, to_hours(*c.completion - start));
      auto b = static_cast<std::size_t>(std::floor(h / width));
      if (b >= bins.size()) bins.resize(b + 1, 0.0);
      bins[b] += 1.0;
    }
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    f.completion_histogram.push_back(
        {width * static_cast<double>(b), width * static_cast<double>(b + 1), bins[b] / n_runs});
  }
  return f;
}

Forecast run_forecast(const BPSModel& base, const ProcessState& state, const Scenario& scenario) {
  const BPSModel model = apply_scenario(base, scenario);
  const Timestamp horizon = scenario.horizon_for(state.at);
  if (horizon < state.at) throw ValidationError("horizon lies before the state's time");
  EngineOptions options;
  options.policy = scenario.policy;
  std::vector<SimLog> runs;
  for (std::size_t r = 0; r < scenario.runs; ++r) {
    runs.push_back(run_short_term(model, state, horizon, scenario.seed + r, options));
  }
  return summarize(runs, scenario, state.at, horizon, state.cases.size());
}

json forecast_json(const Forecast& f) {
  json cases = json::array();
  for (const auto& c : f.cases) {
    cases.push_back({{"case_id", c.case_id},
                     {"mean_remaining_hours", c.mean_hours},
                     {"min_remaining_hours", c.min_hours},
                     {"max_remaining_hours", c.max_hours}});
  }
  json wip = json::array();
  for (const auto& p : f.wip) {
    wip.push_back({{"at", format_timestamp(p.at)}, {"mean", p.mean}, {"min", p.min}, {"max", p.max}});
  }
  json hist = json::array();
  for (const auto& b : f.completion_histogram) {
    hist.push_back({{"from_hours", b.from_hours}, {"to_hours", b.to_hours}, {"count", b.count}});
  }
  json spread = nullptr;
  if (!f.per_run_mean_remaining_hours.empty()) {
    const auto [lo, hi] = std::minmax_element(f.per_run_mean_remaining_hours.begin(),
                                              f.per_run_mean_remaining_hours.end());
    spread = {{"min", *lo}, {"max", *hi}};
  }
  return {{"scenario_id", f.scenario_id},
          {"start", format_timestamp(f.start)},
          {"horizon", format_timestamp(f.horizon)},
          {"runs", f.runs},
          {"seed", f.seed},
          {"ongoing", f.ongoing},
          {"mean_remaining_hours", optional_number(f.mean_remaining_hours)},
          {"per_run_mean_remaining_hours", f.per_run_mean_remaining_hours},
          {"mean_remaining_spread", std::move(spread)},
          {"completed_by_horizon", f.completed_by_horizon},
          {"cases", std::move(cases)},
          {"wip", std::move(wip)},
          {"completion_histogram", std::move(hist)}};
}

json compare_json(const Forecast& a, const Forecast& b) {
  json deltas{{"completed_by_horizon", b.completed_by_horizon - a.completed_by_horizon}};
  deltas["mean_remaining_hours"] =
      a.mean_remaining_hours && b.mean_remaining_hours
          ? json(*b.mean_remaining_hours - *a.mean_remaining_hours)
          : json(nullptr);

  json per_case = json::array();
  for (const auto& ca : a.cases) {
    auto it = std::find_if(b.cases.begin(), b.cases.end(),
                           [&](const CaseForecast& cb) { return cb.case_id == ca.case_id; });
    if (it == b.cases.end()) continue;
    per_case.push_back({{"case_id", ca.case_id}, {"mean_remaining_hours", it->mean_hours - ca.mean_hours}});
  }
  deltas["cases"] = std::move(per_case);

  // Series are aligned by step index; the shorter one is padded with zeros.
  json wip = json::array();
  const std::size_t n = std::max(a.wip.size(), b.wip.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double va = k < a.wip.size() ? a.wip[k].mean : 0.0;
    const double vb = k < b.wip.size() ? b.wip[k].mean : 0.0;
    const Timestamp at = k < a.wip.size() ? a.wip[k].at : b.wip[k].at;
    wip.push_back({{"at", format_timestamp(at)}, {"mean", vb - va}});
  }
  deltas["wip"] = std::move(wip);
  return {{"a", forecast_json(a)}, {"b", forecast_json(b)}, {"deltas", std::move(deltas)}};
}

}  // namespace bpsim::service
