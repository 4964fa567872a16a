#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpsim/bps_model.hpp"
#include "bpsim/service/scenario.hpp"
#include "bpsim/sim_engine.hpp"
#include "bpsim/state_discovery.hpp"

namespace bpsim::service {

/// Remaining time (completion - start) of one ongoing case across runs.
struct CaseForecast {
  std::string case_id;
  double mean_hours = 0.0;
  double min_hours = 0.0;
  double max_hours = 0.0;
};

/// Cases in scope at one instant. At the start instant only cases already
/// in progress count; afterwards a case counts on [arrival, completion].
struct WipPoint {
  Timestamp at{};
  double mean = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
};

/// Completions per run (mean over runs) in [from, to) hours after start.
struct HistogramBin {
  double from_hours = 0.0;
  double to_hours = 0.0;
  double count = 0.0;
};

struct Forecast {
  std::string scenario_id;
  Timestamp start{};
  Timestamp horizon{};
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::size_t ongoing = 0;
  std::vector<CaseForecast> cases;  // ongoing cases, by id
  /// Mean over ongoing cases of their mean remaining time; absent when
  /// nothing is ongoing.
  std::optional<double> mean_remaining_hours;
  std::vector<double> per_run_mean_remaining_hours;
  std::vector<WipPoint> wip;
  std::vector<HistogramBin> completion_histogram;
  /// Mean number of cases in scope completed by the horizon.
  double completed_by_horizon = 0.0;
};

/// Runs the scenario `runs` times from `state` with seeds seed + r.
Forecast run_forecast(const BPSModel& base, const ProcessState& state, const Scenario& scenario);
/// Summarizes finished runs; exposed for testing.
Forecast summarize(const std::vector<SimLog>& runs, const Scenario& scenario, Timestamp start,
                   Timestamp horizon, std::size_t ongoing);

nlohmann::json forecast_json(const Forecast& f);

/// b - a for the headline numbers, per common case and per WIP step.
nlohmann::json compare_json(const Forecast& a, const Forecast& b);

}  // namespace bpsim::service
