#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bpsim/event_log.hpp"
#include "bpsim/sim_engine.hpp"
#include "bpsim/state_discovery.hpp"

namespace bpsim {

using LabelSequence = std::vector<std::string>;

/// Ongoing-case difference at the forecast start.
std::size_t ocd(std::size_t simulated_ongoing, std::size_t truth_ongoing);
std::size_t ocd(const SimLog& sim, const EventLog& truth_ongoing);
std::size_t ocd(const ProcessState& state, const EventLog& truth_ongoing);

/// Normalized L1 distance between the n-gram multisets of two logs. Each
/// sequence is padded with n-1 boundary symbols on both sides.
/// Throws ValidationError("undefined distance") when both logs are empty.
double ngd(std::span<const LabelSequence> a, std::span<const LabelSequence> b, std::size_t n = 3);

/// Activities not finished by `start`, ordered by start time, for cases
/// ongoing at `start` or arriving before `horizon`.
std::vector<LabelSequence> forecast_sequences(const SimLog& sim, Timestamp start, Timestamp horizon);
std::vector<LabelSequence> forecast_sequences(const EventLog& full, Timestamp start,
                                              Timestamp horizon);

/// 1-Wasserstein distance between two equal-weight empirical distributions.
/// Throws ValidationError when either side is empty.
double wasserstein1(std::vector<double> a, std::vector<double> b);

/// completion - start in hours for cases ongoing at `start`.
std::vector<double> remaining_hours(const SimLog& sim, Timestamp start);
std::vector<double> remaining_hours(const EventLog& full, Timestamp start);

/// Remaining-cycle-time distance in hours.
double rctd(const SimLog& sim, const EventLog& full, Timestamp start);

/// Number of cases with arrival <= t < completion.
std::size_t wip_at(const EventLog& full, Timestamp t);

/// For each fraction, the earliest event time whose WIP is closest to
/// fraction x max WIP.
std::vector<Timestamp> select_start_points(const EventLog& full, std::span<const double> fractions);

/// Nearest-rank percentile of the cycle times of completed cases.
Duration horizon_from_log(const EventLog& full, double percentile);

}  // namespace bpsim
