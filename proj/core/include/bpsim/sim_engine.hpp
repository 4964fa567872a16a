#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpsim/bps_model.hpp"
#include "bpsim/event_log.hpp"
#include "bpsim/state_discovery.hpp"

namespace bpsim {

enum class DispatchPolicy { Fifo, Lifo };

std::string_view to_string(DispatchPolicy policy);
DispatchPolicy parse_policy(std::string_view text);

struct EngineOptions {
  DispatchPolicy policy = DispatchPolicy::Fifo;
  std::size_t event_budget = 10'000'000;
};

struct CaseRecord {
  std::string id;
  Timestamp arrival{};
  std::optional<Timestamp> completion;
  bool loaded = false;  // in progress when the forecast window opened
  bool operator==(const CaseRecord&) const = default;
};

/// Output of one run: activity instances (with enablement) and per-case
/// arrival/completion, plus the metadata needed to reproduce it.
struct SimLog {
  std::vector<ActivityInstance> instances;  // ordered by (start, case, activity)
  std::vector<CaseRecord> cases;            // ordered by (arrival, id)
  Timestamp origin{};
  std::optional<Timestamp> horizon;
  std::uint64_t seed = 0;
  DispatchPolicy policy = DispatchPolicy::Fifo;
  /// Cases in progress when the forecast window opened.
  std::size_t initial_wip = 0;
  /// For warm-up runs: "target" or "max_period".
  std::string warmup_stop;

  bool operator==(const SimLog&) const = default;

  const CaseRecord* find_case(std::string_view id) const;
  EventLog to_event_log() const;
};

/// CSV in the event-log schema plus `case_arrival` and `enabled_time`.
std::string write_simlog_csv(const SimLog& log);
/// {"seed", "origin", "horizon", "policy", "initial_wip", "cases", "instances", "warmup_stop"}
std::string write_simlog_metadata(const SimLog& log);
/// Reads the CSV written by write_simlog_csv. Metadata fields stay default.
SimLog parse_simlog_csv(std::string_view csv_document);

/// Discrete-event engine for one run. Owns all mutable state; every random
/// draw is keyed by (seed, case, node, occurrence).
class Engine {
 public:
  Engine(const BPSModel& model, std::uint64_t seed, EngineOptions options = {});
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  Timestamp clock() const;
  /// Sets the clock before anything is scheduled.
  void set_clock(Timestamp t);

  /// Arrivals drawn from the model's inter-arrival distribution, the first
  /// one at `base + sample`.
  void start_arrivals(Timestamp base);
  /// Arrivals at the given instants (ascending) instead of sampled ones.
  void schedule_arrivals(std::vector<Timestamp> times);
  /// Stops creating cases after `n` arrivals in total.
  void limit_arrivals(std::size_t n);
  std::optional<Timestamp> next_arrival() const;

  /// Initializes the engine from a discovered state at `state.at` and
  /// queues the first future arrival. Throws ValidationError for tasks or
  /// flows the model does not know.
  void load_state(const ProcessState& state);

  /// Cases that arrive at or after `t` are not tracked (see run_tracked).
  void set_tracking_horizon(Timestamp t);
  /// Marks every currently active case as tracked and as loaded.
  void track_active_cases();

  std::optional<Timestamp> next_event_time() const;
  /// Processes all events at the next instant, then dispatches work.
  /// Returns false when there is nothing left to do.
  bool step();
  /// Steps while the next event time is <= t, then sets the clock to t.
  void run_until(Timestamp t);
  /// Steps until every tracked case has completed and no tracked arrival
  /// is pending.
  void run_tracked();

  std::size_t wip() const;
  std::size_t tracked_active() const;
  std::size_t events_processed() const;

  /// Moves every timestamp held by the engine by `delta`.
  void shift(Duration delta);

  /// True per-case state at the current clock.
  ProcessState snapshot() const;

  /// Instances and case records of tracked cases.
  SimLog log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Simulation from an empty state. With `max_cases`, exactly that many
/// cases arrive and the run ends when they finish. With `until`, cases
/// arriving before it are generated and reported.
struct SimulateStop {
  std::optional<std::size_t> max_cases;
  std::optional<Timestamp> until;
};

SimLog simulate(const BPSModel& model, Timestamp start, SimulateStop stop, std::uint64_t seed,
                EngineOptions options = {});

/// Empty-state simulation with the given arrival instants.
SimLog simulate_arrivals(const BPSModel& model, std::vector<Timestamp> arrivals,
                         std::uint64_t seed, EngineOptions options = {});

/// Loads `state`, then runs until every loaded case and every case arriving
/// before `horizon` has completed. Later arrivals still compete for
/// resources but are left out of the result.
SimLog run_short_term(const BPSModel& model, const ProcessState& state, Timestamp horizon,
                      std::uint64_t seed, EngineOptions options = {});

/// Baseline: simulate from empty starting at start_time - (horizon - start_time)
/// until the number of active cases equals `target_wip` or the maximum
/// warm-up period elapses, relabel that instant as `start_time`, and
/// continue as a short-term run.
SimLog warmup_short_term(const BPSModel& model, std::size_t target_wip, Timestamp start_time,
                         Timestamp horizon, std::uint64_t seed, EngineOptions options = {});

}  // namespace bpsim
