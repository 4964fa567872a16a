#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bpsim/time.hpp"

namespace bpsim {

/// One recorded execution of an activity. A missing `end` means the
/// instance was still running at the log's reference time.
struct ActivityInstance {
  std::string case_id;
  std::string activity;
  Timestamp start{};
  std::optional<Timestamp> end;
  std::optional<std::string> resource;
  std::optional<Timestamp> enablement;

  bool ongoing() const { return !end.has_value(); }
  bool operator==(const ActivityInstance&) const = default;
};

struct Trace {
  std::string case_id;
  std::vector<ActivityInstance> instances;  // ascending start, then end, then label

  Timestamp arrival() const;  // earliest start
  /// Latest end, or nullopt while any instance is still open.
  std::optional<Timestamp> completion() const;
  bool operator==(const Trace&) const = default;
};

/// Collection of traces (sorted by case id) plus the observation instant.
/// When produced by parse_log the reference time is the largest timestamp
/// recorded; truncate_log sets it to the cut instant.
struct EventLog {
  std::vector<Trace> traces;
  Timestamp reference_time{};

  std::size_t instance_count() const;
  const Trace* find(std::string_view case_id) const;
  bool operator==(const EventLog&) const = default;
};

/// Orders instances by (start, end, activity); open ends sort last.
void sort_instances(std::vector<ActivityInstance>& instances);

/// Groups instances into traces and computes the reference time.
EventLog make_log(std::vector<ActivityInstance> instances);

/// CSV with header columns case_id, activity, start_time, end_time, resource
/// (any order; extra columns ignored). Empty end_time = ongoing, empty
/// resource = unknown. Throws ValidationError naming the row for malformed
/// timestamps or end < start, and for missing columns or an empty log.
EventLog parse_log(std::string_view csv_document);

/// Canonical CSV (`case_id,activity,start_time,end_time,resource`).
std::string write_log(const EventLog& log);

/// Everything recorded up to `at`, over all cases: instances that started
/// after `at` are dropped and instances spanning `at` lose their end.
/// Reference time becomes `at`.
EventLog observe_log(const EventLog& full, Timestamp at);

/// Keeps what was observable at `at`: instances that started after `at` are
/// dropped, instances spanning `at` lose their end, and only cases with
/// arrival <= at < completion are retained. Reference time becomes `at`.
EventLog truncate_log(const EventLog& full, Timestamp at);

/// Symmetric, irreflexive set of activity pairs that overlap in time within
/// the same case often enough.
class ConcurrencyRelation {
 public:
  ConcurrencyRelation() = default;
  ConcurrencyRelation(std::set<std::pair<std::string, std::string>> pairs, double threshold);

  bool concurrent(std::string_view a, std::string_view b) const;
  const std::set<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
  double threshold() const { return threshold_; }

 private:
  std::set<std::pair<std::string, std::string>> pairs_;  // stored with first < second
  double threshold_ = 0.75;
};

inline constexpr double kDefaultConcurrencyThreshold = 0.75;

/// Two labels are concurrent when, among the cases containing both, the
/// share of cases with at least one overlapping pair of their instances
/// reaches `threshold`. Open ends count as the reference time.
ConcurrencyRelation discover_concurrency(const EventLog& log,
                                         double threshold = kDefaultConcurrencyThreshold);

/// Sets each instance's enablement to the end of its most recent causal
/// predecessor: the latest completed instance that finished no later than
/// it started and whose label is not concurrent with it. Falls back to
/// `arrival`.
std::vector<ActivityInstance> compute_enablement(std::span<const ActivityInstance> trace,
                                                 const ConcurrencyRelation& concurrency,
                                                 Timestamp arrival);

/// Enablement of a token waiting in front of elements labelled
/// `target_labels`: the latest completion whose label is not concurrent with
/// a target, maximised over the targets. With no targets every completion
/// qualifies. Falls back to `arrival`.
Timestamp pending_flow_enablement(std::span<const ActivityInstance> trace,
                                  const ConcurrencyRelation& concurrency,
                                  std::span<const std::string> target_labels, Timestamp arrival);

}  // namespace bpsim
