#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bpsim/event_log.hpp"
#include "bpsim/marking_index.hpp"
#include "bpsim/process_model.hpp"
#include "bpsim/time.hpp"

namespace bpsim {

struct FlowToken {
  std::string flow;  // flow id
  Timestamp enabled{};
  bool operator==(const FlowToken&) const = default;
};

struct OngoingActivity {
  std::string activity;  // task label
  Timestamp enabled{};
  Timestamp started{};
  std::vector<std::string> resources;
  bool operator==(const OngoingActivity&) const = default;
};

/// Control-flow and resource state of one case at the observation instant.
struct CaseState {
  std::string id;
  Timestamp arrival{};
  std::vector<FlowToken> flows;          // sorted by flow id
  std::vector<OngoingActivity> ongoing;  // sorted by label
  bool operator==(const CaseState&) const = default;
};

/// Snapshot of every ongoing case at `at`.
struct ProcessState {
  Timestamp at{};
  std::vector<CaseState> cases;  // sorted by id
  bool operator==(const ProcessState&) const = default;

  const CaseState* find(std::string_view case_id) const;
};

/// {"at": ts, "cases": [{"id", "arrival", "flows": [{"flow", "enabled"}],
///  "ongoing": [{"activity", "enabled", "started", "resources": [...]}]}]}
std::string write_state(const ProcessState& state, int indent = 2);
/// Throws ValidationError on malformed documents.
ProcessState parse_state(std::string_view json_document);
/// Stable 64-bit digest of the canonical JSON form, as 16 hex digits.
std::string state_hash(const ProcessState& state);

enum class DiagnosticKind {
  Deviating,       // no gram matched; fallback marking used
  Backoff,         // matched only a shorter suffix of the prefix
  Ambiguous,       // several candidate markings; tie-break applied
  Repaired,        // an ongoing task without an open record became its input flow
  DroppedOngoing,  // an open record not supported by the marking was ignored
  UnknownActivity  // labels absent from the model were skipped
};

std::string_view to_string(DiagnosticKind kind);

struct Diagnostic {
  std::string case_id;
  DiagnosticKind kind;
  std::string detail;
  bool operator==(const Diagnostic&) const = default;
};

struct DiscoveryConfig {
  std::size_t m = 5;
  double concurrency_threshold = kDefaultConcurrencyThreshold;
  std::size_t marking_budget = 100'000;
  /// Used instead of discovering the relation from the log being processed.
  std::optional<ConcurrencyRelation> concurrency;
};

struct DiscoveryResult {
  ProcessState state;
  std::vector<Diagnostic> diagnostics;
};

/// Lifecycle symbols of a trace prefix, preceded by the case-start marker.
/// Instances with labels unknown to the model are skipped. At equal
/// timestamps completions come before starts, except that an instance's own
/// zero-length completion follows its start.
std::vector<Symbol> lifecycle_prefix(const MarkingIndex& index,
                                     std::span<const ActivityInstance> trace);

struct MarkingEstimate {
  BaseMarking marking;
  bool deviating = false;
  bool backoff = false;
  std::size_t candidates = 0;
};

/// Queries the index with the last m symbols, backing off to shorter
/// suffixes. Among several candidates the one with the fewest tokens wins,
/// then the lexicographically smallest flow ids, then task labels. On a
/// total miss the open tasks of the trace (known to the model) are taken as
/// ongoing; without any, the initial marking is used.
MarkingEstimate compute_marking(const MarkingIndex& index, std::span<const ActivityInstance> trace);

struct RepairOutcome {
  BaseMarking marking;
  std::vector<std::string> reopened;  // ongoing tasks replaced by their input flow
  std::vector<std::string> dropped;   // open records not in the marking
};

/// Reconciles a candidate with the recorded open instances: ongoing tasks
/// without an open record are replaced by their input flow, and open records
/// of tasks the marking does not run are reported as dropped.
RepairOutcome repair_marking(const BaseMarking& candidate, std::span<const ActivityInstance> trace,
                             const WFGraph& graph);

/// Labels of the tasks and events a token on `flow` can reach through
/// gateways only.
std::vector<std::string> downstream_labels(const WFGraph& graph, FlowIndex flow);

DiscoveryResult discover_state(const EventLog& log, const MarkingIndex& index,
                               const DiscoveryConfig& config = {});
DiscoveryResult discover_state(const EventLog& log, const WFGraph& graph,
                               const DiscoveryConfig& config = {});

}  // namespace bpsim
