#include "bpsim/state_discovery.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace bpsim {

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::Deviating: return "deviating";
    case DiagnosticKind::Backoff: return "backoff";
    case DiagnosticKind::Ambiguous: return "ambiguous";
    case DiagnosticKind::Repaired: return "repaired";
    case DiagnosticKind::DroppedOngoing: return "dropped_ongoing";
    case DiagnosticKind::UnknownActivity: return "unknown_activity";
  }
  return "?";
}

const CaseState* ProcessState::find(std::string_view case_id) const {
  auto it = std::lower_bound(cases.begin(), cases.end(), case_id,
                             [](const CaseState& c, std::string_view id) { return c.id < id; });
  if (it == cases.end() || it->id != case_id) return nullptr;
  return &*it;
}

std::vector<Symbol> lifecycle_prefix(const MarkingIndex& index,
                                     std::span<const ActivityInstance> trace) {
  struct Step {
    Timestamp at;
    int rank;
    std::size_t instance;
    Symbol symbol;
  };
  std::vector<Step> steps;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& inst = trace[i];
    const auto s = index.symbol(inst.activity, Phase::Start);
    if (!s) continue;
    steps.push_back({inst.start, 1, i, *s});
    if (inst.end) {
      steps.push_back({*inst.end, *inst.end == inst.start ? 2 : 0, i,
                       *index.symbol(inst.activity, Phase::End)});
    }
  }
  std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) {
    return std::tie(a.at, a.rank, a.instance) < std::tie(b.at, b.rank, b.instance);
  });
  std::vector<Symbol> out{kCaseStart};
  for (const auto& s : steps) out.push_back(s.symbol);
  return out;
}

namespace {

std::vector<std::string> labels_of(const WFGraph& graph, const std::vector<NodeIndex>& nodes) {
  std::vector<std::string> out;
  for (NodeIndex n : nodes) out.push_back(graph.node(n).label);
  return out;
}

// Fewest tokens, then smallest flow ids, then smallest task labels.
bool preferred(const WFGraph& graph, const BaseMarking& a, const BaseMarking& b) {
  if (a.tokens() != b.tokens()) return a.tokens() < b.tokens();
  if (a.flows != b.flows) return a.flows < b.flows;  // indices follow id order
  return labels_of(graph, a.ongoing) < labels_of(graph, b.ongoing);
}

// Latest-started open instance for each label.
std::vector<const ActivityInstance*> open_instances(std::span<const ActivityInstance> trace) {
  std::vector<const ActivityInstance*> out;
  for (const auto& inst : trace) {
    if (!inst.ongoing()) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const ActivityInstance* p) { return p->activity == inst.activity; });
    if (it == out.end()) {
      out.push_back(&inst);
    } else if ((*it)->start <= inst.start) {
      *it = &inst;
    }
  }
  return out;
}

}  // namespace

MarkingEstimate compute_marking(const MarkingIndex& index, std::span<const ActivityInstance> trace) {
  const WFGraph& graph = index.graph();
  const auto prefix = lifecycle_prefix(index, trace);
  const auto match = index.lookup(prefix);

  MarkingEstimate est;
  if (!match.candidates.empty()) {
    est.candidates = match.candidates.size();
    est.backoff = match.key_length < std::min(index.m(), prefix.size());
    est.marking = *std::min_element(
        match.candidates.begin(), match.candidates.end(),
        [&](const BaseMarking& a, const BaseMarking& b) { return preferred(graph, a, b); });
    return est;
  }

  est.deviating = true;
  for (const auto* inst : open_instances(trace)) {
    if (auto t = graph.find_task(inst->activity)) est.marking.ongoing.push_back(*t);
  }
  std::sort(est.marking.ongoing.begin(), est.marking.ongoing.end());
  if (est.marking.ongoing.empty()) est.marking = index.initial();
  return est;
}

RepairOutcome repair_marking(const BaseMarking& candidate, std::span<const ActivityInstance> trace,
                             const WFGraph& graph) {
  std::set<std::string> open;
  for (const auto& inst : trace) {
    if (inst.ongoing()) open.insert(inst.activity);
  }

  RepairOutcome out;
  out.marking.flows = candidate.flows;
  for (NodeIndex t : candidate.ongoing) {
    const Node& task = graph.node(t);
    if (open.contains(task.label)) {
      out.marking.ongoing.push_back(t);
    } else {
      out.marking.flows.push_back(task.incoming.front());
      out.reopened.push_back(task.label);
    }
  }
  std::sort(out.marking.flows.begin(), out.marking.flows.end());
  out.marking.flows.erase(std::unique(out.marking.flows.begin(), out.marking.flows.end()),
                          out.marking.flows.end());

  for (const auto& label : open) {
    auto t = graph.find_task(label);
    if (!t) continue;
    if (!std::binary_search(out.marking.ongoing.begin(), out.marking.ongoing.end(), *t)) {
      out.dropped.push_back(label);
    }
  }
  return out;
}

std::vector<std::string> downstream_labels(const WFGraph& graph, FlowIndex flow) {
  std::vector<std::string> out;
  std::vector<NodeIndex> visited;
  std::vector<FlowIndex> pending{flow};
  while (!pending.empty()) {
    const FlowIndex f = pending.back();
    pending.pop_back();
    const NodeIndex n = graph.flow(f).target;
    if (std::find(visited.begin(), visited.end(), n) != visited.end()) continue;
    visited.push_back(n);
    const Node& node = graph.node(n);
    if (node.type == NodeType::Task || node.type == NodeType::Event) {
      out.push_back(node.label.empty() ? node.id : node.label);
    } else if (node.type == NodeType::And || node.type == NodeType::Xor) {
      for (FlowIndex o : node.outgoing) pending.push_back(o);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

DiscoveryResult discover_state(const EventLog& log, const MarkingIndex& index,
                               const DiscoveryConfig& config) {
  const WFGraph& graph = index.graph();
  const ConcurrencyRelation concurrency =
      config.concurrency ? *config.concurrency
                         : discover_concurrency(log, config.concurrency_threshold);

  DiscoveryResult result;
  result.state.at = log.reference_time;
  auto diagnose = [&](const std::string& case_id, DiagnosticKind kind, std::string detail) {
    result.diagnostics.push_back({case_id, kind, std::move(detail)});
  };

  for (const Trace& trace : log.traces) {
    if (trace.instances.empty()) continue;
    CaseState cs;
    cs.id = trace.case_id;
    cs.arrival = trace.arrival();

    std::vector<ActivityInstance> known;
    std::set<std::string> unknown;
    for (const auto& inst : trace.instances) {
      if (graph.find_task(inst.activity)) {
        known.push_back(inst);
      } else {
        unknown.insert(inst.activity);
      }
    }
    if (!unknown.empty()) {
      std::string detail = "skipped labels not in the model:";
      for (const auto& u : unknown) detail += " '" + u + "'";
      diagnose(cs.id, DiagnosticKind::UnknownActivity, std::move(detail));
    }
    if (known.empty()) {
      for (FlowIndex f : index.initial().flows) cs.flows.push_back({graph.flow(f).id, cs.arrival});
      result.state.cases.push_back(std::move(cs));
      continue;
    }

    const MarkingEstimate est = compute_marking(index, known);
    if (est.deviating) {
      diagnose(cs.id, DiagnosticKind::Deviating, "prefix matches no path of the model");
    } else {
      if (est.backoff) diagnose(cs.id, DiagnosticKind::Backoff, "matched a shorter suffix only");
      if (est.candidates > 1) {
        diagnose(cs.id, DiagnosticKind::Ambiguous,
                 std::to_string(est.candidates) + " candidate markings");
      }
    }
    const RepairOutcome repaired = repair_marking(est.marking, known, graph);
    for (const auto& label : repaired.reopened) {
      diagnose(cs.id, DiagnosticKind::Repaired,
               "'" + label + "' has no open record; token placed on its input");
    }
    for (const auto& label : repaired.dropped) {
      diagnose(cs.id, DiagnosticKind::DroppedOngoing,
               "open record of '" + label + "' is not supported by the marking");
    }

    const auto enabled = compute_enablement(known, concurrency, cs.arrival);
    for (FlowIndex f : repaired.marking.flows) {
      const auto targets = downstream_labels(graph, f);
      cs.flows.push_back(
          {graph.flow(f).id, pending_flow_enablement(known, concurrency, targets, cs.arrival)});
    }
    const auto open = open_instances(known);
    for (NodeIndex t : repaired.marking.ongoing) {
      const std::string& label = graph.node(t).label;
      auto it = std::find_if(open.begin(), open.end(),
                             [&](const ActivityInstance* p) { return p->activity == label; });
      const auto* inst = *it;  // repair guarantees an open record
      OngoingActivity act;
      act.activity = label;
      act.started = inst->start;
      act.enabled = *enabled[static_cast<std::size_t>(inst - known.data())].enablement;
      if (inst->resource) act.resources.push_back(*inst->resource);
      cs.ongoing.push_back(std::move(act));
    }
    std::sort(cs.flows.begin(), cs.flows.end(),
              [](const FlowToken& a, const FlowToken& b) { return a.flow < b.flow; });
    std::sort(cs.ongoing.begin(), cs.ongoing.end(),
              [](const OngoingActivity& a, const OngoingActivity& b) { return a.activity < b.activity; });
    result.state.cases.push_back(std::move(cs));
  }
  std::sort(result.state.cases.begin(), result.state.cases.end(),
            [](const CaseState& a, const CaseState& b) { return a.id < b.id; });
  return result;
}

DiscoveryResult discover_state(const EventLog& log, const WFGraph& graph,
                               const DiscoveryConfig& config) {
  const MarkingIndex index(graph, config.m, config.marking_budget);
  return discover_state(log, index, config);
}

}  // namespace bpsim
