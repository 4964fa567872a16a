#include "bpsim/process_model.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_set>

#include "bpsim/errors.hpp"

namespace bpsim {

std::string_view to_string(NodeType type) {
  switch (type) {
    case NodeType::Start: return "start";
    case NodeType::Sink: return "sink";
    case NodeType::Task: return "task";
    case NodeType::Event: return "event";
    case NodeType::And: return "AND";
    case NodeType::Xor: return "XOR";
  }
  return "?";
}

WFGraph::WFGraph(const GraphSpec& spec) {
  std::vector<GraphSpec::NodeDecl> node_decls = spec.nodes;
  std::sort(node_decls.begin(), node_decls.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<GraphSpec::FlowDecl> flow_decls = spec.flows;
  std::sort(flow_decls.begin(), flow_decls.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  bool have_start = false;
  bool have_sink = false;
  for (const auto& decl : node_decls) {
    if (decl.id.empty()) throw ValidationError("node with empty id");
    const auto index = static_cast<NodeIndex>(nodes_.size());
    if (!node_by_id_.emplace(decl.id, index).second) {
      throw ValidationError("duplicate node id '" + decl.id + "'");
    }
    Node node;
    node.id = decl.id;
    node.label = decl.label.empty() ? decl.id : decl.label;
    node.type = decl.type;
    if (decl.type == NodeType::Start) {
      if (have_start) throw ValidationError("multiple start events ('" + decl.id + "')");
      have_start = true;
      start_ = index;
    } else if (decl.type == NodeType::Sink) {
      if (have_sink) throw ValidationError("multiple end events ('" + decl.id + "')");
      have_sink = true;
      sink_ = index;
    } else if (decl.type == NodeType::Task) {
      if (!task_by_label_.emplace(node.label, index).second) {
        throw ValidationError("duplicate task label '" + node.label + "'");
      }
    }
    nodes_.push_back(std::move(node));
  }
  if (!have_start) throw ValidationError("model has no start event");
  if (!have_sink) throw ValidationError("model has no end event");

  for (const auto& decl : flow_decls) {
    if (decl.id.empty()) throw ValidationError("sequence flow with empty id");
    const auto index = static_cast<FlowIndex>(flows_.size());
    if (flow_by_id_.contains(decl.id) || node_by_id_.contains(decl.id)) {
      throw ValidationError("duplicate element id '" + decl.id + "'");
    }
    flow_by_id_.emplace(decl.id, index);
    auto src = node_by_id_.find(decl.source);
    auto dst = node_by_id_.find(decl.target);
    if (src == node_by_id_.end()) {
      throw ValidationError("flow '" + decl.id + "' references unknown source '" + decl.source +
                            "'");
    }
    if (dst == node_by_id_.end()) {
      throw ValidationError("flow '" + decl.id + "' references unknown target '" + decl.target +
                            "'");
    }
    if (dst->second == start_) {
      throw ValidationError("flow '" + decl.id + "' enters the start event");
    }
    if (src->second == sink_) {
      throw ValidationError("flow '" + decl.id + "' leaves the end event");
    }
    flows_.push_back(Flow{decl.id, src->second, dst->second});
    nodes_[src->second].outgoing.push_back(index);
    nodes_[dst->second].incoming.push_back(index);
  }

  for (const auto& node : nodes_) {
    const auto in = node.incoming.size();
    const auto out = node.outgoing.size();
    switch (node.type) {
      case NodeType::Start:
        if (out != 1) {
          throw ValidationError("start event '" + node.id + "' must have exactly one outgoing flow");
        }
        break;
      case NodeType::Sink:
        if (in != 1) {
          throw ValidationError("end event '" + node.id +
                                "' must have exactly one incoming flow (use an explicit gateway)");
        }
        break;
      case NodeType::Task:
      case NodeType::Event:
        if (in != 1 || out != 1) {
          throw ValidationError(std::string(to_string(node.type)) + " '" + node.id +
                                "' must have exactly one incoming and one outgoing flow "
                                "(implicit gateways are not supported)");
        }
        break;
      case NodeType::And:
      case NodeType::Xor:
        if (in == 0 || out == 0) {
          throw ValidationError("gateway '" + node.id + "' needs incoming and outgoing flows");
        }
        break;
    }
  }
}

std::optional<NodeIndex> WFGraph::find_node(std::string_view id) const {
  auto it = node_by_id_.find(std::string(id));
  if (it == node_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<FlowIndex> WFGraph::find_flow(std::string_view id) const {
  auto it = flow_by_id_.find(std::string(id));
  if (it == flow_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeIndex> WFGraph::find_task(std::string_view label) const {
  auto it = task_by_label_.find(std::string(label));
  if (it == task_by_label_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeIndex> WFGraph::tasks() const {
  std::vector<NodeIndex> out;
  for (NodeIndex n = 0; n < nodes_.size(); ++n) {
    if (nodes_[n].type == NodeType::Task) out.push_back(n);
  }
  return out;
}

std::vector<NodeIndex> WFGraph::events() const {
  std::vector<NodeIndex> out;
  for (NodeIndex n = 0; n < nodes_.size(); ++n) {
    if (nodes_[n].type == NodeType::Event) out.push_back(n);
  }
  return out;
}

std::vector<FlowIndex> WFGraph::conditional_flows() const {
  std::vector<FlowIndex> out;
  for (FlowIndex f = 0; f < flows_.size(); ++f) {
    const Node& src = nodes_[flows_[f].source];
    if (src.type == NodeType::Xor && src.outgoing.size() >= 2) out.push_back(f);
  }
  return out;
}

bool WFGraph::operator==(const WFGraph& other) const {
  if (nodes_.size() != other.nodes_.size() || flows_.size() != other.flows_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& a = nodes_[i];
    const Node& b = other.nodes_[i];
    if (a.id != b.id || a.label != b.label || a.type != b.type) return false;
  }
  for (std::size_t i = 0; i < flows_.size(); ++i) {
    const Flow& a = flows_[i];
    const Flow& b = other.flows_[i];
    if (a.id != b.id || nodes_[a.source].id != other.nodes_[b.source].id ||
        nodes_[a.target].id != other.nodes_[b.target].id) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Marking

Marking::Marking(std::vector<FlowIndex> flows) : flows_(std::move(flows)) {
  std::sort(flows_.begin(), flows_.end());
  flows_.erase(std::unique(flows_.begin(), flows_.end()), flows_.end());
}

Marking::Marking(std::initializer_list<FlowIndex> flows)
    : Marking(std::vector<FlowIndex>(flows)) {}

bool Marking::contains(FlowIndex f) const {
  return std::binary_search(flows_.begin(), flows_.end(), f);
}

void Marking::insert(FlowIndex f) {
  auto it = std::lower_bound(flows_.begin(), flows_.end(), f);
  if (it == flows_.end() || *it != f) flows_.insert(it, f);
}

bool Marking::erase(FlowIndex f) {
  auto it = std::lower_bound(flows_.begin(), flows_.end(), f);
  if (it == flows_.end() || *it != f) return false;
  flows_.erase(it);
  return true;
}

std::size_t MarkingHash::operator()(const Marking& m) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (FlowIndex f : m) {
    h ^= f + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Token game

bool is_enabled(const WFGraph& graph, const Marking& marking, NodeIndex n) {
  const Node& node = graph.node(n);
  if (node.type == NodeType::Sink || node.incoming.empty()) return false;
  if (node.type == NodeType::And) {
    return std::all_of(node.incoming.begin(), node.incoming.end(),
                       [&](FlowIndex f) { return marking.contains(f); });
  }
  return std::any_of(node.incoming.begin(), node.incoming.end(),
                     [&](FlowIndex f) { return marking.contains(f); });
}

std::vector<NodeIndex> enabled_nodes(const WFGraph& graph, const Marking& marking) {
  std::vector<NodeIndex> out;
  for (NodeIndex n = 0; n < graph.nodes().size(); ++n) {
    if (is_enabled(graph, marking, n)) out.push_back(n);
  }
  return out;
}

namespace {

Marking produce(const WFGraph& graph, Marking next, const Node& node,
                std::optional<FlowIndex> chosen_out) {
  if (node.type == NodeType::Xor && node.outgoing.size() > 1) {
    if (!chosen_out) {
      throw std::invalid_argument("XOR '" + node.id + "' needs a chosen outgoing flow");
    }
    if (std::find(node.outgoing.begin(), node.outgoing.end(), *chosen_out) ==
        node.outgoing.end()) {
      throw std::invalid_argument("flow '" + graph.flow(*chosen_out).id +
                                  "' is not an outgoing flow of '" + node.id + "'");
    }
    next.insert(*chosen_out);
    return next;
  }
  if (chosen_out && (node.outgoing.size() != 1 || node.outgoing.front() != *chosen_out)) {
    throw std::invalid_argument("node '" + node.id + "' takes no branch choice");
  }
  for (FlowIndex f : node.outgoing) next.insert(f);
  return next;
}

}  // namespace

Marking fire(const WFGraph& graph, const Marking& marking, NodeIndex n,
             std::optional<FlowIndex> chosen_out) {
  const Node& node = graph.node(n);
  if (!is_enabled(graph, marking, n)) {
    throw std::invalid_argument("node '" + node.id + "' is not enabled");
  }
  Marking next = marking;
  if (node.type == NodeType::And) {
    for (FlowIndex f : node.incoming) next.erase(f);
    return produce(graph, std::move(next), node, chosen_out);
  }
  auto consumed = static_cast<FlowIndex>(graph.flows().size());
  for (FlowIndex f : node.incoming) {
    if (marking.contains(f)) consumed = std::min(consumed, f);
  }
  next.erase(consumed);
  return produce(graph, std::move(next), node, chosen_out);
}

Marking fire_from(const WFGraph& graph, const Marking& marking, NodeIndex n, FlowIndex consumed,
                  std::optional<FlowIndex> chosen_out) {
  const Node& node = graph.node(n);
  if (node.type == NodeType::And) return fire(graph, marking, n, chosen_out);
  if (!marking.contains(consumed) ||
      std::find(node.incoming.begin(), node.incoming.end(), consumed) == node.incoming.end()) {
    throw std::invalid_argument("node '" + node.id + "' cannot consume that flow");
  }
  Marking next = marking;
  next.erase(consumed);
  return produce(graph, std::move(next), node, chosen_out);
}

// ---------------------------------------------------------------------------
// Lifecycle expansion

namespace {

const std::string kStartSuffix = "#start";
const std::string kEndSuffix = "#end";
const std::string kLifecyclePrefix = "~run:";

}  // namespace

ExpandedGraph expand_lifecycle(const WFGraph& graph) {
  GraphSpec spec;
  for (const Node& node : graph.nodes()) {
    if (node.type == NodeType::Task) {
      spec.nodes.push_back({node.id + kStartSuffix, node.label + " [start]", NodeType::Task});
      spec.nodes.push_back({node.id + kEndSuffix, node.label + " [end]", NodeType::Task});
      spec.flows.push_back(
          {kLifecyclePrefix + node.id, node.id + kStartSuffix, node.id + kEndSuffix});
    } else {
      spec.nodes.push_back({node.id, node.label, node.type});
    }
  }
  for (const Flow& flow : graph.flows()) {
    const Node& src = graph.node(flow.source);
    const Node& dst = graph.node(flow.target);
    spec.flows.push_back({flow.id, src.type == NodeType::Task ? src.id + kEndSuffix : src.id,
                          dst.type == NodeType::Task ? dst.id + kStartSuffix : dst.id});
  }

  ExpandedGraph out{graph, WFGraph(spec), {}, {}, {}, {}};
  const WFGraph& eg = out.graph;
  out.node_origin.resize(eg.nodes().size());
  out.flow_origin.resize(eg.flows().size());
  out.base_to_expanded_flow.resize(graph.flows().size());
  out.lifecycle_flow.resize(graph.nodes().size());

  for (NodeIndex n = 0; n < graph.nodes().size(); ++n) {
    const Node& node = graph.node(n);
    if (node.type == NodeType::Task) {
      const NodeIndex s = *eg.find_node(node.id + kStartSuffix);
      const NodeIndex e = *eg.find_node(node.id + kEndSuffix);
      out.node_origin[s] = {n, Phase::Start};
      out.node_origin[e] = {n, Phase::End};
      const FlowIndex lf = *eg.find_flow(kLifecyclePrefix + node.id);
      out.flow_origin[lf].lifecycle_of = n;
      out.lifecycle_flow[n] = lf;
    } else {
      out.node_origin[*eg.find_node(node.id)] = {n, std::nullopt};
    }
  }
  for (FlowIndex f = 0; f < graph.flows().size(); ++f) {
    const FlowIndex ef = *eg.find_flow(graph.flow(f).id);
    out.flow_origin[ef].base_flow = f;
    out.base_to_expanded_flow[f] = ef;
  }
  return out;
}

WFGraph contract_lifecycle(const ExpandedGraph& expanded) {
  const WFGraph& eg = expanded.graph;
  const WFGraph& base = expanded.base;
  GraphSpec spec;
  for (NodeIndex n = 0; n < eg.nodes().size(); ++n) {
    const auto& origin = expanded.node_origin[n];
    if (origin.phase == Phase::End) continue;  // merged into the start half
    const Node& b = base.node(origin.base_node);
    spec.nodes.push_back({b.id, b.label, b.type});
  }
  auto merged_id = [&](NodeIndex n) { return base.node(expanded.node_origin[n].base_node).id; };
  for (FlowIndex f = 0; f < eg.flows().size(); ++f) {
    if (expanded.flow_origin[f].lifecycle_of) continue;
    const Flow& flow = eg.flow(f);
    spec.flows.push_back({flow.id, merged_id(flow.source), merged_id(flow.target)});
  }
  return WFGraph(spec);
}

// ---------------------------------------------------------------------------
// Soundness

SoundnessReport check_soundness(const WFGraph& graph, std::size_t marking_budget) {
  SoundnessReport report;
  const Marking initial{graph.initial_flow()};
  const Marking final_marking{graph.final_flow()};

  std::vector<Marking> states;
  std::unordered_map<Marking, std::size_t, MarkingHash> index;
  std::vector<std::vector<std::size_t>> predecessors;
  std::vector<bool> fired(graph.nodes().size(), false);

  auto intern = [&](const Marking& m) -> std::pair<std::size_t, bool> {
    auto [it, inserted] = index.emplace(m, states.size());
    if (inserted) {
      states.push_back(m);
      predecessors.emplace_back();
    }
    return {it->second, inserted};
  };

  std::deque<std::size_t> queue;
  queue.push_back(intern(initial).first);
  while (!queue.empty()) {
    if (states.size() > marking_budget) {
      report.budget_exceeded = true;
      break;
    }
    const std::size_t id = queue.front();
    queue.pop_front();
    const Marking current = states[id];
    if (current == final_marking) continue;
    if (current.contains(graph.final_flow())) {
      report.sound = false;
      report.issues.push_back("improper completion: tokens remain when the end event is reached");
      continue;
    }
    const auto enabled = enabled_nodes(graph, current);
    if (enabled.empty()) {
      report.sound = false;
      report.issues.push_back("deadlock in a marking with " + std::to_string(current.size()) +
                              " token(s)");
      continue;
    }
    for (NodeIndex n : enabled) {
      fired[n] = true;
      const Node& node = graph.node(n);
      std::vector<std::optional<FlowIndex>> choices;
      if (node.type == NodeType::Xor && node.outgoing.size() > 1) {
        for (FlowIndex f : node.outgoing) choices.emplace_back(f);
      } else {
        choices.emplace_back(std::nullopt);
      }
      std::vector<FlowIndex> consumable;
      if (node.type == NodeType::And) {
        consumable.push_back(node.incoming.front());
      } else {
        for (FlowIndex f : node.incoming) {
          if (current.contains(f)) consumable.push_back(f);
        }
      }
      for (FlowIndex consumed : consumable) {
        for (const auto& choice : choices) {
          Marking next = fire_from(graph, current, n, consumed, choice);
          auto [next_id, inserted] = intern(next);
          predecessors[next_id].push_back(id);
          if (inserted) queue.push_back(next_id);
        }
      }
    }
  }
  report.explored = states.size();
  if (report.budget_exceeded) {
    report.issues.push_back("state-space budget of " + std::to_string(marking_budget) +
                            " markings exceeded; soundness not verified");
    return report;
  }

  // Option to complete: every reachable marking reaches the final marking.
  std::vector<bool> can_finish(states.size(), false);
  if (auto it = index.find(final_marking); it != index.end()) {
    std::deque<std::size_t> back{it->second};
    can_finish[it->second] = true;
    while (!back.empty()) {
      const auto id = back.front();
      back.pop_front();
      for (auto p : predecessors[id]) {
        if (!can_finish[p]) {
          can_finish[p] = true;
          back.push_back(p);
        }
      }
    }
  }
  const auto stuck = std::count(can_finish.begin(), can_finish.end(), false);
  if (stuck > 0) {
    report.sound = false;
    report.issues.push_back(std::to_string(stuck) +
                            " reachable marking(s) cannot reach proper completion");
  }
  for (NodeIndex n = 0; n < graph.nodes().size(); ++n) {
    const NodeType t = graph.node(n).type;
    if (t != NodeType::Sink && t != NodeType::Start && !fired[n]) {
      report.sound = false;
      report.issues.push_back("node '" + graph.node(n).id + "' can never fire");
    }
  }
  std::sort(report.issues.begin(), report.issues.end());
  report.issues.erase(std::unique(report.issues.begin(), report.issues.end()),
                      report.issues.end());
  return report;
}

}  // namespace bpsim
