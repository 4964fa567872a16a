#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bpsim {

using NodeIndex = std::uint32_t;
using FlowIndex = std::uint32_t;

/// `Start` and `Sink` are the graph's unique start/end events. The remaining
/// four kinds are the workflow-graph node types.
enum class NodeType { Start, Sink, Task, Event, And, Xor };

std::string_view to_string(NodeType type);

struct Node {
  std::string id;
  std::string label;
  NodeType type = NodeType::Task;
  std::vector<FlowIndex> incoming;
  std::vector<FlowIndex> outgoing;
};

struct Flow {
  std::string id;
  NodeIndex source = 0;
  NodeIndex target = 0;
};

/// Raw description of a graph before validation. Flow endpoints are node ids.
struct GraphSpec {
  struct NodeDecl {
    std::string id;
    std::string label;
    NodeType type;
  };
  struct FlowDecl {
    std::string id;
    std::string source;
    std::string target;
  };
  std::vector<NodeDecl> nodes;  // must include exactly one Start and one Sink
  std::vector<FlowDecl> flows;
};

/// Immutable workflow graph. Nodes and flows are stored sorted by id, so
/// index order equals id order and sorted index vectors compare like sorted
/// id vectors.
class WFGraph {
 public:
  /// Validates and builds. Throws ValidationError on dangling references,
  /// duplicate ids, missing/multiple start or sink, duplicate task labels,
  /// flows into the start or out of the sink, and tasks/events that do not
  /// have exactly one incoming and one outgoing flow.
  explicit WFGraph(const GraphSpec& spec);

  NodeIndex start() const { return start_; }
  NodeIndex sink() const { return sink_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Flow>& flows() const { return flows_; }
  const Node& node(NodeIndex n) const { return nodes_.at(n); }
  const Flow& flow(FlowIndex f) const { return flows_.at(f); }

  std::optional<NodeIndex> find_node(std::string_view id) const;
  std::optional<FlowIndex> find_flow(std::string_view id) const;
  std::optional<NodeIndex> find_task(std::string_view label) const;

  /// Outgoing flow of the start event.
  FlowIndex initial_flow() const { return nodes_[start_].outgoing.front(); }
  /// Incoming flow of the sink.
  FlowIndex final_flow() const { return nodes_[sink_].incoming.front(); }

  /// Task nodes (A(W)) in id order.
  std::vector<NodeIndex> tasks() const;
  /// Intermediate event nodes (E(W)) in id order.
  std::vector<NodeIndex> events() const;

  /// Flows whose source is an XOR node with at least one other outgoing flow.
  std::vector<FlowIndex> conditional_flows() const;

  bool operator==(const WFGraph& other) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Flow> flows_;
  std::unordered_map<std::string, NodeIndex> node_by_id_;
  std::unordered_map<std::string, FlowIndex> flow_by_id_;
  std::unordered_map<std::string, NodeIndex> task_by_label_;
  NodeIndex start_ = 0;
  NodeIndex sink_ = 0;
};

/// Parses a BPMN 2.0 document restricted to startEvent, endEvent, task (and
/// its typed variants such as userTask), intermediateCatchEvent,
/// exclusiveGateway, parallelGateway and sequenceFlow.
WFGraph parse_bpmn(std::string_view xml_document);

/// Set of token-holding flows, kept sorted and duplicate-free.
class Marking {
 public:
  Marking() = default;
  explicit Marking(std::vector<FlowIndex> flows);
  Marking(std::initializer_list<FlowIndex> flows);

  bool contains(FlowIndex f) const;
  void insert(FlowIndex f);
  bool erase(FlowIndex f);
  std::size_t size() const { return flows_.size(); }
  bool empty() const { return flows_.empty(); }
  const std::vector<FlowIndex>& flows() const { return flows_; }
  auto begin() const { return flows_.begin(); }
  auto end() const { return flows_.end(); }

  auto operator<=>(const Marking&) const = default;
  bool operator==(const Marking&) const = default;

 private:
  std::vector<FlowIndex> flows_;
};

struct MarkingHash {
  std::size_t operator()(const Marking& m) const noexcept;
};

/// Nodes that may fire under `marking`: AND nodes need every incoming flow,
/// all other nodes need at least one. The sink never appears.
std::vector<NodeIndex> enabled_nodes(const WFGraph& graph, const Marking& marking);

bool is_enabled(const WFGraph& graph, const Marking& marking, NodeIndex node);

/// Fires `node`. `chosen_out` is required iff the node is an XOR with more
/// than one outgoing flow. A non-AND node consumes its lowest-id marked
/// incoming flow. Throws std::invalid_argument when the node is not enabled
/// or the choice is missing/invalid.
Marking fire(const WFGraph& graph, const Marking& marking, NodeIndex node,
             std::optional<FlowIndex> chosen_out = std::nullopt);

/// As fire(), but names the incoming flow a non-AND node consumes.
Marking fire_from(const WFGraph& graph, const Marking& marking, NodeIndex node,
                  FlowIndex consumed, std::optional<FlowIndex> chosen_out = std::nullopt);

/// Lifecycle phase of an expanded task node.
enum class Phase : std::uint8_t { Start = 0, End = 1 };

/// Task-level expansion: every task `a` becomes the sequence `a_s -> a_e`
/// joined by a fresh internal flow. A token on that internal flow means the
/// task is being executed.
struct ExpandedGraph {
  struct NodeOrigin {
    NodeIndex base_node;
    std::optional<Phase> phase;  // set for the two halves of a task
  };
  struct FlowOrigin {
    std::optional<FlowIndex> base_flow;     // set for flows copied from the base
    std::optional<NodeIndex> lifecycle_of;  // set for the internal task flows
  };

  WFGraph base;
  WFGraph graph;
  std::vector<NodeOrigin> node_origin;  // indexed by expanded NodeIndex
  std::vector<FlowOrigin> flow_origin;  // indexed by expanded FlowIndex
  std::vector<FlowIndex> base_to_expanded_flow;  // indexed by base FlowIndex
  std::vector<std::optional<FlowIndex>> lifecycle_flow;  // indexed by base NodeIndex
};

ExpandedGraph expand_lifecycle(const WFGraph& graph);

/// Inverse of expand_lifecycle: merges each `a_s -> a_e` pair back into `a`.
WFGraph contract_lifecycle(const ExpandedGraph& expanded);

struct SoundnessReport {
  bool sound = true;
  bool budget_exceeded = false;  // exploration stopped early; `sound` is then unverified
  std::size_t explored = 0;
  std::vector<std::string> issues;
};

/// Exhaustive token-game exploration from {initial flow}: reports deadlocks,
/// improper completion, markings that cannot reach {final flow} and nodes
/// that never fire.
SoundnessReport check_soundness(const WFGraph& graph, std::size_t marking_budget = 100'000);

}  // namespace bpsim
