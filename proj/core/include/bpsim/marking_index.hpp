#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bpsim/process_model.hpp"

namespace bpsim {

/// Lifecycle label in index form. 0 is the case-start marker that precedes
/// every complete prefix; task k (in id order) has start symbol 2k+1 and end
/// symbol 2k+2.
using Symbol = std::uint16_t;
inline constexpr Symbol kCaseStart = 0;

/// Marking of the lifecycle-expanded graph projected back onto the base
/// graph: token-holding flows plus the tasks being executed.
struct BaseMarking {
  std::vector<FlowIndex> flows;    // ascending
  std::vector<NodeIndex> ongoing;  // ascending task node indices

  std::size_t tokens() const { return flows.size() + ongoing.size(); }
  auto operator<=>(const BaseMarking&) const = default;
  bool operator==(const BaseMarking&) const = default;
};

/// Maps every label sequence of length <= m observed along paths of the
/// expanded reachability graph to the markings those paths end in.
///
/// Markings are stored in canonical form: AND nodes and single-exit XOR
/// nodes fire as soon as they can, while multi-exit XOR nodes and
/// intermediate events keep their input token. Silent moves are explored
/// only when they lead to the next observed label, so states in front of a
/// decision are generated lazily.
class MarkingIndex {
 public:
  /// Throws BudgetExceeded when more than `marking_budget` markings are reached.
  MarkingIndex(const WFGraph& graph, std::size_t m, std::size_t marking_budget = 100'000);

  const WFGraph& graph() const { return expanded_.base; }
  const ExpandedGraph& expanded() const { return expanded_; }
  std::size_t m() const { return m_; }
  std::size_t state_count() const { return states_.size(); }
  std::size_t gram_count() const { return grams_.size(); }

  Symbol symbol(NodeIndex task, Phase phase) const;
  std::optional<Symbol> symbol(std::string_view label, Phase phase) const;
  /// "▷" for the case-start marker, "<label>_s" / "<label>_e" otherwise.
  std::string symbol_name(Symbol s) const;

  struct Match {
    std::vector<BaseMarking> candidates;  // sorted; empty on a total miss
    std::size_t key_length = 0;           // length of the suffix that matched
  };

  /// Looks up the last m symbols of `history`, dropping leading symbols
  /// until a key is found.
  Match lookup(std::span<const Symbol> history) const;

  /// All candidates stored under exactly `gram`.
  std::vector<BaseMarking> candidates(std::span<const Symbol> gram) const;

  BaseMarking initial() const;
  BaseMarking project(const Marking& expanded_marking) const;

  /// Canonical form of an expanded marking (see class comment).
  Marking canonical(Marking marking) const;

 private:
  using StateId = std::uint32_t;

  StateId intern(Marking marking);
  void explore(StateId state);
  void add_edge(StateId from, Symbol label, StateId to);

  ExpandedGraph expanded_;
  std::size_t m_;
  std::size_t budget_;
  std::vector<Symbol> node_symbol_;          // expanded node -> symbol, 0 if silent
  std::vector<NodeIndex> symbol_node_;       // symbol -> expanded node
  std::vector<std::uint32_t> task_rank_;     // base node -> position among tasks
  std::vector<std::vector<NodeIndex>> feeders_;   // expanded start node -> silent nodes leading to it
  std::vector<std::vector<FlowIndex>> approach_;  // expanded start node -> flows on silent paths into it

  std::vector<Marking> states_;
  std::unordered_map<Marking, StateId, MarkingHash> state_ids_;
  std::vector<std::vector<std::pair<Symbol, StateId>>> edges_;
  StateId initial_ = 0;
  std::map<std::vector<Symbol>, std::vector<StateId>> grams_;
};

}  // namespace bpsim
