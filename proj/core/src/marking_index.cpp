#include "bpsim/marking_index.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <unordered_set>

#include "bpsim/errors.hpp"

namespace bpsim {
namespace {

bool is_silent(NodeType t) { return t == NodeType::And || t == NodeType::Xor || t == NodeType::Event; }

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

MarkingIndex::MarkingIndex(const WFGraph& graph, std::size_t m, std::size_t marking_budget)
    : expanded_(expand_lifecycle(graph)), m_(m), budget_(marking_budget) {
  if (m_ == 0) throw ValidationError("gram length m must be at least 1");
  const WFGraph& eg = expanded_.graph;

  const auto tasks = graph.tasks();
  if (2 * tasks.size() + 1 > std::numeric_limits<Symbol>::max()) {
    throw ValidationError("too many tasks for the marking index");
  }
  task_rank_.assign(graph.nodes().size(), 0);
  for (std::uint32_t k = 0; k < tasks.size(); ++k) task_rank_[tasks[k]] = k;

  node_symbol_.assign(eg.nodes().size(), 0);
  symbol_node_.assign(2 * tasks.size() + 1, 0);
  feeders_.resize(eg.nodes().size());
  approach_.resize(eg.nodes().size());
  for (NodeIndex n = 0; n < eg.nodes().size(); ++n) {
    const auto& origin = expanded_.node_origin[n];
    if (!origin.phase) continue;
    const Symbol s = symbol(origin.base_node, *origin.phase);
    node_symbol_[n] = s;
    symbol_node_[s] = n;
    if (*origin.phase != Phase::Start) continue;

    // Walk backwards from the task's input through silent nodes only.
    std::vector<FlowIndex> flows{eg.node(n).incoming.front()};
    std::vector<NodeIndex> nodes;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const NodeIndex src = eg.flow(flows[i]).source;
      if (!is_silent(eg.node(src).type)) continue;
      if (std::find(nodes.begin(), nodes.end(), src) != nodes.end()) continue;
      nodes.push_back(src);
      for (FlowIndex in : eg.node(src).incoming) {
        if (std::find(flows.begin(), flows.end(), in) == flows.end()) flows.push_back(in);
      }
    }
    sort_unique(flows);
    sort_unique(nodes);
    approach_[n] = std::move(flows);
    feeders_[n] = std::move(nodes);
  }

  initial_ = intern(canonical(Marking{expanded_.base_to_expanded_flow[graph.initial_flow()]}));
  for (StateId s = 0; s < states_.size(); ++s) explore(s);

  // Grams level by level: the states reached by a label sequence g+x are the
  // x-successors of the states reached by g.
  std::map<std::vector<Symbol>, std::vector<StateId>> level;
  level[{kCaseStart}] = {initial_};
  for (StateId s = 0; s < states_.size(); ++s) {
    for (const auto& [x, t] : edges_[s]) level[{x}].push_back(t);
  }
  const std::size_t gram_cap = 50 * budget_;
  for (std::size_t k = 1;; ++k) {
    for (auto& [g, ends] : level) {
      sort_unique(ends);
      grams_.emplace(g, ends);
    }
    if (grams_.size() > gram_cap) {
      throw BudgetExceeded("marking index exceeded " + std::to_string(gram_cap) + " grams");
    }
    if (k == m_) break;
    std::map<std::vector<Symbol>, std::vector<StateId>> next;
    for (const auto& [g, ends] : level) {
      for (StateId s : ends) {
        for (const auto& [x, t] : edges_[s]) {
          auto key = g;
          key.push_back(x);
          next[std::move(key)].push_back(t);
        }
      }
    }
    level = std::move(next);
  }
}

Symbol MarkingIndex::symbol(NodeIndex task, Phase phase) const {
  return static_cast<Symbol>(2 * task_rank_.at(task) + static_cast<unsigned>(phase) + 1);
}

std::optional<Symbol> MarkingIndex::symbol(std::string_view label, Phase phase) const {
  auto t = graph().find_task(label);
  if (!t) return std::nullopt;
  return symbol(*t, phase);
}

std::string MarkingIndex::symbol_name(Symbol s) const {
  if (s == kCaseStart) return "▷";
  const auto& origin = expanded_.node_origin[symbol_node_.at(s)];
  return graph().node(origin.base_node).label + (origin.phase == Phase::Start ? "_s" : "_e");
}

MarkingIndex::StateId MarkingIndex::intern(Marking marking) {
  auto it = state_ids_.find(marking);
  if (it != state_ids_.end()) return it->second;
  if (states_.size() >= budget_) {
    throw BudgetExceeded("marking index exceeded the budget of " + std::to_string(budget_) +
                         " markings");
  }
  const auto id = static_cast<StateId>(states_.size());
  states_.push_back(marking);
  edges_.emplace_back();
  state_ids_.emplace(std::move(marking), id);
  return id;
}

void MarkingIndex::add_edge(StateId from, Symbol label, StateId to) {
  auto& out = edges_[from];
  const std::pair<Symbol, StateId> e{label, to};
  if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
}

Marking MarkingIndex::canonical(Marking marking) const {
  const WFGraph& eg = expanded_.graph;
  const std::size_t limit = 16 * (eg.nodes().size() + eg.flows().size()) + 64;
  std::size_t fired = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (NodeIndex n = 0; n < eg.nodes().size(); ++n) {
      const Node& node = eg.node(n);
      const bool eager =
          node.type == NodeType::And || (node.type == NodeType::Xor && node.outgoing.size() == 1);
      if (!eager || !is_enabled(eg, marking, n)) continue;
      marking = fire(eg, marking, n);
      changed = true;
      if (++fired > limit) {
        throw ValidationError("model contains a cycle of gateways without tasks");
      }
    }
  }
  return marking;
}

void MarkingIndex::explore(StateId state) {
  const WFGraph& eg = expanded_.graph;
  const Marking current = states_[state];

  for (NodeIndex v = 0; v < eg.nodes().size(); ++v) {
    const Symbol sym = node_symbol_[v];
    if (sym == kCaseStart) continue;
    const FlowIndex input = eg.node(v).incoming.front();

    if (expanded_.node_origin[v].phase == Phase::End) {
      if (current.contains(input)) add_edge(state, sym, intern(canonical(fire(eg, current, v))));
      continue;
    }

    // Silent moves that bring a token to v's input, explored only here.
    const auto& feeders = feeders_[v];
    const auto& approach = approach_[v];
    std::vector<Marking> closure{current};
    std::unordered_set<Marking, MarkingHash> seen{current};
    auto push = [&](Marking m) {
      if (seen.insert(m).second) {
        if (seen.size() > budget_) {
          throw BudgetExceeded("silent closure exceeded the budget of " + std::to_string(budget_) +
                               " markings");
        }
        closure.push_back(std::move(m));
      }
    };
    for (std::size_t i = 0; i < closure.size(); ++i) {
      const Marking x = closure[i];
      if (x.contains(input)) add_edge(state, sym, intern(canonical(fire_from(eg, x, v, input))));
      for (NodeIndex n : feeders) {
        if (!is_enabled(eg, x, n)) continue;
        const Node& node = eg.node(n);
        if (node.type == NodeType::And) {
          push(canonical(fire(eg, x, n)));
          continue;
        }
        for (FlowIndex in : node.incoming) {
          if (!x.contains(in)) continue;
          if (node.type == NodeType::Xor && node.outgoing.size() > 1) {
            for (FlowIndex out : node.outgoing) {
              if (std::binary_search(approach.begin(), approach.end(), out)) {
                push(canonical(fire_from(eg, x, n, in, out)));
              }
            }
          } else {
            push(canonical(fire_from(eg, x, n, in)));
          }
        }
      }
    }
  }
}

MarkingIndex::Match MarkingIndex::lookup(std::span<const Symbol> history) const {
  const std::size_t longest = std::min(m_, history.size());
  for (std::size_t len = longest; len >= 1; --len) {
    const std::vector<Symbol> key(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
    auto it = grams_.find(key);
    if (it == grams_.end()) continue;
    Match match;
    match.key_length = len;
    for (StateId s : it->second) match.candidates.push_back(project(states_[s]));
    sort_unique(match.candidates);
    return match;
  }
  return {};
}

std::vector<BaseMarking> MarkingIndex::candidates(std::span<const Symbol> gram) const {
  std::vector<BaseMarking> out;
  auto it = grams_.find(std::vector<Symbol>(gram.begin(), gram.end()));
  if (it == grams_.end()) return out;
  for (StateId s : it->second) out.push_back(project(states_[s]));
  sort_unique(out);
  return out;
}

BaseMarking MarkingIndex::initial() const { return project(states_[initial_]); }

BaseMarking MarkingIndex::project(const Marking& expanded_marking) const {
  BaseMarking out;
  for (FlowIndex f : expanded_marking) {
    const auto& origin = expanded_.flow_origin[f];
    if (origin.base_flow) out.flows.push_back(*origin.base_flow);
    if (origin.lifecycle_of) out.ongoing.push_back(*origin.lifecycle_of);
  }
  sort_unique(out.flows);
  sort_unique(out.ongoing);
  return out;
}

}  // namespace bpsim
