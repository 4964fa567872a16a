#include <doctest.h>

#include <random>

#include "bpsim/errors.hpp"
#include "bpsim/marking_index.hpp"
#include "fixtures.hpp"

using namespace fixtures;

namespace {

std::vector<Symbol> word(const MarkingIndex& index, std::initializer_list<std::pair<const char*, Phase>> labels) {
  std::vector<Symbol> out;
  for (const auto& [label, phase] : labels) out.push_back(*index.symbol(label, phase));
  return out;
}

constexpr Phase S = Phase::Start;
constexpr Phase E = Phase::End;

// Random token game on the expanded graph. After every labelled move the
// canonical form of the reached marking must be among the lookup candidates
// of the history so far, unless a token sits just past a silent node that
// the index leaves unfired.
void random_walks(const WFGraph& base, std::size_t m, std::uint64_t seed, int walks) {
  const MarkingIndex index(base, m);
  const ExpandedGraph& ex = index.expanded();
  const WFGraph& g = ex.graph;
  std::mt19937_64 rng(seed);
  auto waiting_past_choice = [&](const Marking& mk) {
    for (FlowIndex f : mk) {
      const Node& src = g.node(g.flow(f).source);
      if (src.type == NodeType::Event || (src.type == NodeType::Xor && src.outgoing.size() > 1)) return true;
    }
    return false;
  };
  std::size_t checked = 0;
  for (int w = 0; w < walks; ++w) {
    Marking mk{ex.base_to_expanded_flow[base.initial_flow()]};
    std::vector<Symbol> history{kCaseStart};
    for (int step = 0; step < 200; ++step) {
      const auto enabled = enabled_nodes(g, mk);
      if (enabled.empty()) break;
      const NodeIndex n = enabled[std::uniform_int_distribution<std::size_t>(0, enabled.size() - 1)(rng)];
      const Node& node = g.node(n);
      std::optional<FlowIndex> choice;
      if (node.type == NodeType::Xor && node.outgoing.size() > 1) {
        choice = node.outgoing[std::uniform_int_distribution<std::size_t>(0, node.outgoing.size() - 1)(rng)];
      }
      mk = fire(g, mk, n, choice);
      const auto& origin = ex.node_origin[n];
      if (!origin.phase) continue;
      history.push_back(index.symbol(origin.base_node, *origin.phase));
      if (waiting_past_choice(mk)) continue;
      const auto match = index.lookup(history);
      const BaseMarking expected = index.project(index.canonical(mk));
      REQUIRE(std::find(match.candidates.begin(), match.candidates.end(), expected) != match.candidates.end());
      ++checked;
    }
  }
  CHECK(checked > static_cast<std::size_t>(walks));
}

}  // namespace

TEST_CASE("a lifecycle gram on the order-handling model has a single marking") {
  const WFGraph g = order_handling_graph();
  const MarkingIndex index(g, 4);
  const auto gram = word(index, {{"Prepare Package", E},
                                 {"Prepare Invoice", S},
                                 {"Prepare Invoice", E},
                                 {"Send Invoice", S}});
  const auto candidates = index.candidates(gram);
  REQUIRE(candidates.size() == 1);
  CHECK(candidates[0].flows == std::vector<FlowIndex>{*g.find_flow("f10")});
  CHECK(candidates[0].ongoing == std::vector<NodeIndex>{*g.find_node("t6_send_invoice")});
  CHECK(index.symbol_name(gram[0]) == "Prepare Package_e");
  CHECK(index.symbol_name(kCaseStart) == "▷");
}

TEST_CASE("the case-start marker anchors short prefixes") {
  const WFGraph g = order_handling_graph();
  const MarkingIndex index(g, 5);
  const std::vector<Symbol> empty{kCaseStart};
  const auto m0 = index.lookup(empty);
  REQUIRE(m0.candidates.size() == 1);
  CHECK(m0.candidates[0] == index.initial());
  CHECK(index.initial().flows == std::vector<FlowIndex>{g.initial_flow()});

  std::vector<Symbol> first{kCaseStart};
  first.push_back(*index.symbol("Collect Customer Info.", S));
  const auto m1 = index.lookup(first);
  REQUIRE(m1.candidates.size() == 1);
  CHECK(m1.candidates[0].ongoing == std::vector<NodeIndex>{*g.find_node("t1_collect_info")});
  CHECK(m1.key_length == 2);
}

TEST_CASE("lookup backs off to shorter suffixes") {
  const WFGraph g = order_handling_graph();
  const MarkingIndex index(g, 3);
  // Prepare Invoice twice in a row never happens, but its last symbol does.
  auto history = word(index, {{"Prepare Invoice", S}, {"Prepare Invoice", E}, {"Prepare Invoice", S}});
  const auto match = index.lookup(history);
  CHECK(match.key_length == 1);
  REQUIRE_FALSE(match.candidates.empty());
  for (const auto& c : match.candidates) {
    CHECK(std::find(c.ongoing.begin(), c.ongoing.end(), *g.find_node("t5_prepare_invoice")) != c.ongoing.end());
  }
  CHECK(index.lookup(std::vector<Symbol>{}).candidates.empty());
}

TEST_CASE("index construction limits") {
  CHECK_THROWS_AS(MarkingIndex(order_handling_graph(), 0), ValidationError);
  CHECK_THROWS_AS(MarkingIndex(parallel_graph(), 5, 3), BudgetExceeded);

  // An AND split feeding a task and a loop of single-exit gateways.
  const WFGraph loop = graph_of({{"s", NodeType::Start},
                                 {"e", NodeType::Sink},
                                 {"p", NodeType::And},
                                 {"a", NodeType::Task, "A"},
                                 {"x1", NodeType::Xor},
                                 {"x2", NodeType::Xor}},
                                {{"f1", "s", "p"},
                                 {"f2", "p", "a"},
                                 {"f3", "a", "e"},
                                 {"f4", "p", "x1"},
                                 {"f5", "x1", "x2"},
                                 {"f6", "x2", "x1"}});
  CHECK_THROWS_WITH_AS(MarkingIndex(loop, 3), "model contains a cycle of gateways without tasks", ValidationError);
}

TEST_CASE("grams grow with m") {
  const WFGraph g = sequential_graph();
  std::size_t previous = 0;
  for (std::size_t m = 1; m <= 5; ++m) {
    const MarkingIndex index(g, m);
    CHECK(index.gram_count() > previous);
    previous = index.gram_count();
  }
}

TEST_CASE("random token games end in markings the index predicts") {
  SUBCASE("sequential") { random_walks(sequential_graph(), 5, 11, 200); }
  SUBCASE("parallel") { random_walks(parallel_graph(), 5, 12, 200); }
  SUBCASE("order handling") { random_walks(order_handling_graph(), 4, 13, 200); }
  SUBCASE("intermediate event") { random_walks(event_graph(), 3, 14, 50); }
  SUBCASE("m = 1") { random_walks(order_handling_graph(), 1, 15, 100); }
}
