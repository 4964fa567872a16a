#include <doctest.h>

#include <algorithm>

#include "bpsim/errors.hpp"
#include "fixtures.hpp"

using namespace fixtures;

namespace {

FlowIndex flow(const WFGraph& g, const char* id) { return *g.find_flow(id); }
NodeIndex node(const WFGraph& g, const char* id) { return *g.find_node(id); }

}  // namespace

TEST_CASE("order-handling model has six tasks and two gateway pairs") {
  const WFGraph g = order_handling_graph();
  std::vector<std::string> labels;
  for (NodeIndex t : g.tasks()) labels.push_back(g.node(t).label);
  std::sort(labels.begin(), labels.end());
  CHECK(labels == std::vector<std::string>{"Collect Customer Info.", "Collect Express Payment",
                                           "Collect Standard Payment", "Prepare Invoice",
                                           "Prepare Package", "Send Invoice"});
  std::size_t xors = 0;
  std::size_t ands = 0;
  for (const auto& n : g.nodes()) {
    xors += n.type == NodeType::Xor;
    ands += n.type == NodeType::And;
  }
  CHECK(xors == 2);
  CHECK(ands == 2);
  CHECK(g.conditional_flows() == std::vector<FlowIndex>{flow(g, "f03_express"), flow(g, "f04_standard")});
}

TEST_CASE("token game on the order-handling model") {
  const WFGraph g = order_handling_graph();
  SUBCASE("AND join needs both inputs") {
    CHECK_FALSE(is_enabled(g, Marking{flow(g, "f10")}, node(g, "p2_fulfil_join")));
    CHECK(is_enabled(g, Marking{flow(g, "f10"), flow(g, "f12")}, node(g, "p2_fulfil_join")));
  }
  SUBCASE("AND split puts a token on each branch") {
    const Marking m = fire(g, Marking{flow(g, "f07")}, node(g, "p1_fulfil_split"));
    CHECK(m == Marking{flow(g, "f08"), flow(g, "f09")});
  }
  SUBCASE("XOR split follows the chosen flow only") {
    const Marking m = fire(g, Marking{flow(g, "f02")}, node(g, "x1_payment_split"), flow(g, "f03_express"));
    CHECK(m == Marking{flow(g, "f03_express")});
    CHECK_THROWS_AS(fire(g, Marking{flow(g, "f02")}, node(g, "x1_payment_split")), std::invalid_argument);
  }
  SUBCASE("tasks need a token on their input") {
    CHECK_THROWS_AS(fire(g, Marking{flow(g, "f01")}, node(g, "t6_send_invoice")), std::invalid_argument);
  }
}

TEST_CASE("lifecycle expansion yields a start and an end label per task and contracts back") {
  const WFGraph g = order_handling_graph();
  const ExpandedGraph ex = expand_lifecycle(g);
  std::size_t halves = 0;
  for (const auto& o : ex.node_origin) halves += o.phase.has_value();
  CHECK(halves == 12);
  CHECK(ex.graph.tasks().size() == 12);
  CHECK(contract_lifecycle(ex) == g);
}

TEST_CASE("soundness check") {
  CHECK(check_soundness(order_handling_graph()).sound);
  CHECK(check_soundness(sequential_graph()).sound);
  CHECK(check_soundness(parallel_graph()).sound);

  // An XOR split closed by an AND join deadlocks.
  const WFGraph bad = graph_of({{"s", NodeType::Start},
                                {"e", NodeType::Sink},
                                {"x", NodeType::Xor},
                                {"a", NodeType::Task, "A"},
                                {"b", NodeType::Task, "B"},
                                {"j", NodeType::And}},
                               {{"f1", "s", "x"},
                                {"f2", "x", "a"},
                                {"f3", "x", "b"},
                                {"f4", "a", "j"},
                                {"f5", "b", "j"},
                                {"f6", "j", "e"}});
  const auto report = check_soundness(bad);
  CHECK_FALSE(report.sound);
  CHECK_FALSE(report.issues.empty());
}

TEST_CASE("graph validation rejects malformed structures") {
  CHECK_THROWS_AS(graph_of({{"s", NodeType::Start}, {"e", NodeType::Sink}}, {{"f1", "s", "missing"}}),
                  ValidationError);
  CHECK_THROWS_AS(graph_of({{"s", NodeType::Start}, {"e", NodeType::Sink}, {"a", NodeType::Task, "A"},
                            {"b", NodeType::Task, "A"}},
                           {{"f1", "s", "a"}, {"f2", "a", "b"}, {"f3", "b", "e"}}),
                  ValidationError);
  CHECK_THROWS_AS(graph_of({{"e", NodeType::Sink}, {"a", NodeType::Task, "A"}}, {{"f1", "a", "e"}}),
                  ValidationError);
}

TEST_CASE("BPMN parser rejects unsupported elements and accepts typed tasks") {
  const char* inclusive = R"(<definitions><process id="p">
    <startEvent id="s"/><inclusiveGateway id="g"/><endEvent id="e"/>
    <sequenceFlow id="f1" sourceRef="s" targetRef="g"/><sequenceFlow id="f2" sourceRef="g" targetRef="e"/>
  </process></definitions>)";
  CHECK_THROWS_AS(parse_bpmn(inclusive), ValidationError);
  CHECK_THROWS_AS(parse_bpmn("<definitions"), ValidationError);

  const char* typed = R"(<definitions><process id="p">
    <startEvent id="s"/><userTask id="a" name="Check"/><endEvent id="e"/>
    <sequenceFlow id="f1" sourceRef="s" targetRef="a"/><sequenceFlow id="f2" sourceRef="a" targetRef="e"/>
  </process></definitions>)";
  const WFGraph g = parse_bpmn(typed);
  REQUIRE(g.find_task("Check"));
}
