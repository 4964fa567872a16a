#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bpsim/bps_model.hpp"
#include "bpsim/event_log.hpp"
#include "bpsim/process_model.hpp"
#include "bpsim/sim_engine.hpp"
#include "bpsim/state_discovery.hpp"
#include "bpsim/time.hpp"

namespace fixtures {

using namespace bpsim;
using namespace std::chrono_literals;

inline std::string data_path(const std::string& name) { return std::string(BPSIM_TEST_DATA_DIR) + "/" + name; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Timestamp ts(const char* text) { return parse_timestamp(text); }

inline ActivityInstance inst(const std::string& case_id, const std::string& activity, const char* start,
                             const char* end, std::optional<std::string> resource = std::nullopt) {
  ActivityInstance a;
  a.case_id = case_id;
  a.activity = activity;
  a.start = ts(start);
  if (end != nullptr) a.end = ts(end);
  a.resource = std::move(resource);
  return a;
}

struct N {
  std::string id;
  NodeType type;
  std::string label = {};
};

struct F {
  std::string id;
  std::string source;
  std::string target;
};

inline WFGraph graph_of(const std::vector<N>& nodes, const std::vector<F>& flows) {
  GraphSpec spec;
  for (const auto& n : nodes) spec.nodes.push_back({n.id, n.label, n.type});
  for (const auto& f : flows) spec.flows.push_back({f.id, f.source, f.target});
  return WFGraph(spec);
}

// start -> A -> X1 -> {B | C} -> X2 -> D -> X3 -> {E -> end | back to X1}
inline WFGraph sequential_graph() {
  return graph_of({{"start", NodeType::Start},
                   {"end", NodeType::Sink},
                   {"tA", NodeType::Task, "A"},
                   {"tB", NodeType::Task, "B"},
                   {"tC", NodeType::Task, "C"},
                   {"tD", NodeType::Task, "D"},
                   {"tE", NodeType::Task, "E"},
                   {"x1", NodeType::Xor},
                   {"x2", NodeType::Xor},
                   {"x3", NodeType::Xor}},
                  {{"f01", "start", "tA"},
                   {"f02", "tA", "x1"},
                   {"f03", "x1", "tB"},
                   {"f04", "x1", "tC"},
                   {"f05", "tB", "x2"},
                   {"f06", "tC", "x2"},
                   {"f07", "x2", "tD"},
                   {"f08", "tD", "x3"},
                   {"f09", "x3", "tE"},
                   {"f10", "x3", "x1"},
                   {"f11", "tE", "end"}});
}

// start -> A -> P1 -> {B | C -> D} -> P2 -> E -> end
inline WFGraph parallel_graph() {
  return graph_of({{"start", NodeType::Start},
                   {"end", NodeType::Sink},
                   {"tA", NodeType::Task, "A"},
                   {"tB", NodeType::Task, "B"},
                   {"tC", NodeType::Task, "C"},
                   {"tD", NodeType::Task, "D"},
                   {"tE", NodeType::Task, "E"},
                   {"p1", NodeType::And},
                   {"p2", NodeType::And}},
                  {{"f01", "start", "tA"},
                   {"f02", "tA", "p1"},
                   {"f03", "p1", "tB"},
                   {"f04", "p1", "tC"},
                   {"f05", "tC", "tD"},
                   {"f06", "tB", "p2"},
                   {"f07", "tD", "p2"},
                   {"f08", "p2", "tE"},
                   {"f09", "tE", "end"}});
}

// start -> A -> wait -> B -> end
inline WFGraph event_graph() {
  return graph_of({{"start", NodeType::Start},
                   {"end", NodeType::Sink},
                   {"tA", NodeType::Task, "A"},
                   {"tB", NodeType::Task, "B"},
                   {"ev", NodeType::Event, "Wait"}},
                  {{"f1", "start", "tA"}, {"f2", "tA", "ev"}, {"f3", "ev", "tB"}, {"f4", "tB", "end"}});
}

inline WFGraph order_handling_graph() { return parse_bpmn(read_text(data_path("order_handling.bpmn"))); }

inline Distribution fixed_min(double minutes) { return Distribution(Family::Fixed, {minutes * 60.0}); }
inline Distribution expo_min(double minutes) { return Distribution(Family::Exponential, {minutes * 60.0}); }

inline ResourceProfile resource(const std::string& id, std::set<std::string> activities,
                                Calendar cal = Calendar::always()) {
  return {id, std::move(cal), std::move(activities)};
}

inline Calendar weekdays(int from_hour, int to_hour) {
  std::vector<Calendar::Interval> iv;
  for (int d = 0; d < 5; ++d) iv.push_back({d, std::chrono::hours(from_hour), std::chrono::hours(to_hour)});
  return Calendar(std::move(iv));
}

// Sequential model with random durations, a branch and a rework loop.
inline BPSModel sequential_model(double mean_interarrival_min = 20.0) {
  BPSModel m{sequential_graph(), {}, {}, {}, {}, expo_min(mean_interarrival_min)};
  m.durations = {{"A", expo_min(10)}, {"B", Distribution(Family::Uniform, {600, 1800})},
                 {"C", Distribution(Family::Normal, {1200, 300})}, {"D", expo_min(12)},
                 {"E", Distribution(Family::Gamma, {2, 300})}};
  m.branching = {{"f03", 0.6}, {"f04", 0.4}, {"f09", 0.8}, {"f10", 0.2}};
  m.resources = {resource("r1", {"A", "B"}), resource("r2", {"B", "C"}), resource("r3", {"C", "D"}),
                 resource("r4", {"D", "E"}), resource("r5", {"A", "E"})};
  validate(m);
  return m;
}

inline BPSModel parallel_model(double mean_interarrival_min = 20.0) {
  BPSModel m{parallel_graph(), {}, {}, {}, {}, expo_min(mean_interarrival_min)};
  m.durations = {{"A", expo_min(8)}, {"B", expo_min(25)}, {"C", expo_min(10)}, {"D", expo_min(10)},
                 {"E", expo_min(6)}};
  m.resources = {resource("r1", {"A", "E"}), resource("r2", {"B"}), resource("r3", {"B", "C"}),
                 resource("r4", {"C", "D"}), resource("r5", {"D", "E"})};
  validate(m);
  return m;
}

inline BPSModel order_handling_fixed() {
  return parse_params(read_text(data_path("order_handling_fixed.json")), order_handling_graph());
}

// Flows reachable from `from` by firing gateways only (AND, and XOR with any
// choice), including `from` itself.
inline std::set<std::vector<FlowIndex>> silent_closure(const WFGraph& g, const std::vector<FlowIndex>& from) {
  std::set<std::vector<FlowIndex>> seen{from};
  std::vector<std::vector<FlowIndex>> stack{from};
  while (!stack.empty()) {
    const Marking m(stack.back());
    stack.pop_back();
    for (NodeIndex n : enabled_nodes(g, m)) {
      const Node& node = g.node(n);
      if (node.type != NodeType::And && node.type != NodeType::Xor) continue;
      std::vector<std::optional<FlowIndex>> choices;
      if (node.type == NodeType::Xor && node.outgoing.size() > 1) {
        for (FlowIndex o : node.outgoing) choices.emplace_back(o);
      } else {
        choices.emplace_back(std::nullopt);
      }
      for (const auto& c : choices) {
        const Marking next = fire(g, m, n, c);
        if (seen.insert(next.flows()).second && seen.size() < 10'000) stack.push_back(next.flows());
      }
    }
  }
  return seen;
}

inline std::vector<FlowIndex> flow_indices(const WFGraph& g, const std::vector<FlowToken>& tokens) {
  std::vector<FlowIndex> out;
  for (const auto& t : tokens) out.push_back(*g.find_flow(t.flow));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::string> ongoing_labels(const CaseState& c) {
  std::vector<std::string> out;
  for (const auto& a : c.ongoing) out.push_back(a.activity);
  std::sort(out.begin(), out.end());
  return out;
}

// Same running tasks, and the engine's tokens are reachable from the
// discovered ones through gateways.
inline bool same_marking(const WFGraph& g, const CaseState& discovered, const CaseState& truth) {
  if (ongoing_labels(discovered) != ongoing_labels(truth)) return false;
  return silent_closure(g, flow_indices(g, discovered.flows)).contains(flow_indices(g, truth.flows));
}

// Discovered vs true state, over the cases the observed log shows. Times equal
// to the true arrival are compared against the first recorded start, which is
// the only arrival a log reveals.
struct RoundTrip {
  std::size_t cases = 0;
  std::size_t markings = 0;
  std::size_t enablement = 0;
  std::vector<std::string> mismatched;
};

inline RoundTrip compare_states(const WFGraph& g, const ProcessState& discovered, const ProcessState& truth,
                                const EventLog& observed) {
  RoundTrip out;
  for (const auto& t : truth.cases) {
    const Trace* trace = observed.find(t.id);
    if (trace == nullptr || trace->instances.empty()) continue;
    ++out.cases;
    const CaseState* d = discovered.find(t.id);
    if (d == nullptr || !same_marking(g, *d, t)) {
      out.mismatched.push_back(t.id);
      continue;
    }
    ++out.markings;
    const Timestamp seen_arrival = trace->arrival();
    auto map = [&](Timestamp x) { return x == t.arrival ? seen_arrival : x; };
    std::vector<Timestamp> tf;
    std::vector<Timestamp> df;
    for (const auto& f : t.flows) tf.push_back(map(f.enabled));
    for (const auto& f : d->flows) df.push_back(f.enabled);
    std::sort(tf.begin(), tf.end());
    std::sort(df.begin(), df.end());
    // Gateway firing can split or merge tokens; only their distinct times must agree.
    tf.erase(std::unique(tf.begin(), tf.end()), tf.end());
    df.erase(std::unique(df.begin(), df.end()), df.end());
    bool same = tf == df && d->arrival == seen_arrival;
    for (std::size_t i = 0; same && i < t.ongoing.size(); ++i) {
      same = d->ongoing[i].started == t.ongoing[i].started && d->ongoing[i].enabled == map(t.ongoing[i].enabled);
    }
    out.enablement += same;
  }
  return out;
}

// Simulates `cases` cases and returns the log together with a snapshot of the
// same run at `at`.
struct GeneratedRun {
  SimLog log;
  EventLog full;
  ProcessState snapshot;
};

inline GeneratedRun generate(const BPSModel& model, std::size_t cases, std::uint64_t seed, Timestamp origin,
                             Timestamp at) {
  GeneratedRun out;
  out.log = simulate(model, origin, SimulateStop{cases, std::nullopt}, seed);
  out.full = out.log.to_event_log();
  Engine engine(model, seed);
  engine.set_clock(origin);
  engine.limit_arrivals(cases);
  engine.start_arrivals(origin);
  engine.run_until(at);
  out.snapshot = engine.snapshot();
  return out;
}

}  // namespace fixtures
