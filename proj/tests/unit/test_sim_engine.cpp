#include <doctest.h>

#include "bpsim/errors.hpp"
#include "bpsim/metrics.hpp"
#include "fixtures.hpp"

using namespace fixtures;

namespace {

ProcessState ongoing_orders_state() {
  return discover_state(parse_log(read_text(data_path("ongoing_orders.csv"))), order_handling_graph()).state;
}

BPSModel order_handling_stochastic() {
  return parse_params(read_text(data_path("order_handling.json")), order_handling_graph());
}

struct Row {
  const char* case_id;
  const char* activity;
  const char* start;
  const char* end;
  const char* resource;
};

void check_rows(const SimLog& log, const std::vector<Row>& rows) {
  REQUIRE(log.instances.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& got = log.instances[i];
    CAPTURE(i);
    CHECK(got.case_id == rows[i].case_id);
    CHECK(got.activity == rows[i].activity);
    CHECK(got.start == ts(rows[i].start));
    CHECK(got.end == ts(rows[i].end));
    CHECK(got.resource == std::optional<std::string>(rows[i].resource));
  }
}

}  // namespace

TEST_CASE("ongoing order forecast with fixed durations follows the hand-computed schedule") {
  const SimLog log = run_short_term(order_handling_fixed(), ongoing_orders_state(), ts("2024-03-04T13:55:00Z"), 1);
  check_rows(log, {
      {"101", "Prepare Package", "2024-03-04T08:30:00Z", "2024-03-04T10:00:00Z", "Bob"},
      {"102", "Send Invoice", "2024-03-04T09:10:00Z", "2024-03-04T10:10:00Z", "Carol"},
      {"101", "Prepare Invoice", "2024-03-04T10:10:00Z", "2024-03-04T10:40:00Z", "Carol"},
      {"101", "Send Invoice", "2024-03-04T10:40:00Z", "2024-03-04T11:40:00Z", "Carol"},
      {"case-000001", "Collect Customer Info.", "2024-03-04T13:05:00Z", "2024-03-04T13:15:00Z", "Alice"},
      {"case-000001", "Collect Express Payment", "2024-03-04T13:15:00Z", "2024-03-04T13:25:00Z", "Alice"},
      {"case-000001", "Prepare Invoice", "2024-03-04T13:25:00Z", "2024-03-04T13:55:00Z", "Carol"},
      {"case-000001", "Prepare Package", "2024-03-04T13:25:00Z", "2024-03-04T14:55:00Z", "Bob"},
      {"case-000001", "Send Invoice", "2024-03-04T13:55:00Z", "2024-03-04T14:55:00Z", "Carol"},
  });
  CHECK(log.initial_wip == 3);
  CHECK(log.origin == ts("2024-03-04T09:55:00Z"));
  REQUIRE(log.cases.size() == 4);
  CHECK(log.find_case("101")->completion == ts("2024-03-04T11:40:00Z"));
  CHECK(log.find_case("102")->completion == ts("2024-03-04T10:10:00Z"));
  CHECK(log.find_case("103")->completion == ts("2024-03-04T09:55:00Z"));
  CHECK(log.find_case("case-000001")->completion == ts("2024-03-04T14:55:00Z"));
  CHECK(log.find_case("101")->loaded);
  CHECK_FALSE(log.find_case("case-000001")->loaded);
  // Enablement recorded before the start point is carried over unchanged.
  CHECK(log.instances[2].enablement == ts("2024-03-04T08:25:00Z"));
}

TEST_CASE("arrivals beyond the horizon are not tracked") {
  const SimLog log = run_short_term(order_handling_fixed(), ongoing_orders_state(), ts("2024-03-04T13:05:00Z"), 1);
  CHECK(log.cases.size() == 3);
}

TEST_CASE("the first new arrival is never before the start point") {
  BPSModel m = order_handling_fixed();
  m.inter_arrival = fixed_min(30);  // 09:05 + 30 min lies before 09:55
  const SimLog log = run_short_term(m, ongoing_orders_state(), ts("2024-03-04T11:00:00Z"), 1);
  REQUIRE(log.find_case("case-000001"));
  CHECK(log.find_case("case-000001")->arrival == ts("2024-03-04T09:55:00Z"));
  CHECK(log.find_case("case-000002")->arrival == ts("2024-03-04T10:25:00Z"));
}

TEST_CASE("remaining time of an overdue activity is clamped at zero") {
  ProcessState state = ongoing_orders_state();
  for (auto& c : state.cases) {
    for (auto& a : c.ongoing) {
      if (a.activity == "Prepare Package") a.started = ts("2024-03-04T06:00:00Z");
    }
  }
  const SimLog log = run_short_term(order_handling_fixed(), state, state.at + 1h, 1);
  const auto it = std::find_if(log.instances.begin(), log.instances.end(), [](const ActivityInstance& i) {
    return i.case_id == "101" && i.activity == "Prepare Package";
  });
  REQUIRE(it != log.instances.end());
  CHECK(it->end == state.at);
}

TEST_CASE("an intermediate event that elapsed before the start point passes its past time on") {
  BPSModel m{event_graph(), {}, {}, {}, {}, fixed_min(60 * 24 * 30)};
  m.durations = {{"A", fixed_min(10)}, {"B", fixed_min(20)}};
  m.event_waits = {{"ev", fixed_min(60)}};
  m.resources = {resource("r1", {"A"}), resource("r2", {"B"})};
  validate(m);
  ProcessState state;
  state.at = ts("2024-03-04T10:00:00Z");
  state.cases = {{"p", ts("2024-03-04T07:00:00Z"), {{"f2", ts("2024-03-04T08:00:00Z")}}, {}},
                 {"q", ts("2024-03-04T09:00:00Z"), {{"f2", ts("2024-03-04T09:30:00Z")}}, {}}};
  const SimLog log = run_short_term(m, state, state.at, 1);
  REQUIRE(log.instances.size() == 2);
  const ActivityInstance& p = log.instances[0];
  CHECK(p.case_id == "p");
  CHECK(p.enablement == ts("2024-03-04T09:00:00Z"));
  CHECK(p.start == state.at);
  CHECK(p.end == ts("2024-03-04T10:20:00Z"));
  const ActivityInstance& q = log.instances[1];
  CHECK(q.case_id == "q");
  CHECK(q.enablement == ts("2024-03-04T10:30:00Z"));
  CHECK(q.start == ts("2024-03-04T10:30:00Z"));
}

TEST_CASE("runs are reproducible per seed") {
  const BPSModel m = order_handling_stochastic();
  const ProcessState state = ongoing_orders_state();
  const Timestamp horizon = state.at + 48h;
  const SimLog a = run_short_term(m, state, horizon, 5);
  const SimLog b = run_short_term(m, state, horizon, 5);
  const SimLog c = run_short_term(m, state, horizon, 6);
  CHECK(a == b);
  CHECK(write_simlog_csv(a) == write_simlog_csv(b));
  CHECK_FALSE(a.instances == c.instances);
}

TEST_CASE("loaded cases all count towards the initial work in progress") {
  const BPSModel m = sequential_model();
  const Timestamp origin = ts("2024-01-01T00:00:00Z");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto run = generate(m, 120, seed, origin, origin + 18h);
    const EventLog cut = truncate_log(run.full, origin + 18h);
    const ProcessState state = discover_state(cut, m.graph).state;
    const SimLog sim = run_short_term(m, state, origin + 26h, seed);
    CHECK(sim.initial_wip == state.cases.size());
    CHECK(ocd(sim, cut) == 0);
  }
}

TEST_CASE("no work starts before its enablement or before the start point") {
  const BPSModel m = order_handling_stochastic();
  const ProcessState state = ongoing_orders_state();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SimLog log = run_short_term(m, state, state.at + 72h, seed);
    for (const auto& i : log.instances) {
      REQUIRE(i.enablement);
      CHECK(*i.enablement <= i.start);
      if (i.end) CHECK(i.start <= *i.end);
      const bool loaded_running = i.start < state.at;
      if (loaded_running) {
        const CaseState* c = state.find(i.case_id);
        REQUIRE(c != nullptr);
      }
    }
    for (const auto& c : log.cases) {
      REQUIRE(c.completion);
      if (!c.loaded) {
        CHECK(c.arrival >= state.at);
        CHECK(c.arrival < state.at + 72h);
      }
    }
  }
}

TEST_CASE("the event budget stops runaway runs") {
  EngineOptions options;
  options.event_budget = 50;
  const ProcessState state = ongoing_orders_state();
  CHECK_THROWS_AS(run_short_term(order_handling_stochastic(), state, state.at + 30 * 24h, 1, options),
                  BudgetExceeded);
}

TEST_CASE("waiting work is served in enablement order or its reverse") {
  ProcessState state;
  state.at = ts("2024-03-04T10:00:00Z");
  state.cases = {
      {"x", ts("2024-03-04T08:00:00Z"), {{"f08", ts("2024-03-04T09:00:00Z")}, {"f12", ts("2024-03-04T09:00:00Z")}}, {}},
      {"y", ts("2024-03-04T08:30:00Z"), {{"f08", ts("2024-03-04T09:30:00Z")}, {"f12", ts("2024-03-04T09:30:00Z")}}, {}},
  };
  const Timestamp horizon = state.at;  // no new cases
  auto first_package = [&](DispatchPolicy p) {
    EngineOptions o;
    o.policy = p;
    const SimLog log = run_short_term(order_handling_fixed(), state, horizon, 1, o);
    REQUIRE(log.instances.size() == 2);
    CHECK(log.instances[0].start == state.at);
    CHECK(log.instances[1].start == state.at + 90min);
    return log.instances[0].case_id;
  };
  CHECK(first_package(DispatchPolicy::Fifo) == "x");
  CHECK(first_package(DispatchPolicy::Lifo) == "y");
}

TEST_CASE("off-duty resources pick work up at their next shift and pause over breaks") {
  BPSModel m{sequential_graph(), {}, {}, {}, {}, fixed_min(60 * 24 * 30)};
  m.durations = {{"A", fixed_min(120)}, {"B", fixed_min(60)}, {"C", fixed_min(60)}, {"D", fixed_min(60)},
                 {"E", fixed_min(60)}};
  m.branching = {{"f03", 1.0}, {"f04", 0.0}, {"f09", 1.0}, {"f10", 0.0}};
  m.resources = {resource("office", {"A"}, weekdays(9, 17)), resource("r", {"B", "C", "D", "E"})};
  validate(m);
  ProcessState state;
  state.at = ts("2024-03-08T16:00:00Z");  // Friday
  state.cases = {{"1", state.at, {}, {{"A", state.at, state.at, {"office"}}}},
                 {"2", state.at, {{"f01", state.at}}, {}}};
  const SimLog log = run_short_term(m, state, state.at, 1);
  REQUIRE(log.instances.size() == 8);
  std::map<std::pair<std::string, std::string>, ActivityInstance> by;
  for (const auto& i : log.instances) by[{i.case_id, i.activity}] = i;
  CHECK(by[{"1", "A"}].end == ts("2024-03-11T10:00:00Z"));
  CHECK(by[{"2", "A"}].start == ts("2024-03-11T10:00:00Z"));
  CHECK(by[{"2", "A"}].end == ts("2024-03-11T12:00:00Z"));
  CHECK(by[{"1", "B"}].start == ts("2024-03-11T10:00:00Z"));
}

TEST_CASE("an empty state reproduces a plain simulation") {
  const BPSModel m = order_handling_stochastic();
  const Timestamp start = ts("2024-03-04T00:00:00Z");
  const Timestamp horizon = start + 72h;
  const SimLog plain = simulate(m, start, SimulateStop{std::nullopt, horizon}, 9);
  const SimLog loaded = run_short_term(m, ProcessState{start, {}}, horizon, 9);
  CHECK(loaded.instances == plain.instances);
  CHECK(loaded.cases == plain.cases);
  CHECK(loaded.initial_wip == 0);
}

TEST_CASE("simulate honours a case count") {
  const SimLog log = simulate(sequential_model(), ts("2024-01-01T00:00:00Z"), SimulateStop{25, std::nullopt}, 2);
  CHECK(log.cases.size() == 25);
  for (const auto& c : log.cases) CHECK(c.completion);
  CHECK_THROWS_AS(simulate(sequential_model(), ts("2024-01-01T00:00:00Z"), SimulateStop{}, 2), ValidationError);
}

TEST_CASE("simulation logs round-trip through CSV") {
  const ProcessState state = ongoing_orders_state();
  const SimLog log = run_short_term(order_handling_stochastic(), state, state.at + 24h, 3);
  const SimLog again = parse_simlog_csv(write_simlog_csv(log));
  CHECK(again.instances == log.instances);
  // Rows carry cases through their instances; 103 has none left to run.
  std::vector<CaseRecord> with_rows;
  for (const auto& c : log.cases) {
    if (c.id != "103") with_rows.push_back(c);
  }
  REQUIRE(again.cases.size() == with_rows.size());
  for (std::size_t i = 0; i < with_rows.size(); ++i) {
    CHECK(again.cases[i].id == with_rows[i].id);
    CHECK(again.cases[i].arrival == with_rows[i].arrival);
    CHECK(again.cases[i].completion == with_rows[i].completion);
  }
  CHECK(write_simlog_csv(again) == write_simlog_csv(log));
}

TEST_CASE("states that do not fit the model are rejected") {
  ProcessState state = ongoing_orders_state();
  state.cases[0].flows.push_back({"f99", state.at});
  CHECK_THROWS_AS(run_short_term(order_handling_fixed(), state, state.at + 1h, 1), ValidationError);
  CHECK_THROWS_AS(run_short_term(order_handling_fixed(), ongoing_orders_state(), state.at - 1h, 1), ValidationError);
}

TEST_CASE("warm-up baseline") {
  const BPSModel m = order_handling_stochastic();
  const Timestamp start = ts("2024-03-06T12:00:00Z");
  const Timestamp horizon = start + 24h;
  SUBCASE("a zero target stops at once") {
    const SimLog log = warmup_short_term(m, 0, start, horizon, 4);
    CHECK(log.warmup_stop == "target");
    CHECK(log.initial_wip == 0);
    CHECK(log.origin == start);
  }
  SUBCASE("an unreachable target runs the full period") {
    const SimLog log = warmup_short_term(m, 10'000, start, horizon, 4);
    CHECK(log.warmup_stop == "max_period");
    std::size_t loaded = 0;
    for (const auto& c : log.cases) loaded += c.loaded;
    CHECK(loaded == log.initial_wip);
  }
  SUBCASE("a reachable target is met exactly") {
    const SimLog log = warmup_short_term(m, 2, start, horizon, 4);
    if (log.warmup_stop == "target") CHECK(log.initial_wip == 2);
    for (const auto& i : log.instances) {
      if (i.start >= start) CHECK(i.start >= *i.enablement);
    }
    for (const auto& c : log.cases) {
      if (!c.loaded) CHECK(c.arrival >= start);
    }
  }
  CHECK_THROWS_AS(warmup_short_term(m, 1, start, start, 1), ValidationError);
}
