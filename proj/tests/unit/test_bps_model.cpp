#include <doctest.h>

#include <cmath>
#include <random>

#include "bpsim/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fixtures;

TEST_CASE("distribution parameters are checked") {
  CHECK_THROWS_AS(Distribution(Family::Uniform, {5}), ValidationError);
  CHECK_THROWS_AS(Distribution(Family::Uniform, {5, 1}), ValidationError);
  CHECK_THROWS_AS(Distribution(Family::Exponential, {0}), ValidationError);
  CHECK_THROWS_AS(Distribution(Family::Normal, {10, -1}), ValidationError);
  CHECK_NOTHROW(Distribution(Family::Lognormal, {-2.0, 0.5}));
}

TEST_CASE("samples are positive and match the analytic mean") {
  const std::vector<Distribution> ds{
      Distribution(Family::Fixed, {30}),          Distribution(Family::Uniform, {10, 50}),
      Distribution(Family::Exponential, {120}),   Distribution(Family::Normal, {60, 20}),
      Distribution(Family::Normal, {5, 10}),      Distribution(Family::Gamma, {3, 40}),
      Distribution(Family::Lognormal, {4.0, 0.5})};
  for (const auto& d : ds) {
    std::mt19937_64 rng(42);
    double sum = 0.0;
    const int n = 40'000;
    for (int i = 0; i < n; ++i) {
      const Duration s = d.sample(rng);
      REQUIRE(s >= Duration{1});
      sum += to_seconds(s);
    }
    CHECK_MESSAGE(sum / n == doctest::Approx(d.mean_seconds()).epsilon(0.03), to_string(d.family()));
  }
}

TEST_CASE("scaling multiplies the mean") {
  const std::vector<Distribution> ds{
      Distribution(Family::Fixed, {30}),        Distribution(Family::Uniform, {10, 50}),
      Distribution(Family::Exponential, {120}), Distribution(Family::Normal, {60, 20}),
      Distribution(Family::Gamma, {3, 40}),     Distribution(Family::Lognormal, {4.0, 0.5})};
  for (const auto& d : ds) {
    CHECK(d.scaled(2.5).mean_seconds() == doctest::Approx(2.5 * d.mean_seconds()));
  }
  CHECK_THROWS_AS(ds[0].scaled(0.0), ValidationError);
}

TEST_CASE("calendar basics") {
  const Calendar office = weekdays(9, 17);
  const Timestamp monday_8 = ts("2024-03-04T08:00:00Z");
  CHECK_FALSE(office.is_on_duty(monday_8));
  CHECK(office.next_on_duty(monday_8) == ts("2024-03-04T09:00:00Z"));
  CHECK(office.next_on_duty(ts("2024-03-08T17:00:00Z")) == ts("2024-03-11T09:00:00Z"));
  CHECK(advance_over_calendar(office, ts("2024-03-04T16:00:00Z"), 2h) == ts("2024-03-05T10:00:00Z"));
  CHECK(advance_over_calendar(office, monday_8, 0h) == monday_8);
  CHECK(on_duty_time_between(office, ts("2024-03-04T00:00:00Z"), ts("2024-03-11T00:00:00Z")) == 40h);
  CHECK(office.weekly_on_duty() == 40h);

  const Calendar shifted({{0, 9h, 17h}}, 1h);  // Monday 09-17 at UTC+1
  CHECK(shifted.is_on_duty(ts("2024-03-04T08:30:00Z")));
  CHECK_FALSE(shifted.is_on_duty(ts("2024-03-04T16:30:00Z")));

  CHECK_THROWS_AS(Calendar({}), ValidationError);
  CHECK_THROWS_AS(Calendar({{0, 10h, 9h}}), ValidationError);
  CHECK_THROWS_AS(Calendar({{0, 9h, 12h}, {0, 11h, 13h}}), ValidationError);
}

TEST_CASE("on-duty time agrees with a day-by-day oracle and advance is its inverse") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Calendar cal = oracles::random_calendar(rng);
    const Timestamp t = ts("2024-01-01T00:00:00Z") + Duration(std::uniform_int_distribution<std::int64_t>(0, 60LL * 86'400'000)(rng));
    const Duration d(std::uniform_int_distribution<std::int64_t>(1, 20LL * 86'400'000)(rng));
    const Timestamp done = advance_over_calendar(cal, t, d);
    REQUIRE(on_duty_time_between(cal, t, done) == d);
    REQUIRE(oracles::brute_on_duty(cal, t, done) == d);
    REQUIRE(oracles::brute_on_duty(cal, t, done - Duration{1}) < d);
  }
}

TEST_CASE("validation of a BPS model") {
  BPSModel m = sequential_model();
  SUBCASE("valid model passes") { CHECK_NOTHROW(validate(m)); }
  SUBCASE("missing duration") {
    m.durations.erase("C");
    CHECK_THROWS_AS(validate(m), ValidationError);
  }
  SUBCASE("probabilities must sum to one") {
    m.branching["f03"] = 0.7;
    CHECK_THROWS_WITH_AS(validate(m), "branching probabilities sum 1.1 at gateway 'x1' (expected 1)",
                         ValidationError);
  }
  SUBCASE("every task needs a resource") {
    std::erase_if(m.resources, [](const ResourceProfile& r) { return r.activities.contains("E"); });
    CHECK_THROWS_AS(validate(m), ValidationError);
  }
  SUBCASE("unlisted gateways get a uniform split") {
    m.branching.erase("f09");
    m.branching.erase("f10");
    validate(m);
    CHECK(m.branching.at("f09") == doctest::Approx(0.5));
  }
  SUBCASE("partially listed gateways are rejected") {
    m.branching.erase("f10");
    CHECK_THROWS_AS(validate(m), ValidationError);
  }
}

TEST_CASE("parameter documents round-trip") {
  const WFGraph g = order_handling_graph();
  const BPSModel m = parse_params(read_text(data_path("order_handling.json")), g);
  CHECK(m.resources.size() == 4);
  CHECK(m.branch_probability(*g.find_flow("f03_express")) == doctest::Approx(0.4));
  CHECK_FALSE(m.find_resource("Alice")->calendar.is_always());
  CHECK(m.find_resource("Bob")->calendar.is_always());
  const BPSModel again = parse_params(write_params(m), g);
  CHECK(again.resources == m.resources);
  CHECK(again.durations == m.durations);
  CHECK(again.branching == m.branching);
  CHECK(again.inter_arrival == m.inter_arrival);

  CHECK_THROWS_AS(parse_params("{", g), ValidationError);
  CHECK_THROWS_AS(parse_params(R"({"arrival": {"family": "weibull", "params": [1]}, "resources": []})", g),
                  ValidationError);
}
