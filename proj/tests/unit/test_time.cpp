#include <doctest.h>

#include "bpsim/errors.hpp"
#include "bpsim/time.hpp"

using namespace bpsim;
using namespace std::chrono_literals;

TEST_CASE("timestamps parse with offsets and render in UTC") {
  const Timestamp t = parse_timestamp("2024-03-01T08:00:00+02:00");
  CHECK(format_timestamp(t) == "2024-03-01T06:00:00+00:00");
  CHECK(parse_timestamp("2024-03-01T06:00:00Z") == t);
  CHECK(parse_timestamp("2024-03-01 06:00:00") == t);
  CHECK(format_timestamp(parse_timestamp("2024-03-01T06:00:00.250Z")) == "2024-03-01T06:00:00.250+00:00");
  CHECK(format_timestamp_compact(t) == "20240301T060000Z");
}

TEST_CASE("malformed timestamps are validation errors") {
  CHECK_THROWS_AS(parse_timestamp("yesterday"), ValidationError);
  CHECK_THROWS_AS(parse_timestamp("2024-13-01T00:00:00Z"), ValidationError);
  CHECK_THROWS_AS(parse_timestamp(""), ValidationError);
}

TEST_CASE("durations accept plain seconds, units and ISO forms") {
  CHECK(parse_duration("3600") == 1h);
  CHECK(parse_duration("90s") == 90s);
  CHECK(parse_duration("1h30m") == 90min);
  CHECK(parse_duration("2d") == 48h);
  CHECK(parse_duration("PT8H") == 8h);
  CHECK(parse_duration("P1DT2H") == 26h);
  CHECK_THROWS_AS(parse_duration("soon"), ValidationError);
}

TEST_CASE("times of day and UTC offsets") {
  CHECK(parse_time_of_day("09:30") == 9h + 30min);
  CHECK(parse_time_of_day("24:00") == 24h);
  CHECK_THROWS_AS(parse_time_of_day("25:00"), ValidationError);
  CHECK(parse_utc_offset("+02:00") == 2h);
  CHECK(parse_utc_offset("-0530") == -(5h + 30min));
  CHECK(parse_utc_offset("Z") == 0h);
}

TEST_CASE("second conversions round to milliseconds") {
  CHECK(from_seconds(1.0004) == 1000ms);
  CHECK(from_seconds(1.0006) == 1001ms);
  CHECK(to_hours(90min) == doctest::Approx(1.5));
}
