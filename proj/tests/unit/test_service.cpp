#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <thread>

#include "bpsim/errors.hpp"
#include "bpsim/service/forecast.hpp"
#include "bpsim/service/scenario.hpp"
#include "bpsim/service/server.hpp"
#include "fixtures.hpp"

using namespace fixtures;
using namespace bpsim::service;
using nlohmann::json;

namespace {

json session_body(const char* params = "order_handling_fixed.json") {
  return {{"model", read_text(data_path("order_handling.bpmn"))},
          {"params", json::parse(read_text(data_path(params)))},
          {"log", read_text(data_path("ongoing_orders.csv"))}};
}

ProcessState ongoing_orders_state() {
  return discover_state(parse_log(read_text(data_path("ongoing_orders.csv"))), order_handling_graph()).state;
}

BPSModel stochastic() { return parse_params(read_text(data_path("order_handling.json")), order_handling_graph()); }

const CaseForecast& case_of(const Forecast& f, const std::string& id) {
  return *std::find_if(f.cases.begin(), f.cases.end(), [&](const CaseForecast& c) { return c.case_id == id; });
}

}  // namespace

TEST_CASE("scenario documents") {
  const Scenario s = parse_scenario(json::parse(R"({
      "id": "more-staff", "horizon_hours": 12, "runs": 5, "seed": 3, "dispatch": "lifo",
      "wip_step_minutes": 30,
      "add_resources": [{"id": "Erin", "activities": ["Prepare Package"]}],
      "remove_resources": ["Dave"],
      "calendars": {"Alice": {"timezone": "+01:00", "calendar": [{"day": "MON", "from": "09:00", "to": "17:00"}]}},
      "arrival_scale": 1.5, "duration_scale": {"Prepare Package": 2.0},
      "branching": {"f03_express": 3, "f04_standard": 1}})"));
  CHECK(s.id == "more-staff");
  CHECK(s.horizon_for(ts("2024-01-01T00:00:00Z")) == ts("2024-01-01T12:00:00Z"));
  CHECK(s.runs == 5);
  CHECK(s.policy == DispatchPolicy::Lifo);
  CHECK(s.wip_step == 30min);
  CHECK(s.calendars.at("Alice").utc_offset() == 1h);
  const Scenario again = parse_scenario(scenario_json(s));
  CHECK(again.add_resources == s.add_resources);
  CHECK(again.calendars == s.calendars);
  CHECK(again.branching == s.branching);
  CHECK(again.wip_step == s.wip_step);

  const Scenario defaults = parse_scenario(json::object());
  CHECK(defaults.id == "as-is");
  CHECK(defaults.horizon_for(ts("2024-01-01T00:00:00Z")) == ts("2024-01-02T00:00:00Z"));
  CHECK_THROWS_AS(parse_scenario(json{{"runs", 0}}), ValidationError);
  CHECK_THROWS_AS(parse_scenario(json{{"runs", 1001}}), ValidationError);
  CHECK_THROWS_AS(parse_scenario(json{{"arrival_scale", -1}}), ValidationError);
}

TEST_CASE("applying a scenario") {
  const BPSModel base = stochastic();
  Scenario s;
  SUBCASE("branching weights are re-normalized per gateway") {
    s.branching = {{"f03_express", 3.0}};
    const BPSModel m = apply_scenario(base, s);
    // 3 against the base weight 0.6 of the other exit.
    CHECK(m.branching.at("f03_express") == doctest::Approx(3.0 / 3.6));
    CHECK(m.branching.at("f04_standard") == doctest::Approx(0.6 / 3.6));
  }
  SUBCASE("scales") {
    s.arrival_scale = 2.0;
    s.duration_scale = {{"Prepare Package", 2.0}};
    const BPSModel m = apply_scenario(base, s);
    CHECK(m.inter_arrival.mean_seconds() == doctest::Approx(base.inter_arrival.mean_seconds() / 2));
    CHECK(m.durations.at("Prepare Package").mean_seconds() ==
          doctest::Approx(2 * base.durations.at("Prepare Package").mean_seconds()));
  }
  SUBCASE("resources") {
    s.add_resources = {resource("Erin", {"Prepare Package", "Collect Standard Payment"})};
    s.remove_resources = {"Dave"};
    s.calendars = {{"Bob", weekdays(8, 12)}};
    const BPSModel m = apply_scenario(base, s);
    CHECK(m.find_resource("Erin"));
    CHECK_FALSE(m.find_resource("Dave"));
    CHECK(m.find_resource("Bob")->calendar == weekdays(8, 12));
  }
  SUBCASE("invalid overrides") {
    s.remove_resources = {"Bob"};  // the only packer
    CHECK_THROWS_AS(apply_scenario(base, s), ValidationError);
    s.remove_resources = {"Nobody"};
    CHECK_THROWS_AS(apply_scenario(base, s), ValidationError);
    s.remove_resources.clear();
    s.branching = {{"f01", 1.0}};
    CHECK_THROWS_AS(apply_scenario(base, s), ValidationError);
    s.branching = {{"f03_express", 0.0}, {"f04_standard", 0.0}};
    CHECK_THROWS_AS(apply_scenario(base, s), ValidationError);
    s.branching.clear();
    s.duration_scale = {{"Nap", 2.0}};
    CHECK_THROWS_AS(apply_scenario(base, s), ValidationError);
  }
}

TEST_CASE("forecast of the ongoing order log with fixed durations") {
  Scenario s;
  s.runs = 3;
  s.horizon = ts("2024-03-04T13:55:00Z");
  const Forecast f = run_forecast(order_handling_fixed(), ongoing_orders_state(), s);
  CHECK(f.ongoing == 3);
  REQUIRE(f.cases.size() == 3);
  CHECK(case_of(f, "101").mean_hours == doctest::Approx(1.75));
  CHECK(case_of(f, "101").min_hours == doctest::Approx(1.75));
  CHECK(case_of(f, "101").max_hours == doctest::Approx(1.75));
  CHECK(case_of(f, "102").mean_hours == doctest::Approx(0.25));
  CHECK(case_of(f, "103").mean_hours == doctest::Approx(0.0));
  CHECK(*f.mean_remaining_hours == doctest::Approx(2.0 / 3.0));
  REQUIRE_FALSE(f.wip.empty());
  CHECK(f.wip.front().at == ts("2024-03-04T09:55:00Z"));
  CHECK(f.wip.front().mean == 3.0);
  // 10:55: only 101 remains; 13:55: case-000001 has arrived.
  CHECK(f.wip[1].mean == 1.0);
  CHECK(f.wip[4].mean == 1.0);
  CHECK(f.wip.back().at == ts("2024-03-04T14:55:00Z"));
  // Four cases in scope, case-000001 completes after the horizon.
  CHECK(f.completed_by_horizon == 3.0);
  double histogram_total = 0;
  for (const auto& b : f.completion_histogram) histogram_total += b.count;
  CHECK(histogram_total == 4.0);

  const json j = forecast_json(f);
  CHECK(j["ongoing"] == 3);
  CHECK(j["cases"].size() == 3);
  CHECK(j["per_run_mean_remaining_hours"].size() == 3);
}

TEST_CASE("scenario effects on the forecast") {
  const BPSModel base = stochastic();
  const ProcessState state = ongoing_orders_state();
  Scenario as_is;
  as_is.runs = 20;

  SUBCASE("identical scenarios compare to zero") {
    const Forecast a = run_forecast(base, state, as_is);
    const Forecast b = run_forecast(base, state, as_is);
    const json d = compare_json(a, b)["deltas"];
    CHECK(d["completed_by_horizon"] == 0.0);
    CHECK(d["mean_remaining_hours"] == 0.0);
    for (const auto& c : d["cases"]) CHECK(c["mean_remaining_hours"] == 0.0);
    for (const auto& w : d["wip"]) CHECK(w["mean"] == 0.0);
  }
  SUBCASE("slower work takes longer") {
    Scenario slow = as_is;
    slow.duration_scale = {{"Prepare Package", 2.0}, {"Send Invoice", 2.0}};
    const Forecast a = run_forecast(base, state, as_is);
    const Forecast b = run_forecast(base, state, slow);
    CHECK(*b.mean_remaining_hours > *a.mean_remaining_hours);
  }
  SUBCASE("an extra resource does not slow ongoing cases down") {
    Scenario more = as_is;
    more.add_resources = {resource("Carol2", {"Prepare Invoice", "Send Invoice"})};
    const Forecast a = run_forecast(order_handling_fixed(), state, as_is);
    const Forecast b = run_forecast(order_handling_fixed(), state, more);
    CHECK(compare_json(a, b)["deltas"]["mean_remaining_hours"].get<double>() <= 0.0);
    CHECK(*b.mean_remaining_hours < *a.mean_remaining_hours);  // 101 no longer waits for Carol
  }
}

TEST_CASE("forecast service without HTTP") {
  ForecastService service(ServiceOptions{1, 1, std::chrono::seconds(3600), std::nullopt});
  const Response created = service.create_session(session_body());
  REQUIRE(created.status == 201);
  const std::string id = created.body["session_id"];
  CHECK(created.body["summary"]["cases"] == 3);
  CHECK(created.body["state_hash"] == "007c0dc1f631071f");
  CHECK(service.create_session(session_body()).body["state_hash"] == created.body["state_hash"]);

  CHECK(service.get_session(id).status == 200);
  CHECK(service.get_session("nope").status == 404);
  CHECK(service.submit_forecast("nope", json::object(), true).status == 404);

  json bad = session_body();
  bad["log"] = read_text(data_path("missing_column.csv"));
  const Response rejected = service.create_session(bad);
  CHECK(rejected.status == 422);
  CHECK(rejected.body["error"].get<std::string>().find("missing required column") != std::string::npos);
  CHECK(service.create_session(json{{"model", "x"}}).status == 422);

  const Response invalid = service.submit_forecast(id, json{{"remove_resources", {"Bob"}}}, true);
  CHECK(invalid.status == 422);

  const Response done = service.submit_forecast(id, json{{"runs", 2}, {"horizon_hours", 4}}, true);
  REQUIRE(done.status == 200);
  CHECK(done.body["status"] == "done");
  CHECK(done.body["result"]["ongoing"] == 3);

  SUBCASE("a full queue answers 409") {
    const json slow{{"runs", 50}, {"horizon_hours", 24 * 30}};
    const Response first = service.submit_forecast(id, slow, false);
    REQUIRE(first.status == 202);
    CHECK(service.submit_forecast(id, slow, false).status == 409);
    const std::string job = first.body["job_id"];
    CHECK(service.get_job(id, job).status == 200);
    CHECK(service.get_job(id, "j999999").status == 404);
  }
  SUBCASE("compare") {
    const Response c = service.compare(id, json{{"a", {{"runs", 2}}}, {"b", {{"runs", 2}, {"id", "b"}}}});
    REQUIRE(c.status == 200);
    CHECK(c.body["deltas"]["mean_remaining_hours"] == 0.0);
    const Response broken = service.compare(id, json{{"a", json::object()}, {"b", {{"arrival_scale", 0}}}});
    CHECK(broken.status == 422);
  }
  CHECK(ForecastService::openapi()["paths"].contains("/sessions"));
}

TEST_CASE("sessions persist across restarts and expire") {
  const auto dir = std::filesystem::temp_directory_path() / "bpsim_service_test";
  std::filesystem::remove_all(dir);
  std::string id;
  {
    ForecastService service(ServiceOptions{1, 4, std::chrono::seconds(3600), dir});
    id = service.create_session(session_body()).body["session_id"];
  }
  {
    ForecastService service(ServiceOptions{1, 4, std::chrono::seconds(3600), dir});
    CHECK(service.get_session(id).status == 200);
    CHECK(service.get_session(id).body["state_hash"] == "007c0dc1f631071f");
  }
  {
    ForecastService service(ServiceOptions{1, 4, std::chrono::seconds(0), std::nullopt});
    service.create_session(session_body());
    std::this_thread::sleep_for(std::chrono::milliseconds(1100));
    CHECK(service.expire_sessions() == 1);
    CHECK(service.session_count() == 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("HTTP routes") {
  ForecastService service(ServiceOptions{2, 4, std::chrono::seconds(3600), std::nullopt});
  HttpServer server(service, ServerOptions{"127.0.0.1", 0, std::nullopt});
  const int port = server.bind();
  std::thread serving([&] { server.serve(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  auto spec = client.Get("/spec");
  REQUIRE(spec);
  CHECK(spec->status == 200);
  CHECK(json::parse(spec->body).contains("openapi"));

  auto created = client.Post("/sessions", session_body().dump(), "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const std::string id = json::parse(created->body)["session_id"];

  auto fetched = client.Get(("/sessions/" + id).c_str());
  REQUIRE(fetched);
  CHECK(fetched->status == 200);
  CHECK(json::parse(fetched->body)["summary"]["cases"] == 3);
  CHECK(client.Get("/sessions/s999999")->status == 404);
  CHECK(client.Post("/sessions", "{not json", "application/json")->status == 400);

  auto waited = client.Post(("/sessions/" + id + "/forecast?wait=true").c_str(),
                            json{{"runs", 2}, {"horizon_hours", 4}}.dump(), "application/json");
  REQUIRE(waited);
  CHECK(waited->status == 200);
  CHECK(json::parse(waited->body)["result"]["cases"].size() == 3);

  auto queued = client.Post(("/sessions/" + id + "/forecast").c_str(), json{{"runs", 2}}.dump(), "application/json");
  REQUIRE(queued);
  CHECK(queued->status == 202);
  const std::string job = json::parse(queued->body)["job_id"];
  std::string status;
  for (int i = 0; i < 600 && status != "done"; ++i) {
    auto polled = client.Get(("/sessions/" + id + "/forecast/" + job).c_str());
    REQUIRE(polled);
    status = json::parse(polled->body)["status"];
    if (status != "done") std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  CHECK(status == "done");

  auto compared = client.Post(("/sessions/" + id + "/compare").c_str(),
                              json{{"a", {{"runs", 2}}}, {"b", {{"runs", 2}}}}.dump(), "application/json");
  REQUIRE(compared);
  CHECK(compared->status == 200);

  server.stop();
  serving.join();
}
