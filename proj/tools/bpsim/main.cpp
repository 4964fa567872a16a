#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpsim/bps_model.hpp"
#include "bpsim/errors.hpp"
#include "bpsim/evaluation.hpp"
#include "bpsim/event_log.hpp"
#include "bpsim/marking_index.hpp"
#include "bpsim/process_model.hpp"
#include "bpsim/service/server.hpp"
#include "bpsim/sim_engine.hpp"
#include "bpsim/state_discovery.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bpsim;

namespace {

struct Args {
  std::string model;
  std::string params;
  std::string log;
  std::string state;
  std::string start_time;
  std::string horizon;
  std::string config;
  std::size_t runs = 1;
  std::uint64_t seed = 1;
  std::size_t m = 5;
  double concurrency_threshold = kDefaultConcurrencyThreshold;
  std::size_t ngram_n = 3;
  std::string dispatch = "fifo";
  std::size_t event_budget = EngineOptions{}.event_budget;
  std::string out = ".";
  std::optional<std::size_t> cases;
  std::vector<double> fractions{0.1, 0.5, 0.9};
  double percentile = 0.9;
  int port = 8090;
  std::size_t workers = 2;
  std::size_t ttl_seconds = 3600;
  std::string persist_dir;
  std::string ui_dir;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_output(const Args& a, const std::string& name, const std::string& content) {
  fs::create_directories(a.out);
  const fs::path p = fs::path(a.out) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + p.string() + "'");
  out << content;
  std::cout << "wrote " << p.string() << '\n';
  return p;
}

void print_config(const std::string& command, const json& config) {
  std::cout << command << " config " << config.dump() << '\n';
}

BPSModel load_model(const Args& a) {
  if (a.model.empty()) throw ValidationError("--model is required");
  if (a.params.empty()) throw ValidationError("--params is required");
  const WFGraph graph = parse_bpmn(read_file(a.model));
  return parse_params(read_file(a.params), graph);
}

EngineOptions engine_options(const Args& a) {
  EngineOptions o;
  o.policy = parse_policy(a.dispatch);
  o.event_budget = a.event_budget;
  return o;
}

DiscoveryConfig discovery_config(const Args& a) {
  DiscoveryConfig c;
  c.m = a.m;
  c.concurrency_threshold = a.concurrency_threshold;
  return c;
}

// A timestamp, or a duration counted from `base`.
Timestamp resolve_horizon(const std::string& text, Timestamp base) {
  try {
    return parse_timestamp(text);
  } catch (const ValidationError&) {
    return base + parse_duration(text);
  }
}

std::string run_name(const std::string& command, const Args& a, std::size_t run, Timestamp t) {
  return command + "_seed" + std::to_string(a.seed) + "_run" + std::to_string(run) + "_" +
         format_timestamp_compact(t);
}

void write_run(const Args& a, const std::string& name, const SimLog& log) {
  write_output(a, name + ".csv", write_simlog_csv(log));
  write_output(a, name + ".meta.json", write_simlog_metadata(log));
}

json diagnostics_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) {
    out.push_back({{"case_id", d.case_id}, {"kind", std::string(to_string(d.kind))}, {"detail", d.detail}});
  }
  return out;
}

// Discovered state from --state or, failing that, from --log.
ProcessState load_state(const Args& a, const WFGraph& graph) {
  if (!a.state.empty()) return parse_state(read_file(a.state));
  if (a.log.empty()) throw ValidationError("--state or --log is required");
  EventLog log = parse_log(read_file(a.log));
  if (!a.start_time.empty()) log = truncate_log(log, parse_timestamp(a.start_time));
  return discover_state(log, graph, discovery_config(a)).state;
}

int cmd_discover(const Args& a) {
  print_config("discover", {{"model", a.model},
                            {"log", a.log},
                            {"start_time", a.start_time},
                            {"m", a.m},
                            {"concurrency_threshold", a.concurrency_threshold},
                            {"out", a.out}});
  if (a.model.empty() || a.log.empty()) throw ValidationError("--model and --log are required");
  const WFGraph graph = parse_bpmn(read_file(a.model));
  EventLog log = parse_log(read_file(a.log));
  if (!a.start_time.empty()) log = truncate_log(log, parse_timestamp(a.start_time));
  const DiscoveryResult result = discover_state(log, graph, discovery_config(a));
  const std::string name = "discover_" + format_timestamp_compact(result.state.at);
  write_output(a, name + ".state.json", write_state(result.state, 2));
  write_output(a, name + ".diagnostics.json", diagnostics_json(result.diagnostics).dump(2));
  std::cout << result.state.cases.size() << " cases, state " << state_hash(result.state) << ", "
            << result.diagnostics.size() << " diagnostics\n";
  for (const auto& d : result.diagnostics) {
    std::cout << "  " << d.case_id << ": " << to_string(d.kind) << ": " << d.detail << '\n';
  }
  return 0;
}

int cmd_simulate(const Args& a) {
  print_config("simulate", {{"model", a.model},
                            {"params", a.params},
                            {"start_time", a.start_time},
                            {"horizon", a.horizon},
                            {"cases", a.cases ? json(*a.cases) : json(nullptr)},
                            {"runs", a.runs},
                            {"seed", a.seed},
                            {"dispatch", a.dispatch},
                            {"event_budget", a.event_budget},
                            {"out", a.out}});
  const BPSModel model = load_model(a);
  if (a.start_time.empty()) throw ValidationError("--start-time is required");
  const Timestamp start = parse_timestamp(a.start_time);
  SimulateStop stop;
  stop.max_cases = a.cases;
  if (!a.horizon.empty()) stop.until = resolve_horizon(a.horizon, start);
  for (std::size_t r = 0; r < a.runs; ++r) {
    const SimLog log = simulate(model, start, stop, a.seed + r, engine_options(a));
    write_run(a, run_name("simulate", a, r, start), log);
  }
  return 0;
}

int cmd_shortsim(const Args& a) {
  print_config("shortsim", {{"model", a.model},
                            {"params", a.params},
                            {"state", a.state},
                            {"log", a.log},
                            {"start_time", a.start_time},
                            {"horizon", a.horizon},
                            {"runs", a.runs},
                            {"seed", a.seed},
                            {"m", a.m},
                            {"concurrency_threshold", a.concurrency_threshold},
                            {"dispatch", a.dispatch},
                            {"event_budget", a.event_budget},
                            {"out", a.out}});
  const BPSModel model = load_model(a);
  const ProcessState state = load_state(a, model.graph);
  if (a.horizon.empty()) throw ValidationError("--horizon is required");
  const Timestamp horizon = resolve_horizon(a.horizon, state.at);
  for (std::size_t r = 0; r < a.runs; ++r) {
    const SimLog log = run_short_term(model, state, horizon, a.seed + r, engine_options(a));
    write_run(a, run_name("shortsim", a, r, state.at), log);
  }
  return 0;
}

int cmd_warmup(const Args& a) {
  print_config("warmup", {{"model", a.model},
                          {"params", a.params},
                          {"state", a.state},
                          {"log", a.log},
                          {"start_time", a.start_time},
                          {"horizon", a.horizon},
                          {"runs", a.runs},
                          {"seed", a.seed},
                          {"dispatch", a.dispatch},
                          {"event_budget", a.event_budget},
                          {"out", a.out}});
  const BPSModel model = load_model(a);
  std::size_t target = 0;
  Timestamp start{};
  if (!a.state.empty()) {
    const ProcessState state = parse_state(read_file(a.state));
    target = state.cases.size();
    start = state.at;
  } else if (!a.log.empty()) {
    EventLog log = parse_log(read_file(a.log));
    if (!a.start_time.empty()) log = truncate_log(log, parse_timestamp(a.start_time));
    target = log.traces.size();
    start = log.reference_time;
  } else {
    throw ValidationError("--state or --log is required");
  }
  if (!a.start_time.empty()) start = parse_timestamp(a.start_time);
  if (a.horizon.empty()) throw ValidationError("--horizon is required");
  const Timestamp horizon = resolve_horizon(a.horizon, start);
  std::cout << "target WIP " << target << '\n';
  for (std::size_t r = 0; r < a.runs; ++r) {
    const SimLog log = warmup_short_term(model, target, start, horizon, a.seed + r, engine_options(a));
    std::cout << "run " << r << ": warm-up stopped at " << log.warmup_stop << ", initial WIP "
              << log.initial_wip << '\n';
    write_run(a, run_name("warmup", a, r, start), log);
  }
  return 0;
}

int cmd_evaluate(const Args& a) {
  EvaluationConfig c;
  if (!a.config.empty()) c = parse_evaluation_config(read_file(a.config));
  c.runs = a.runs;
  c.seed_base = a.seed;
  c.ngram_n = a.ngram_n;
  c.m = a.m;
  c.concurrency_threshold = a.concurrency_threshold;
  c.fractions = a.fractions;
  c.percentile = a.percentile;
  c.engine = engine_options(a);
  if (!a.start_time.empty()) c.start_points = {parse_timestamp(a.start_time)};
  print_config("evaluate", json::parse(write_evaluation_config(c)));

  const BPSModel model = load_model(a);
  if (a.log.empty()) throw ValidationError("--log is required");
  const EventLog truth = parse_log(read_file(a.log));
  const EvaluationReport report = evaluate(model, truth, c);
  write_output(a, "evaluate_seed" + std::to_string(a.seed) + "_" +
                      format_timestamp_compact(truth.reference_time) + ".json",
               write_report(report));
  std::cout << format_table(report);
  return 0;
}

service::HttpServer* g_server = nullptr;

int cmd_serve(const Args& a) {
  print_config("serve", {{"port", a.port},
                         {"workers", a.workers},
                         {"ttl_seconds", a.ttl_seconds},
                         {"persist_dir", a.persist_dir},
                         {"ui_dir", a.ui_dir}});
  service::ServiceOptions so;
  so.workers = a.workers;
  so.session_ttl = std::chrono::seconds(a.ttl_seconds);
  if (!a.persist_dir.empty()) so.persist_dir = a.persist_dir;
  service::ForecastService svc(so);
  service::ServerOptions ho;
  ho.port = a.port;
  if (!a.ui_dir.empty()) ho.ui_dir = a.ui_dir;
  service::HttpServer server(svc, ho);
  const int port = server.bind();
  std::cout << "listening on http://127.0.0.1:" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Short-term business process simulation from the current state"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", a.model, "BPMN model");
    sub->add_option("--params", a.params, "simulation parameters (JSON)");
    sub->add_option("--out", a.out, "output directory");
  };
  auto sim = [&](CLI::App* sub) {
    sub->add_option("--runs", a.runs, "number of runs")->check(CLI::PositiveNumber);
    sub->add_option("--seed", a.seed, "base seed; run r uses seed + r");
    sub->add_option("--dispatch", a.dispatch, "work-item order")->check(CLI::IsMember({"fifo", "lifo"}));
    sub->add_option("--event-budget", a.event_budget, "events per run before giving up");
  };
  auto disc = [&](CLI::App* sub) {
    sub->add_option("--m", a.m, "marking-index window")->check(CLI::PositiveNumber);
    sub->add_option("--concurrency-threshold", a.concurrency_threshold, "concurrency oracle threshold")
        ->check(CLI::Range(0.0, 1.0));
  };

  auto* discover = app.add_subcommand("discover", "discover the state of ongoing cases");
  common(discover);
  disc(discover);
  discover->add_option("--log", a.log, "event log (CSV)");
  discover->add_option("--start-time", a.start_time, "truncate the log at this instant first");

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate from an empty state");
  common(simulate_cmd);
  sim(simulate_cmd);
  simulate_cmd->add_option("--start-time", a.start_time, "first instant");
  simulate_cmd->add_option("--horizon", a.horizon, "end of arrivals (timestamp or duration)");
  simulate_cmd->add_option("--cases", a.cases, "number of cases");

  auto* shortsim = app.add_subcommand("shortsim", "short-term simulation from a discovered state");
  common(shortsim);
  sim(shortsim);
  disc(shortsim);
  shortsim->add_option("--state", a.state, "process state (JSON)");
  shortsim->add_option("--log", a.log, "ongoing log to discover the state from");
  shortsim->add_option("--start-time", a.start_time, "truncate --log at this instant");
  shortsim->add_option("--horizon", a.horizon, "timestamp, or duration after the state's time");

  auto* warmup = app.add_subcommand("warmup", "short-term simulation after a warm-up from empty");
  common(warmup);
  sim(warmup);
  warmup->add_option("--state", a.state, "process state whose case count is the target");
  warmup->add_option("--log", a.log, "ongoing log whose case count is the target");
  warmup->add_option("--start-time", a.start_time, "forecast start");
  warmup->add_option("--horizon", a.horizon, "timestamp, or duration after the start");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "compare both approaches against a full log");
  common(evaluate_cmd);
  sim(evaluate_cmd);
  disc(evaluate_cmd);
  evaluate_cmd->add_option("--log", a.log, "complete event log (CSV)");
  evaluate_cmd->add_option("--config", a.config, "evaluation config (JSON); flags win");
  evaluate_cmd->add_option("--ngram-n", a.ngram_n, "n-gram size")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--fractions", a.fractions, "workload fractions for start points");
  evaluate_cmd->add_option("--percentile", a.percentile, "cycle-time percentile for the horizon");
  evaluate_cmd->add_option("--start-time", a.start_time, "single start point instead of fractions");

  auto* serve = app.add_subcommand("serve", "run the HTTP forecast service");
  serve->add_option("--port", a.port, "port on 127.0.0.1 (0 picks one)");
  serve->add_option("--workers", a.workers, "concurrent forecasts")->check(CLI::PositiveNumber);
  serve->add_option("--ttl", a.ttl_seconds, "session lifetime in seconds");
  serve->add_option("--persist-dir", a.persist_dir, "directory for session persistence");
  serve->add_option("--ui-dir", a.ui_dir, "static files served under /ui");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*discover) return cmd_discover(a);
    if (*simulate_cmd) return cmd_simulate(a);
    if (*shortsim) return cmd_shortsim(a);
    if (*warmup) return cmd_warmup(a);
    if (*evaluate_cmd) return cmd_evaluate(a);
    if (*serve) return cmd_serve(a);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
