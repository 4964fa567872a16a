#include "bpsim/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <future>

#include <json.hpp>

#include "bpsim/errors.hpp"
#include "bpsim/marking_index.hpp"
#include "bpsim/metrics.hpp"
#include "bpsim/state_discovery.hpp"

namespace bpsim {
namespace {

using json = nlohmann::json;

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json report_json(const MetricReport& r) {
  json runs = json::array();
  for (const auto& run : r.per_run) {
    runs.push_back({{"seed", run.seed},
                    {"ocd", run.ocd},
                    {"ngd", optional_number(run.ngd)},
                    {"rctd", optional_number(run.rctd)}});
  }
  return {{"ocd", r.ocd},
          {"ngd", optional_number(r.ngd)},
          {"rctd", optional_number(r.rctd)},
          {"runs", r.runs},
          {"per_run", std::move(runs)}};
}

template <class F>
std::optional<double> defined(F&& f) {
  try {
    return f();
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

struct RunPair {
  RunMetrics procstate;
  RunMetrics warmup;
};

struct PointInput {
  Timestamp start;
  Timestamp horizon;
  std::size_t truth_ongoing;
  ProcessState state;
  std::vector<LabelSequence> truth_sequences;
  std::vector<double> truth_remaining;
};

RunMetrics score(const SimLog& sim, const PointInput& p, std::size_t n) {
  RunMetrics m;
  m.seed = sim.seed;
  m.ocd = ocd(sim.initial_wip, p.truth_ongoing);
  m.ngd = defined([&] {
    const auto seqs = forecast_sequences(sim, p.start, p.horizon);
    return ngd(seqs, p.truth_sequences, n);
  });
  m.rctd = defined([&] { return wasserstein1(remaining_hours(sim, p.start), p.truth_remaining); });
  return m;
}

RunPair run_pair(const BPSModel& model, const PointInput& p, std::uint64_t seed,
                 const EvaluationConfig& config) {
  const SimLog ps = run_short_term(model, p.state, p.horizon, seed, config.engine);
  const SimLog wu =
      warmup_short_term(model, p.truth_ongoing, p.start, p.horizon, seed, config.engine);
  return {score(ps, p, config.ngram_n), score(wu, p, config.ngram_n)};
}

}  // namespace

EvaluationConfig parse_evaluation_config(std::string_view json_document) {
  EvaluationConfig c;
  try {
    const json j = json::parse(json_document);
    if (j.contains("fractions")) c.fractions = j.at("fractions").get<std::vector<double>>();
    if (j.contains("percentile")) c.percentile = j.at("percentile").get<double>();
    if (j.contains("runs")) c.runs = j.at("runs").get<std::size_t>();
    if (j.contains("seed_base")) c.seed_base = j.at("seed_base").get<std::uint64_t>();
    if (j.contains("ngram_n")) c.ngram_n = j.at("ngram_n").get<std::size_t>();
    if (j.contains("concurrency_threshold")) {
      c.concurrency_threshold = j.at("concurrency_threshold").get<double>();
    }
    if (j.contains("m")) c.m = j.at("m").get<std::size_t>();
    if (j.contains("dispatch")) c.engine.policy = parse_policy(j.at("dispatch").get<std::string>());
    if (j.contains("start_points")) {
      for (const auto& t : j.at("start_points")) c.start_points.push_back(parse_timestamp(t.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed evaluation config: ") + e.what());
  }
  if (c.runs == 0) throw ValidationError("runs must be at least 1");
  if (c.ngram_n == 0) throw ValidationError("ngram_n must be at least 1");
  if (c.m == 0) throw ValidationError("m must be at least 1");
  return c;
}

std::string write_evaluation_config(const EvaluationConfig& c) {
  json j{{"fractions", c.fractions},
         {"percentile", c.percentile},
         {"runs", c.runs},
         {"seed_base", c.seed_base},
         {"ngram_n", c.ngram_n},
         {"concurrency_threshold", c.concurrency_threshold},
         {"m", c.m},
         {"dispatch", std::string(to_string(c.engine.policy))}};
  if (!c.start_points.empty()) {
    json points = json::array();
    for (auto t : c.start_points) points.push_back(format_timestamp(t));
    j["start_points"] = std::move(points);
  }
  return j.dump(2);
}

MetricReport aggregate(std::vector<RunMetrics> runs) {
  MetricReport r;
  r.runs = runs.size();
  double ocd_sum = 0.0;
  double ngd_sum = 0.0;
  double rctd_sum = 0.0;
  std::size_t ngd_n = 0;
  std::size_t rctd_n = 0;
  for (const auto& run : runs) {
    ocd_sum += static_cast<double>(run.ocd);
    if (run.ngd) {
      ngd_sum += *run.ngd;
      ++ngd_n;
    }
    if (run.rctd) {
      rctd_sum += *run.rctd;
      ++rctd_n;
    }
  }
  if (!runs.empty()) r.ocd = ocd_sum / static_cast<double>(runs.size());
  if (ngd_n > 0) r.ngd = ngd_sum / static_cast<double>(ngd_n);
  if (rctd_n > 0) r.rctd = rctd_sum / static_cast<double>(rctd_n);
  r.per_run = std::move(runs);
  return r;
}

EvaluationReport evaluate(const BPSModel& model, const EventLog& truth,
                          const EvaluationConfig& config) {
  if (config.runs == 0) throw ValidationError("runs must be at least 1");
  const std::vector<Timestamp> starts = config.start_points.empty()
                                            ? select_start_points(truth, config.fractions)
                                            : config.start_points;
  const Duration horizon = horizon_from_log(truth, config.percentile);
  const MarkingIndex index(model.graph, config.m);

  std::vector<PointInput> inputs;
  std::vector<std::size_t> deviating;
  for (Timestamp start : starts) {
    const EventLog ongoing = truncate_log(truth, start);
    DiscoveryConfig dc;
    dc.m = config.m;
    dc.concurrency_threshold = config.concurrency_threshold;
    dc.concurrency = discover_concurrency(observe_log(truth, start), config.concurrency_threshold);
    DiscoveryResult discovered = discover_state(ongoing, index, dc);
    deviating.push_back(static_cast<std::size_t>(
        std::count_if(discovered.diagnostics.begin(), discovered.diagnostics.end(),
                      [](const Diagnostic& d) { return d.kind == DiagnosticKind::Deviating; })));

    PointInput p{start, start + horizon, ongoing.traces.size(), std::move(discovered.state), {}, {}};
    p.truth_sequences = forecast_sequences(truth, p.start, p.horizon);
    p.truth_remaining = remaining_hours(truth, start);
    inputs.push_back(std::move(p));
  }

  // Every (point, run) pair is independent; results are collected in order.
  std::vector<std::vector<RunPair>> results(inputs.size());
  const auto policy = config.parallel ? std::launch::async : std::launch::deferred;
  std::vector<std::vector<std::future<RunPair>>> futures(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t r = 0; r < config.runs; ++r) {
      futures[i].push_back(std::async(policy, run_pair, std::cref(model), std::cref(inputs[i]),
                                      config.seed_base + r, std::cref(config)));
    }
  }

  EvaluationReport report;
  std::vector<RunMetrics> all_ps;
  std::vector<RunMetrics> all_wu;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<RunMetrics> ps;
    std::vector<RunMetrics> wu;
    for (auto& f : futures[i]) {
      RunPair pair = f.get();
      ps.push_back(pair.procstate);
      wu.push_back(pair.warmup);
    }
    all_ps.insert(all_ps.end(), ps.begin(), ps.end());
    all_wu.insert(all_wu.end(), wu.begin(), wu.end());
    report.points.push_back({inputs[i].start, inputs[i].horizon, inputs[i].truth_ongoing,
                             deviating[i], aggregate(std::move(ps)), aggregate(std::move(wu))});
  }
  report.procstate = aggregate(std::move(all_ps));
  report.warmup = aggregate(std::move(all_wu));
  return report;
}

std::string write_report(const EvaluationReport& report, int indent) {
  json points = json::array();
  for (const auto& p : report.points) {
    points.push_back({{"start", format_timestamp(p.start)},
                      {"horizon", format_timestamp(p.horizon)},
                      {"truth_ongoing", p.truth_ongoing},
                      {"deviating", p.deviating},
                      {"procstate", report_json(p.procstate)},
                      {"warmup", report_json(p.warmup)}});
  }
  const json j{{"points", std::move(points)},
               {"procstate", report_json(report.procstate)},
               {"warmup", report_json(report.warmup)}};
  return j.dump(indent);
}

std::string format_table(const EvaluationReport& report) {
  auto cell = [](const std::optional<double>& v) {
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof buf, "%8.3f", *v);
    } else {
      std::snprintf(buf, sizeof buf, "%8s", "n/a");
    }
    return std::string(buf);
  };
  auto row = [&](const std::string& start, const char* approach, const MetricReport& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-26s %-9s %8.2f ", start.c_str(), approach, r.ocd);
    return std::string(buf) + cell(r.ngd) + ' ' + cell(r.rctd) + '\n';
  };
  std::string out = "start                      approach       OCD      NGD  R-CTD(h)\n";
  for (const auto& p : report.points) {
    const std::string start = format_timestamp(p.start);
    out += row(start, "ProcState", p.procstate);
    out += row(start, "WarmUp", p.warmup);
  }
  out += row("all points", "ProcState", report.procstate);
  out += row("all points", "WarmUp", report.warmup);
  return out;
}

}  // namespace bpsim
