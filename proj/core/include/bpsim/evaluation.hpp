#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpsim/bps_model.hpp"
#include "bpsim/event_log.hpp"
#include "bpsim/sim_engine.hpp"

namespace bpsim {

struct EvaluationConfig {
  std::vector<double> fractions{0.1, 0.5, 0.9};
  double percentile = 0.9;
  std::size_t runs = 10;
  std::uint64_t seed_base = 1;
  std::size_t ngram_n = 3;
  double concurrency_threshold = 0.75;
  std::size_t m = 5;
  EngineOptions engine;
  /// Start points to use instead of fractions of the maximum workload.
  std::vector<Timestamp> start_points;
  bool parallel = true;
};

/// Accepts {fractions, percentile, runs, seed_base, ngram_n,
/// concurrency_threshold, m, dispatch, start_points}; missing keys keep
/// their defaults.
EvaluationConfig parse_evaluation_config(std::string_view json_document);
std::string write_evaluation_config(const EvaluationConfig& config);

/// Metric values of one run. NGD and R-CTD are absent when undefined
/// (no sequences or no ongoing cases on one side).
struct RunMetrics {
  std::uint64_t seed = 0;
  std::size_t ocd = 0;
  std::optional<double> ngd;
  std::optional<double> rctd;
};

/// Means over the runs where a metric is defined.
struct MetricReport {
  double ocd = 0.0;
  std::optional<double> ngd;
  std::optional<double> rctd;
  std::size_t runs = 0;
  std::vector<RunMetrics> per_run;
};

MetricReport aggregate(std::vector<RunMetrics> runs);

struct PointReport {
  Timestamp start{};
  Timestamp horizon{};
  std::size_t truth_ongoing = 0;
  std::size_t deviating = 0;
  MetricReport procstate;
  MetricReport warmup;
};

struct EvaluationReport {
  std::vector<PointReport> points;
  MetricReport procstate;  // over all points and runs
  MetricReport warmup;
};

/// For every start point: truncate the truth log, discover the state, run
/// both approaches `runs` times with seeds seed_base + r and compare each
/// run against the truth.
EvaluationReport evaluate(const BPSModel& model, const EventLog& truth,
                          const EvaluationConfig& config);

std::string write_report(const EvaluationReport& report, int indent = 2);
std::string format_table(const EvaluationReport& report);

}  // namespace bpsim
