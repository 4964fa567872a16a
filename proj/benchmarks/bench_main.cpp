#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "bpsim/metrics.hpp"
#include "fixtures.hpp"

using namespace fixtures;

namespace {

const Timestamp origin = ts("2024-01-01T00:00:00Z");

// Simulated logs are built once per name and reused across benchmarks.
const EventLog& log_of(const std::string& name, const BPSModel& model, std::size_t cases) {
  static std::map<std::string, EventLog> cache;
  const std::string key = name + "/" + std::to_string(cases);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, simulate(model, origin, SimulateStop{cases, std::nullopt}, 1).to_event_log()).first;
  }
  return it->second;
}

// A busy instant: work in progress near 90% of the log's peak.
Timestamp busy_point(const EventLog& log) {
  const std::vector<double> fraction{0.9};
  return select_start_points(log, fraction).front();
}

void BM_MarkingIndex(benchmark::State& st) {
  const WFGraph g = order_handling_graph();
  for (auto _ : st) {
    MarkingIndex index(g, static_cast<std::size_t>(st.range(0)));
    benchmark::DoNotOptimize(index.gram_count());
  }
}
BENCHMARK(BM_MarkingIndex)->Arg(1)->Arg(3)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_DiscoverState(benchmark::State& st) {
  const BPSModel model = parallel_model(static_cast<double>(st.range(0)));
  const EventLog& full = log_of("parallel" + std::to_string(st.range(0)), model, 2000);
  const EventLog cut = truncate_log(full, busy_point(full));
  const MarkingIndex index(model.graph, 5);
  for (auto _ : st) {
    benchmark::DoNotOptimize(discover_state(cut, index).state.cases.size());
  }
  st.counters["ongoing"] = static_cast<double>(cut.traces.size());
}
BENCHMARK(BM_DiscoverState)->Arg(20)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ShortTerm(benchmark::State& st) {
  const BPSModel model = sequential_model(15.0);
  const EventLog& full = log_of("sequential15", model, 2000);
  const Timestamp at = busy_point(full);
  const ProcessState state = discover_state(truncate_log(full, at), model.graph).state;
  std::uint64_t seed = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(run_short_term(model, state, at + std::chrono::hours(st.range(0)), ++seed));
  }
}
BENCHMARK(BM_ShortTerm)->Arg(8)->Arg(72)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& st) {
  const BPSModel model = sequential_model();
  std::uint64_t seed = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(simulate(model, origin, SimulateStop{static_cast<std::size_t>(st.range(0)), std::nullopt}, ++seed));
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Wasserstein(benchmark::State& st) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> d(0.5);
  std::vector<double> a(static_cast<std::size_t>(st.range(0)));
  std::vector<double> b(a.size() * 3 / 2);
  for (auto& x : a) x = d(rng);
  for (auto& x : b) x = d(rng);
  for (auto _ : st) benchmark::DoNotOptimize(wasserstein1(a, b));
}
BENCHMARK(BM_Wasserstein)->Arg(100)->Arg(10000);

void BM_Ngd(benchmark::State& st) {
  const EventLog& full = log_of("sequential", sequential_model(), 2000);
  std::vector<LabelSequence> a;
  for (const auto& t : full.traces) {
    LabelSequence s;
    for (const auto& i : t.instances) s.push_back(i.activity);
    a.push_back(std::move(s));
  }
  const std::vector<LabelSequence> b(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2));
  for (auto _ : st) benchmark::DoNotOptimize(ngd(a, b, 3));
}
BENCHMARK(BM_Ngd)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
