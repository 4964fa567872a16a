#include "bpsim/sim_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <unordered_map>

#include "bpsim/errors.hpp"
#include "bpsim/random.hpp"

namespace bpsim {

std::string_view to_string(DispatchPolicy policy) {
  return policy == DispatchPolicy::Fifo ? "fifo" : "lifo";
}

DispatchPolicy parse_policy(std::string_view text) {
  if (text == "fifo" || text == "FIFO") return DispatchPolicy::Fifo;
  if (text == "lifo" || text == "LIFO") return DispatchPolicy::Lifo;
  throw ValidationError("unknown dispatch policy '" + std::string(text) + "' (use fifo or lifo)");
}

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Random stream kinds.
enum : std::uint64_t { kArrivalStream = 1, kDurationStream, kBranchStream, kEventStream };

enum class EventKind : std::uint8_t { Arrival, ActivityDone, EventDone, Wakeup };

struct QueuedEvent {
  Timestamp at;
  std::uint64_t seq;
  EventKind kind;
  std::uint32_t case_idx;
  std::uint32_t ref;  // running id, token id or resource index
};

struct Later {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    return std::tie(a.at, a.seq) > std::tie(b.at, b.seq);
  }
};

enum class TokenState : std::uint8_t { Waiting, InEvent, AtJoin };

struct Token {
  std::uint32_t id;
  FlowIndex flow;
  Timestamp enabled;
  TokenState state;
};

struct Running {
  std::uint32_t id;
  NodeIndex task;
  Timestamp enabled;
  Timestamp started;
  std::uint32_t resource;  // kNone when no resource is occupied
  std::size_t instance;
};

struct CaseData {
  std::string id;
  std::uint64_t key;
  Timestamp arrival;
  std::optional<Timestamp> completion;
  bool loaded = false;
  bool tracked = false;
  std::vector<Token> tokens;
  std::vector<Running> running;
  std::map<NodeIndex, std::uint64_t> occurrences;
};

struct ResourceState {
  bool busy = false;
  Timestamp available_since{};
  std::optional<Timestamp> wakeup;
};

struct WaitKey {
  std::int64_t primary;
  std::int64_t secondary;
  std::uint32_t case_idx;
  std::uint32_t token;
  NodeIndex task;
  auto operator<=>(const WaitKey&) const = default;
};

}  // namespace

struct Engine::Impl {
  Impl(const BPSModel& m, std::uint64_t s, EngineOptions o) : model(m), seed(s), options(o) {
    const WFGraph& g = model.graph;
    durations.assign(g.nodes().size(), nullptr);
    event_waits.assign(g.nodes().size(), nullptr);
    qualified.resize(g.nodes().size());
    waiting_per_task.assign(g.nodes().size(), 0);
    for (NodeIndex t : g.tasks()) {
      durations[t] = &model.durations.at(g.node(t).label);
      for (std::uint32_t r = 0; r < model.resources.size(); ++r) {
        if (model.resources[r].activities.contains(g.node(t).label)) qualified[t].push_back(r);
      }
    }
    for (NodeIndex e : g.events()) event_waits[e] = &model.event_waits.at(g.node(e).id);
    resources.resize(model.resources.size());
  }

  BPSModel model;
  std::uint64_t seed;
  EngineOptions options;

  Timestamp clock{};
  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, Later> queue;
  std::uint64_t next_seq = 0;

  std::vector<CaseData> cases;
  std::unordered_map<std::string, std::uint32_t> case_by_id;
  std::vector<ActivityInstance> instances;
  std::vector<std::uint32_t> instance_case;

  std::vector<ResourceState> resources;
  std::vector<const Distribution*> durations;
  std::vector<const Distribution*> event_waits;
  std::vector<std::vector<std::uint32_t>> qualified;

  std::set<WaitKey> waiting;
  std::vector<std::size_t> waiting_per_task;

  bool sampled_arrivals = false;
  std::vector<Timestamp> explicit_arrivals;
  std::size_t explicit_next = 0;
  std::size_t arrivals_created = 0;
  std::optional<std::size_t> arrival_limit;
  std::optional<Timestamp> pending_arrival;
  std::size_t case_counter = 0;

  std::optional<Timestamp> tracking_horizon;
  std::size_t active = 0;
  std::size_t tracked_active = 0;
  std::size_t processed = 0;
  std::uint32_t next_token = 0;
  std::uint32_t next_running = 0;

  // --- helpers -----------------------------------------------------------

  std::mt19937_64 stream(std::uint64_t kind, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) const {
    return std::mt19937_64(derive_seed(seed, {kind, a, b, c}));
  }

  std::uint64_t occurrence(CaseData& c, NodeIndex n) { return c.occurrences[n]++; }

  void push(Timestamp at, EventKind kind, std::uint32_t case_idx, std::uint32_t ref) {
    queue.push({at, next_seq++, kind, case_idx, ref});
  }

  WaitKey wait_key(std::uint32_t case_idx, const Token& t, NodeIndex task) {
    const auto seq = static_cast<std::int64_t>(next_seq++);
    const std::int64_t en = t.enabled.time_since_epoch().count();
    if (options.policy == DispatchPolicy::Fifo) return {en, seq, case_idx, t.id, task};
    return {-en, -seq, case_idx, t.id, task};
  }

  bool tracks_arrival(Timestamp t) const { return !tracking_horizon || t < *tracking_horizon; }

  std::string fresh_case_id() {
    char buf[32];
    for (;;) {
      std::snprintf(buf, sizeof buf, "case-%06zu", ++case_counter);
      if (!case_by_id.contains(buf)) return buf;
    }
  }

  std::vector<std::uint32_t> deferred_finish;

  std::uint32_t add_case(std::string id, Timestamp arrival, bool loaded) {
    const auto idx = static_cast<std::uint32_t>(cases.size());
    CaseData c;
    c.key = hash_string(id);
    c.id = std::move(id);
    c.arrival = arrival;
    c.loaded = loaded;
    c.tracked = loaded || tracks_arrival(arrival);
    case_by_id.emplace(c.id, idx);
    cases.push_back(std::move(c));
    ++active;
    if (cases.back().tracked) ++tracked_active;
    return idx;
  }

  void finish_if_done(std::uint32_t ci) {
    CaseData& c = cases[ci];
    if (c.completion || !c.tokens.empty() || !c.running.empty()) return;
    c.completion = clock;
    --active;
    if (c.tracked) --tracked_active;
  }

  Duration sample_interarrival(std::uint64_t ordinal) {
    auto rng = stream(kArrivalStream, ordinal);
    return model.inter_arrival.sample(rng);
  }

  FlowIndex choose_branch(CaseData& c, NodeIndex xor_node) {
    const Node& node = model.graph.node(xor_node);
    if (node.outgoing.size() == 1) return node.outgoing.front();
    std::vector<FlowIndex> outs = node.outgoing;
    std::sort(outs.begin(), outs.end());
    auto rng = stream(kBranchStream, c.key, xor_node, occurrence(c, xor_node));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    FlowIndex last_possible = outs.front();
    for (FlowIndex f : outs) {
      const double p = model.branch_probability(f);
      if (p <= 0.0) continue;
      last_possible = f;
      cumulative += p;
      if (u < cumulative) return f;
    }
    return last_possible;
  }

  // Moves a token produced at `enabled` onto `flow` and lets it travel until
  // it rests in front of a task, inside an event, at an AND join, or leaves.
  void advance(std::uint32_t ci, FlowIndex flow, Timestamp enabled) {
    const WFGraph& g = model.graph;
    const NodeIndex n = g.flow(flow).target;
    const Node& node = g.node(n);
    switch (node.type) {
      case NodeType::Task: {
        Token t{next_token++, flow, enabled, TokenState::Waiting};
        waiting.insert(wait_key(ci, t, n));
        ++waiting_per_task[n];
        cases[ci].tokens.push_back(t);
        break;
      }
      case NodeType::Event: {
        CaseData& c = cases[ci];
        auto rng = stream(kEventStream, c.key, n, occurrence(c, n));
        const Timestamp done = enabled + event_waits[n]->sample(rng);
        if (done < clock) {
          // Already elapsed before the clock: continue from the past instant.
          advance(ci, node.outgoing.front(), done);
        } else {
          Token t{next_token++, flow, enabled, TokenState::InEvent};
          c.tokens.push_back(t);
          push(done, EventKind::EventDone, ci, t.id);
        }
        break;
      }
      case NodeType::And: {
        CaseData& c = cases[ci];
        c.tokens.push_back({next_token++, flow, enabled, TokenState::AtJoin});
        const bool ready = std::all_of(node.incoming.begin(), node.incoming.end(), [&](FlowIndex in) {
          return std::any_of(c.tokens.begin(), c.tokens.end(), [&](const Token& t) {
            return t.state == TokenState::AtJoin && t.flow == in;
          });
        });
        if (!ready) break;
        Timestamp latest = enabled;
        for (FlowIndex in : node.incoming) {
          auto it = std::find_if(c.tokens.begin(), c.tokens.end(), [&](const Token& t) {
            return t.state == TokenState::AtJoin && t.flow == in;
          });
          latest = std::max(latest, it->enabled);
          c.tokens.erase(it);
        }
        for (FlowIndex out : node.outgoing) advance(ci, out, latest);
        break;
      }
      case NodeType::Xor:
        advance(ci, choose_branch(cases[ci], n), enabled);
        break;
      case NodeType::Sink:
        break;
      case NodeType::Start:
        throw std::logic_error("flow into the start event");
    }
  }

  void start_activity(const WaitKey& key, std::uint32_t r) {
    CaseData& c = cases[key.case_idx];
    auto it = std::find_if(c.tokens.begin(), c.tokens.end(),
                           [&](const Token& t) { return t.id == key.token; });
    const Token token = *it;
    c.tokens.erase(it);
    auto rng = stream(kDurationStream, c.key, key.task, occurrence(c, key.task));
    const Duration d = durations[key.task]->sample(rng);
    const Timestamp done = advance_over_calendar(model.resources[r].calendar, clock, d);
    const ResourceProfile& res = model.resources[r];
    instances.push_back({c.id, model.graph.node(key.task).label, clock, std::nullopt, res.id,
                         token.enabled});
    instance_case.push_back(key.case_idx);
    const Running run{next_running++, key.task, token.enabled, clock, r, instances.size() - 1};
    c.running.push_back(run);
    resources[r].busy = true;
    push(done, EventKind::ActivityDone, key.case_idx, run.id);
  }

  void dispatch() {
    if (waiting.empty()) return;
    std::vector<char> on_duty(resources.size(), 0);
    std::size_t idle = 0;
    for (std::uint32_t r = 0; r < resources.size(); ++r) {
      if (!resources[r].busy && model.resources[r].calendar.is_on_duty(clock)) {
        on_duty[r] = 1;
        ++idle;
      }
    }
    for (auto it = waiting.begin(); it != waiting.end() && idle > 0;) {
      std::uint32_t best = kNone;
      for (std::uint32_t r : qualified[it->task]) {
        if (!on_duty[r] || resources[r].busy) continue;
        if (best == kNone || resources[r].available_since < resources[best].available_since) best = r;
      }
      if (best == kNone) {
        ++it;
        continue;
      }
      const WaitKey key = *it;
      it = waiting.erase(it);
      --waiting_per_task[key.task];
      start_activity(key, best);
      --idle;
    }
    // Idle resources that are off duty come back when their shift starts.
    for (std::uint32_t r = 0; r < resources.size(); ++r) {
      ResourceState& rs = resources[r];
      if (rs.busy || on_duty[r] || rs.wakeup) continue;
      if (model.resources[r].calendar.is_on_duty(clock)) continue;
      bool needed = false;
      for (const auto& label : model.resources[r].activities) {
        if (auto t = model.graph.find_task(label); t && waiting_per_task[*t] > 0) needed = true;
      }
      if (!needed) continue;
      rs.wakeup = model.resources[r].calendar.next_on_duty(clock);
      push(*rs.wakeup, EventKind::Wakeup, kNone, r);
    }
  }

  void schedule_next_arrival() {
    pending_arrival.reset();
    if (arrival_limit && arrivals_created >= *arrival_limit) return;
    if (sampled_arrivals) {
      pending_arrival = clock + sample_interarrival(arrivals_created);
    } else if (explicit_next < explicit_arrivals.size()) {
      pending_arrival = explicit_arrivals[explicit_next++];
    }
    if (pending_arrival) push(*pending_arrival, EventKind::Arrival, kNone, 0);
  }

  void handle(const QueuedEvent& ev) {
    switch (ev.kind) {
      case EventKind::Arrival: {
        ++arrivals_created;
        const auto ci = add_case(fresh_case_id(), clock, false);
        advance(ci, model.graph.initial_flow(), clock);
        finish_if_done(ci);
        schedule_next_arrival();
        break;
      }
      case EventKind::ActivityDone: {
        CaseData& c = cases[ev.case_idx];
        auto it = std::find_if(c.running.begin(), c.running.end(),
                               [&](const Running& r) { return r.id == ev.ref; });
        const Running run = *it;
        c.running.erase(it);
        instances[run.instance].end = clock;
        if (run.resource != kNone) {
          resources[run.resource].busy = false;
          resources[run.resource].available_since = clock;
        }
        advance(ev.case_idx, model.graph.node(run.task).outgoing.front(), clock);
        finish_if_done(ev.case_idx);
        break;
      }
      case EventKind::EventDone: {
        CaseData& c = cases[ev.case_idx];
        auto it = std::find_if(c.tokens.begin(), c.tokens.end(),
                               [&](const Token& t) { return t.id == ev.ref; });
        const FlowIndex flow = it->flow;
        c.tokens.erase(it);
        const NodeIndex event_node = model.graph.flow(flow).target;
        advance(ev.case_idx, model.graph.node(event_node).outgoing.front(), clock);
        finish_if_done(ev.case_idx);
        break;
      }
      case EventKind::Wakeup:
        if (ev.ref != kNone && resources[ev.ref].wakeup == clock) resources[ev.ref].wakeup.reset();
        for (std::uint32_t ci : deferred_finish) finish_if_done(ci);
        deferred_finish.clear();
        break;
    }
  }

  bool step() {
    if (queue.empty()) return false;
    clock = queue.top().at;
    while (!queue.empty() && queue.top().at == clock) {
      const QueuedEvent ev = queue.top();
      queue.pop();
      handle(ev);
      if (++processed > options.event_budget) {
        throw BudgetExceeded("event budget exceeded (" + std::to_string(options.event_budget) +
                             " events)");
      }
    }
    dispatch();
    return true;
  }

  void load_state(const ProcessState& state);
  void shift(Duration delta);
};

void Engine::Impl::load_state(const ProcessState& state) {
  const WFGraph& g = model.graph;
  for (const auto& cs : state.cases) {
    if (case_by_id.contains(cs.id)) throw ValidationError("duplicate case '" + cs.id + "' in state");
    for (const auto& a : cs.ongoing) {
      if (!g.find_task(a.activity)) {
        throw ValidationError("case '" + cs.id + "': ongoing activity '" + a.activity +
                              "' is not a task of the model");
      }
    }
    for (const auto& f : cs.flows) {
      if (!g.find_flow(f.flow)) {
        throw ValidationError("case '" + cs.id + "': flow '" + f.flow + "' is not in the model");
      }
    }
  }

  clock = state.at;
  for (auto& r : resources) r = ResourceState{false, clock, std::nullopt};

  struct Pending {
    std::uint32_t case_idx;
    const OngoingActivity* activity;
    NodeIndex task;
    std::uint32_t resource = kNone;
  };
  std::vector<Pending> pending;
  std::vector<std::uint32_t> case_indices;
  for (const auto& cs : state.cases) {
    const auto ci = add_case(cs.id, cs.arrival, true);
    case_indices.push_back(ci);
    for (const auto& a : cs.ongoing) pending.push_back({ci, &a, *g.find_task(a.activity)});
  }

  // Recorded resources first; the first claim on a resource wins.
  for (auto& p : pending) {
    for (const auto& name : p.activity->resources) {
      const ResourceProfile* rp = model.find_resource(name);
      if (rp == nullptr) continue;
      const auto r = static_cast<std::uint32_t>(rp - model.resources.data());
      if (resources[r].busy) continue;
      resources[r].busy = true;
      p.resource = r;
      break;
    }
  }
  // Activities without a recorded resource take a free qualified one.
  for (auto& p : pending) {
    if (!p.activity->resources.empty()) continue;
    std::uint32_t best = kNone;
    for (std::uint32_t r : qualified[p.task]) {
      if (resources[r].busy) continue;
      const bool duty = model.resources[r].calendar.is_on_duty(clock);
      if (best == kNone || (duty && !model.resources[best].calendar.is_on_duty(clock))) best = r;
    }
    if (best != kNone) {
      resources[best].busy = true;
      p.resource = best;
    }
  }

  for (const auto& p : pending) {
    CaseData& c = cases[p.case_idx];
    // Without an occupied resource the duration runs on the calendar of the
    // first capable resource.
    const std::uint32_t cal_owner = p.resource != kNone ? p.resource : qualified[p.task].front();
    const Calendar& cal = model.resources[cal_owner].calendar;
    auto rng = stream(kDurationStream, c.key, p.task, occurrence(c, p.task));
    const Duration d = durations[p.task]->sample(rng);
    const Duration remaining = d - on_duty_time_between(cal, p.activity->started, clock);
    const Timestamp done = advance_over_calendar(cal, clock, std::max(remaining, Duration{0}));

    std::optional<std::string> resource_name;
    if (p.resource != kNone) {
      resource_name = model.resources[p.resource].id;
    } else if (!p.activity->resources.empty()) {
      resource_name = p.activity->resources.front();
    }
    instances.push_back({c.id, p.activity->activity, p.activity->started, std::nullopt,
                         resource_name, p.activity->enabled});
    instance_case.push_back(p.case_idx);
    const Running run{next_running++, p.task, p.activity->enabled, p.activity->started,
                      p.resource, instances.size() - 1};
    c.running.push_back(run);
    push(done, EventKind::ActivityDone, p.case_idx, run.id);
  }

  for (std::size_t i = 0; i < state.cases.size(); ++i) {
    const auto ci = case_indices[i];
    for (const auto& f : state.cases[i].flows) advance(ci, *g.find_flow(f.flow), f.enabled);
    // A case with nothing left still counts as ongoing until the first step.
    deferred_finish.push_back(ci);
  }

  // Next arrival: one inter-arrival after the latest known arrival, never
  // before the clock.
  sampled_arrivals = true;
  const Duration ia = sample_interarrival(arrivals_created);
  Timestamp next = clock + ia;
  if (!state.cases.empty()) {
    Timestamp latest = state.cases.front().arrival;
    for (const auto& cs : state.cases) latest = std::max(latest, cs.arrival);
    next = std::max(clock, latest + ia);
  }
  if (!arrival_limit || arrivals_created < *arrival_limit) {
    pending_arrival = next;
    push(next, EventKind::Arrival, kNone, 0);
  }
  // Work enabled at the clock is dispatched together with the events due then.
  push(clock, EventKind::Wakeup, kNone, kNone);
}

void Engine::Impl::shift(Duration delta) {
  clock += delta;
  std::vector<QueuedEvent> events;
  while (!queue.empty()) {
    events.push_back(queue.top());
    queue.pop();
  }
  for (auto& e : events) {
    e.at += delta;
    queue.push(e);
  }
  for (auto& c : cases) {
    c.arrival += delta;
    if (c.completion) *c.completion += delta;
    for (auto& t : c.tokens) t.enabled += delta;
    for (auto& r : c.running) {
      r.enabled += delta;
      r.started += delta;
    }
  }
  for (auto& inst : instances) {
    inst.start += delta;
    if (inst.end) *inst.end += delta;
    if (inst.enablement) *inst.enablement += delta;
  }
  for (auto& r : resources) {
    r.available_since += delta;
    if (r.wakeup) *r.wakeup += delta;
  }
  std::set<WaitKey> shifted;
  const std::int64_t d = delta.count();
  for (WaitKey k : waiting) {
    k.primary += options.policy == DispatchPolicy::Fifo ? d : -d;
    shifted.insert(k);
  }
  waiting = std::move(shifted);
  for (auto& t : explicit_arrivals) t += delta;
  if (pending_arrival) *pending_arrival += delta;
  if (tracking_horizon) *tracking_horizon += delta;
}

// ---------------------------------------------------------------------------

Engine::Engine(const BPSModel& model, std::uint64_t seed, EngineOptions options)
    : impl_(std::make_unique<Impl>(model, seed, options)) {}
Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

Timestamp Engine::clock() const { return impl_->clock; }

void Engine::set_clock(Timestamp t) { impl_->clock = t; }

void Engine::start_arrivals(Timestamp base) {
  Impl& s = *impl_;
  s.sampled_arrivals = true;
  if (s.arrival_limit && s.arrivals_created >= *s.arrival_limit) return;
  s.pending_arrival = base + s.sample_interarrival(s.arrivals_created);
  s.push(*s.pending_arrival, EventKind::Arrival, kNone, 0);
}

void Engine::schedule_arrivals(std::vector<Timestamp> times) {
  Impl& s = *impl_;
  if (!std::is_sorted(times.begin(), times.end())) {
    throw ValidationError("arrival instants must be ascending");
  }
  s.sampled_arrivals = false;
  s.explicit_arrivals = std::move(times);
  s.explicit_next = 0;
  if (s.explicit_arrivals.empty()) return;
  s.pending_arrival = s.explicit_arrivals[s.explicit_next++];
  s.push(*s.pending_arrival, EventKind::Arrival, kNone, 0);
}

void Engine::limit_arrivals(std::size_t n) { impl_->arrival_limit = n; }

std::optional<Timestamp> Engine::next_arrival() const { return impl_->pending_arrival; }

void Engine::load_state(const ProcessState& state) { impl_->load_state(state); }

void Engine::set_tracking_horizon(Timestamp t) { impl_->tracking_horizon = t; }

void Engine::track_active_cases() {
  Impl& s = *impl_;
  s.tracked_active = 0;
  for (auto& c : s.cases) {
    c.tracked = !c.completion.has_value();
    c.loaded = c.tracked;
    if (c.tracked) ++s.tracked_active;
  }
}

std::optional<Timestamp> Engine::next_event_time() const {
  if (impl_->queue.empty()) return std::nullopt;
  return impl_->queue.top().at;
}

bool Engine::step() { return impl_->step(); }

void Engine::run_until(Timestamp t) {
  while (auto next = next_event_time()) {
    if (*next > t) break;
    impl_->step();
  }
  impl_->clock = std::max(impl_->clock, t);
}

void Engine::run_tracked() {
  Impl& s = *impl_;
  for (;;) {
    const bool arrival_pending = s.pending_arrival && s.tracks_arrival(*s.pending_arrival);
    if (s.tracked_active == 0 && !arrival_pending) break;
    if (!s.step()) break;
  }
}

std::size_t Engine::wip() const { return impl_->active; }
std::size_t Engine::tracked_active() const { return impl_->tracked_active; }
std::size_t Engine::events_processed() const { return impl_->processed; }

void Engine::shift(Duration delta) { impl_->shift(delta); }

ProcessState Engine::snapshot() const {
  const Impl& s = *impl_;
  const WFGraph& g = s.model.graph;
  ProcessState state;
  state.at = s.clock;
  for (const auto& c : s.cases) {
    if (c.completion) continue;
    CaseState cs;
    cs.id = c.id;
    cs.arrival = c.arrival;
    for (const auto& t : c.tokens) cs.flows.push_back({g.flow(t.flow).id, t.enabled});
    for (const auto& r : c.running) {
      OngoingActivity a;
      a.activity = g.node(r.task).label;
      a.enabled = r.enabled;
      a.started = r.started;
      if (const auto& res = s.instances[r.instance].resource) a.resources.push_back(*res);
      cs.ongoing.push_back(std::move(a));
    }
    std::sort(cs.flows.begin(), cs.flows.end(), [](const FlowToken& a, const FlowToken& b) {
      return std::tie(a.flow, a.enabled) < std::tie(b.flow, b.enabled);
    });
    std::sort(cs.ongoing.begin(), cs.ongoing.end(),
              [](const OngoingActivity& a, const OngoingActivity& b) { return a.activity < b.activity; });
    state.cases.push_back(std::move(cs));
  }
  std::sort(state.cases.begin(), state.cases.end(),
            [](const CaseState& a, const CaseState& b) { return a.id < b.id; });
  return state;
}

SimLog Engine::log() const {
  const Impl& s = *impl_;
  SimLog out;
  out.seed = s.seed;
  out.policy = s.options.policy;
  for (std::size_t i = 0; i < s.instances.size(); ++i) {
    if (s.cases[s.instance_case[i]].tracked) out.instances.push_back(s.instances[i]);
  }
  std::stable_sort(out.instances.begin(), out.instances.end(),
                   [](const ActivityInstance& a, const ActivityInstance& b) {
                     return std::tie(a.start, a.case_id, a.activity) <
                            std::tie(b.start, b.case_id, b.activity);
                   });
  for (const auto& c : s.cases) {
    if (c.tracked) out.cases.push_back({c.id, c.arrival, c.completion, c.loaded});
  }
  std::sort(out.cases.begin(), out.cases.end(), [](const CaseRecord& a, const CaseRecord& b) {
    return std::tie(a.arrival, a.id) < std::tie(b.arrival, b.id);
  });
  return out;
}

// ---------------------------------------------------------------------------

SimLog simulate(const BPSModel& model, Timestamp start, SimulateStop stop, std::uint64_t seed,
                EngineOptions options) {
  if (!stop.max_cases && !stop.until) {
    throw ValidationError("simulate needs a case count or an end time");
  }
  Engine engine(model, seed, options);
  engine.set_clock(start);
  if (stop.max_cases) engine.limit_arrivals(*stop.max_cases);
  if (stop.until) engine.set_tracking_horizon(*stop.until);
  engine.start_arrivals(start);
  engine.run_tracked();
  SimLog out = engine.log();
  out.origin = start;
  out.horizon = stop.until;
  return out;
}

SimLog simulate_arrivals(const BPSModel& model, std::vector<Timestamp> arrivals, std::uint64_t seed,
                         EngineOptions options) {
  Engine engine(model, seed, options);
  const Timestamp origin = arrivals.empty() ? Timestamp{} : arrivals.front();
  engine.set_clock(origin);
  engine.schedule_arrivals(std::move(arrivals));
  engine.run_tracked();
  SimLog out = engine.log();
  out.origin = origin;
  return out;
}

SimLog run_short_term(const BPSModel& model, const ProcessState& state, Timestamp horizon,
                      std::uint64_t seed, EngineOptions options) {
  if (horizon < state.at) throw ValidationError("horizon lies before the state's time");
  Engine engine(model, seed, options);
  engine.set_tracking_horizon(horizon);
  engine.load_state(state);
  const std::size_t initial = engine.wip();
  engine.run_tracked();
  SimLog out = engine.log();
  out.origin = state.at;
  out.horizon = horizon;
  out.initial_wip = initial;
  return out;
}

SimLog warmup_short_term(const BPSModel& model, std::size_t target_wip, Timestamp start_time,
                         Timestamp horizon, std::uint64_t seed, EngineOptions options) {
  if (horizon <= start_time) throw ValidationError("horizon must lie after the start time");
  const Duration period = horizon - start_time;
  const Timestamp warm_start = start_time - period;

  Engine engine(model, seed, options);
  engine.set_clock(warm_start);
  engine.set_tracking_horizon(warm_start);
  engine.start_arrivals(warm_start);

  Timestamp stop_at = warm_start;
  std::string reason = "target";
  if (target_wip != 0) {
    for (;;) {
      const auto next = engine.next_event_time();
      if (!next || *next > start_time) {
        stop_at = start_time;
        reason = "max_period";
        break;
      }
      engine.step();
      if (engine.wip() == target_wip) {
        stop_at = engine.clock();
        break;
      }
    }
  }
  engine.set_clock(stop_at);
  engine.shift(start_time - stop_at);
  engine.track_active_cases();
  engine.set_tracking_horizon(horizon);
  const std::size_t initial = engine.wip();
  engine.run_tracked();

  SimLog out = engine.log();
  out.origin = start_time;
  out.horizon = horizon;
  out.initial_wip = initial;
  out.warmup_stop = reason;
  return out;
}

}  // namespace bpsim
