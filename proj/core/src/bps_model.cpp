#include "bpsim/bps_model.hpp"
#include "params_json.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "bpsim/errors.hpp"

namespace bpsim {
namespace {

using json = nlohmann::json;

constexpr std::int64_t kDayMs = 86'400'000;
constexpr std::int64_t kWeekMs = 7 * kDayMs;
// 1970-01-01 was a Thursday; shifting by three days puts week boundaries on Mondays.
constexpr std::int64_t kMondayShiftMs = 3 * kDayMs;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::size_t arity(Family f) {
  switch (f) {
    case Family::Fixed:
    case Family::Exponential:
      return 1;
    default:
      return 2;
  }
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Fixed: return "fixed";
    case Family::Uniform: return "uniform";
    case Family::Exponential: return "exponential";
    case Family::Normal: return "normal";
    case Family::Gamma: return "gamma";
    case Family::Lognormal: return "lognormal";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Distribution

Distribution::Distribution(Family family, std::vector<double> params)
    : family_(family), params_(std::move(params)) {
  const std::string name(to_string(family_));
  if (params_.size() != arity(family_)) {
    throw ValidationError(name + " distribution expects " + std::to_string(arity(family_)) +
                          " parameter(s), got " + std::to_string(params_.size()));
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw ValidationError(name + " distribution has a non-finite parameter");
  }
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw ValidationError(name + " distribution: " + what);
  };
  const double a = params_[0];
  const double b = params_.size() > 1 ? params_[1] : 0.0;
  switch (family_) {
    case Family::Fixed: require(a > 0, "value must be positive"); break;
    case Family::Uniform: require(a >= 0 && b >= a && b > 0, "need 0 <= min <= max, max > 0"); break;
    case Family::Exponential: require(a > 0, "mean must be positive"); break;
    case Family::Normal: require(a > 0 && b >= 0, "need mean > 0 and sd >= 0"); break;
    case Family::Gamma: require(a > 0 && b > 0, "shape and scale must be positive"); break;
    case Family::Lognormal: require(b >= 0, "sigma must be non-negative"); break;
  }
}

Distribution Distribution::fixed(Duration value) {
  return Distribution(Family::Fixed, {to_seconds(value)});
}

Distribution Distribution::exponential(Duration mean) {
  return Distribution(Family::Exponential, {to_seconds(mean)});
}

double Distribution::mean_seconds() const {
  const double a = params_[0];
  const double b = params_.size() > 1 ? params_[1] : 0.0;
  switch (family_) {
    case Family::Fixed: return a;
    case Family::Uniform: return 0.5 * (a + b);
    case Family::Exponential: return a;
    case Family::Normal: {
      if (b == 0) return a;
      // Redrawing non-positive values truncates the normal at zero.
      const double alpha = -a / b;
      return a + b * normal_pdf(alpha) / (1.0 - normal_cdf(alpha));
    }
    case Family::Gamma: return a * b;
    case Family::Lognormal: return std::exp(a + 0.5 * b * b);
  }
  return a;
}

Duration Distribution::sample(std::mt19937_64& rng) const {
  const double a = params_[0];
  const double b = params_.size() > 1 ? params_[1] : 0.0;
  double x = a;
  switch (family_) {
    case Family::Fixed: break;
    case Family::Uniform:
      x = a == b ? a : std::uniform_real_distribution<double>(a, b)(rng);
      break;
    case Family::Exponential: x = std::exponential_distribution<double>(1.0 / a)(rng); break;
    case Family::Normal: {
      if (b == 0) break;
      std::normal_distribution<double> dist(a, b);
      do {
        x = dist(rng);
      } while (x <= 0.0);
      break;
    }
    case Family::Gamma: x = std::gamma_distribution<double>(a, b)(rng); break;
    case Family::Lognormal: x = std::lognormal_distribution<double>(a, b)(rng); break;
  }
  return std::max(from_seconds(x), Duration{1});
}

Distribution Distribution::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ValidationError("scale factor must be positive, got " + format_number(factor));
  }
  std::vector<double> p = params_;
  switch (family_) {
    case Family::Fixed:
    case Family::Exponential:
    case Family::Uniform:
    case Family::Normal:
      for (double& v : p) v *= factor;
      break;
    case Family::Gamma: p[1] *= factor; break;
    case Family::Lognormal: p[0] += std::log(factor); break;
  }
  return Distribution(family_, std::move(p));
}

// ---------------------------------------------------------------------------
// Calendar

Calendar::Calendar(std::vector<Interval> intervals, Duration utc_offset)
    : intervals_(std::move(intervals)), utc_offset_(utc_offset) {
  if (intervals_.empty()) throw ValidationError("calendar has no on-duty intervals");
  std::sort(intervals_.begin(), intervals_.end(), [](const Interval& x, const Interval& y) {
    return std::tie(x.weekday, x.from) < std::tie(y.weekday, y.from);
  });
  for (const auto& iv : intervals_) {
    if (iv.weekday < 0 || iv.weekday > 6) throw ValidationError("calendar weekday out of range");
    if (iv.from < Duration{0} || iv.to > Duration{kDayMs}) {
      throw ValidationError("calendar interval outside 00:00-24:00");
    }
    if (iv.to <= iv.from) throw ValidationError("calendar interval is empty or inverted");
  }
  for (std::size_t i = 1; i < intervals_.size(); ++i) {
    const auto& prev = intervals_[i - 1];
    const auto& cur = intervals_[i];
    if (prev.weekday == cur.weekday && cur.from < prev.to) {
      throw ValidationError("calendar intervals overlap on weekday " + std::to_string(cur.weekday));
    }
  }
  std::int64_t total = 0;
  for (const auto& iv : intervals_) {
    const std::int64_t begin = iv.weekday * kDayMs + iv.from.count();
    const std::int64_t end = iv.weekday * kDayMs + iv.to.count();
    if (!spans_.empty() && spans_.back().end == begin) {
      spans_.back().end = end;
    } else {
      spans_.push_back({begin, end, total});
    }
    total += end - begin;
  }
  weekly_total_ = Duration{total};
}

Calendar Calendar::always() {
  std::vector<Interval> all;
  for (int d = 0; d < 7; ++d) all.push_back({d, Duration{0}, Duration{kDayMs}});
  return Calendar(std::move(all));
}

std::int64_t Calendar::within_week(std::int64_t offset) const {
  std::int64_t acc = 0;
  for (const auto& s : spans_) {
    if (offset <= s.begin) break;
    acc = s.before + (std::min(offset, s.end) - s.begin);
  }
  return acc;
}

std::int64_t Calendar::cumulative_ms(Timestamp t) const {
  const std::int64_t x = t.time_since_epoch().count() + utc_offset_.count() + kMondayShiftMs;
  const std::int64_t week = floor_div(x, kWeekMs);
  return week * weekly_total_.count() + within_week(x - week * kWeekMs);
}

Timestamp Calendar::instant_at(std::int64_t value) const {
  const std::int64_t total = weekly_total_.count();
  const std::int64_t week = floor_div(value, total);
  const std::int64_t rem = value - week * total;
  std::int64_t x;
  if (rem == 0) {
    x = (week - 1) * kWeekMs + spans_.back().end;
  } else {
    auto it = std::find_if(spans_.begin(), spans_.end(), [&](const Span& s) {
      return rem <= s.before + (s.end - s.begin);
    });
    x = week * kWeekMs + it->begin + (rem - it->before);
  }
  return Timestamp{Duration{x - kMondayShiftMs - utc_offset_.count()}};
}

bool Calendar::is_on_duty(Timestamp t) const {
  const std::int64_t x = t.time_since_epoch().count() + utc_offset_.count() + kMondayShiftMs;
  const std::int64_t off = x - floor_div(x, kWeekMs) * kWeekMs;
  return std::any_of(spans_.begin(), spans_.end(),
                     [&](const Span& s) { return s.begin <= off && off < s.end; });
}

Timestamp Calendar::next_on_duty(Timestamp t) const {
  if (is_on_duty(t)) return t;
  const std::int64_t x = t.time_since_epoch().count() + utc_offset_.count() + kMondayShiftMs;
  const std::int64_t week = floor_div(x, kWeekMs);
  const std::int64_t off = x - week * kWeekMs;
  std::int64_t next = (week + 1) * kWeekMs + spans_.front().begin;
  for (const auto& s : spans_) {
    if (s.begin > off) {
      next = week * kWeekMs + s.begin;
      break;
    }
  }
  return Timestamp{Duration{next - kMondayShiftMs - utc_offset_.count()}};
}

Timestamp advance_over_calendar(const Calendar& cal, Timestamp from, Duration busy) {
  if (busy <= Duration{0}) return from;
  if (cal.is_always()) return from + busy;
  return cal.instant_at(cal.cumulative_ms(from) + busy.count());
}

Duration on_duty_time_between(const Calendar& cal, Timestamp t1, Timestamp t2) {
  if (t2 <= t1) return Duration{0};
  if (cal.is_always()) return t2 - t1;
  return Duration{cal.cumulative_ms(t2) - cal.cumulative_ms(t1)};
}

// ---------------------------------------------------------------------------
// BPSModel

const ResourceProfile* BPSModel::find_resource(std::string_view id) const {
  auto it = std::lower_bound(resources.begin(), resources.end(), id,
                             [](const ResourceProfile& r, std::string_view v) { return r.id < v; });
  if (it == resources.end() || it->id != id) return nullptr;
  return &*it;
}

std::vector<const ResourceProfile*> BPSModel::qualified(std::string_view label) const {
  std::vector<const ResourceProfile*> out;
  for (const auto& r : resources) {
    if (r.activities.contains(std::string(label))) out.push_back(&r);
  }
  return out;
}

double BPSModel::branch_probability(FlowIndex flow) const {
  const Flow& f = graph.flow(flow);
  const Node& src = graph.node(f.source);
  if (src.type != NodeType::Xor || src.outgoing.size() < 2) return 1.0;
  auto it = branching.find(f.id);
  return it == branching.end() ? 0.0 : it->second;
}

void validate(BPSModel& model) {
  const WFGraph& g = model.graph;
  std::set<std::string> task_labels;
  for (NodeIndex t : g.tasks()) task_labels.insert(g.node(t).label);

  for (const auto& [label, dist] : model.durations) {
    if (!task_labels.contains(label)) {
      throw ValidationError("duration given for unknown task '" + label + "'");
    }
  }
  for (const auto& label : task_labels) {
    if (!model.durations.contains(label)) {
      throw ValidationError("missing duration for task '" + label + "'");
    }
  }

  std::sort(model.resources.begin(), model.resources.end(),
            [](const ResourceProfile& a, const ResourceProfile& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < model.resources.size(); ++i) {
    const auto& r = model.resources[i];
    if (r.id.empty()) throw ValidationError("resource with empty id");
    if (i > 0 && model.resources[i - 1].id == r.id) {
      throw ValidationError("duplicate resource '" + r.id + "'");
    }
    for (const auto& a : r.activities) {
      if (!task_labels.contains(a)) {
        throw ValidationError("resource '" + r.id + "' assigned to unknown task '" + a + "'");
      }
    }
  }
  for (const auto& label : task_labels) {
    if (model.qualified(label).empty()) {
      throw ValidationError("task '" + label + "' has no qualified resource");
    }
  }

  for (const auto& [flow_id, p] : model.branching) {
    auto f = g.find_flow(flow_id);
    if (!f) throw ValidationError("branching probability for unknown flow '" + flow_id + "'");
    const Node& src = g.node(g.flow(*f).source);
    if (src.type != NodeType::Xor || src.outgoing.size() < 2) {
      throw ValidationError("flow '" + flow_id + "' is not a conditional flow");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("branching probability of flow '" + flow_id + "' outside [0, 1]");
    }
  }
  for (const Node& n : g.nodes()) {
    if (n.type != NodeType::Xor || n.outgoing.size() < 2) continue;
    std::size_t listed = 0;
    for (FlowIndex f : n.outgoing) listed += model.branching.count(g.flow(f).id);
    if (listed == 0) {
      for (FlowIndex f : n.outgoing) {
        model.branching[g.flow(f).id] = 1.0 / static_cast<double>(n.outgoing.size());
      }
      continue;
    }
    if (listed != n.outgoing.size()) {
      for (FlowIndex f : n.outgoing) {
        if (!model.branching.contains(g.flow(f).id)) {
          throw ValidationError("missing branching probability for flow '" + g.flow(f).id + "'");
        }
      }
    }
    double sum = 0.0;
    for (FlowIndex f : n.outgoing) sum += model.branching.at(g.flow(f).id);
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("branching probabilities sum " + format_number(sum) +
                            " at gateway '" + n.id + "' (expected 1)");
    }
  }

  for (const auto& [event_id, dist] : model.event_waits) {
    auto n = g.find_node(event_id);
    if (!n || g.node(*n).type != NodeType::Event) {
      throw ValidationError("event wait given for unknown event '" + event_id + "'");
    }
  }
  for (NodeIndex e : g.events()) {
    if (!model.event_waits.contains(g.node(e).id)) {
      throw ValidationError("missing wait distribution for event '" + g.node(e).id + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Family parse_family(const std::string& name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (Family f : {Family::Fixed, Family::Uniform, Family::Exponential, Family::Normal,
                   Family::Gamma, Family::Lognormal}) {
    if (to_string(f) == lower) return f;
  }
  throw ValidationError("unknown distribution family '" + name + "'");
}

Distribution parse_distribution(const json& j, const std::string& where) {
  try {
    if (!j.is_object()) throw ValidationError("expected an object");
    const Family family = parse_family(j.at("family").get<std::string>());
    std::vector<double> params;
    const json& p = j.at("params");
    if (p.is_number()) {
      params.push_back(p.get<double>());
    } else {
      params = p.get<std::vector<double>>();
    }
    return Distribution(family, std::move(params));
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

json distribution_json(const Distribution& d) {
  return {{"family", std::string(to_string(d.family()))}, {"params", d.params()}};
}

constexpr const char* kDays[] = {"MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN"};
constexpr const char* kDayNames[] = {"MONDAY", "TUESDAY", "WEDNESDAY", "THURSDAY",
                                     "FRIDAY", "SATURDAY", "SUNDAY"};

int parse_weekday(const std::string& text) {
  std::string upper;
  for (char c : text) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (int d = 0; d < 7; ++d) {
    if (upper == kDays[d] || upper == kDayNames[d]) return d;
  }
  throw ValidationError("unknown weekday '" + text + "'");
}

std::string format_time_of_day(Duration d) {
  const auto ms = d.count();
  const auto h = ms / 3'600'000;
  const auto m = (ms / 60'000) % 60;
  const auto s = (ms / 1000) % 60;
  char buf[48];
  if (s != 0) {
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(h),
                  static_cast<long long>(m), static_cast<long long>(s));
  } else {
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(h),
                  static_cast<long long>(m));
  }
  return buf;
}


}  // namespace

std::string format_offset(Duration d) {
  const auto minutes = std::chrono::duration_cast<std::chrono::minutes>(d).count();
  const long long a = minutes < 0 ? -minutes : minutes;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%c%02lld:%02lld", minutes < 0 ? '-' : '+', a / 60, a % 60);
  return buf;
}

Calendar parse_calendar(const json& intervals, Duration utc_offset) {
  std::vector<Calendar::Interval> out;
  for (const auto& iv : intervals) {
    out.push_back({parse_weekday(iv.at("day").get<std::string>()),
                   parse_time_of_day(iv.at("from").get<std::string>()),
                   parse_time_of_day(iv.at("to").get<std::string>())});
  }
  return Calendar(std::move(out), utc_offset);
}

json calendar_json(const Calendar& cal) {
  json out = json::array();
  for (const auto& iv : cal.intervals()) {
    out.push_back({{"day", kDays[iv.weekday]},
                   {"from", format_time_of_day(iv.from)},
                   {"to", format_time_of_day(iv.to)}});
  }
  return out;
}

ResourceProfile parse_resource(const json& j) {
  ResourceProfile r;
  r.id = j.at("id").get<std::string>();
  const std::string where = "resource '" + r.id + "'";
  try {
    Duration offset{0};
    if (j.contains("timezone")) offset = parse_utc_offset(j.at("timezone").get<std::string>());
    if (j.contains("calendar")) {
      r.calendar = parse_calendar(j.at("calendar"), offset);
    } else if (offset != Duration{0}) {
      throw ValidationError("timezone given without calendar");
    }
    for (const auto& a : j.at("activities")) r.activities.insert(a.get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return r;
}

json resource_json(const ResourceProfile& r) {
  json jr{{"id", r.id}, {"activities", r.activities}};
  if (!r.calendar.is_always()) {
    if (r.calendar.utc_offset() != Duration{0}) jr["timezone"] = format_offset(r.calendar.utc_offset());
    jr["calendar"] = calendar_json(r.calendar);
  }
  return jr;
}

BPSModel parse_params(std::string_view json_document, const WFGraph& graph) {
  json doc;
  try {
    doc = json::parse(json_document);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed parameter JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("parameter document must be a JSON object");

  BPSModel model{graph, {}, {}, {}, {}, {}};
  try {
    if (!doc.contains("arrival")) throw ValidationError("missing 'arrival' distribution");
    model.inter_arrival = parse_distribution(doc.at("arrival"), "arrival");
    if (doc.contains("durations")) {
      for (const auto& [label, d] : doc.at("durations").items()) {
        model.durations.emplace(label, parse_distribution(d, "duration of '" + label + "'"));
      }
    }
    if (doc.contains("branching")) {
      for (const auto& [flow, p] : doc.at("branching").items()) {
        if (!p.is_number()) throw ValidationError("branching probability of '" + flow + "' is not a number");
        model.branching.emplace(flow, p.get<double>());
      }
    }
    if (doc.contains("event_waits")) {
      for (const auto& [event, d] : doc.at("event_waits").items()) {
        model.event_waits.emplace(event, parse_distribution(d, "wait of event '" + event + "'"));
      }
    }
    if (!doc.contains("resources")) throw ValidationError("missing 'resources' list");
    for (const auto& r : doc.at("resources")) model.resources.push_back(parse_resource(r));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("parameter document: ") + e.what());
  }
  validate(model);
  return model;
}

std::string write_params(const BPSModel& model) {
  json doc;
  doc["arrival"] = distribution_json(model.inter_arrival);
  doc["durations"] = json::object();
  for (const auto& [label, d] : model.durations) doc["durations"][label] = distribution_json(d);
  doc["branching"] = json::object();
  for (const auto& [flow, p] : model.branching) doc["branching"][flow] = p;
  doc["event_waits"] = json::object();
  for (const auto& [event, d] : model.event_waits) doc["event_waits"][event] = distribution_json(d);
  doc["resources"] = json::array();
  for (const auto& r : model.resources) doc["resources"].push_back(resource_json(r));
  return doc.dump(2);
}

}  // namespace bpsim
