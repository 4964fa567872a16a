#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "bpsim/process_model.hpp"
#include "bpsim/time.hpp"

namespace bpsim {

enum class Family { Fixed, Uniform, Exponential, Normal, Gamma, Lognormal };

std::string_view to_string(Family family);

/// Positive duration distribution. Parameters are in seconds except for the
/// lognormal family, whose (mu, sigma) describe the underlying normal of
/// ln(seconds) and the gamma shape, which is dimensionless.
///
///   fixed       [value]
///   uniform     [min, max]
///   exponential [mean]
///   normal      [mean, sd]      non-positive draws are redrawn
///   gamma       [shape, scale]
///   lognormal   [mu, sigma]
class Distribution {
 public:
  Distribution() = default;
  /// Throws ValidationError on a wrong parameter count or out-of-range value.
  Distribution(Family family, std::vector<double> params);

  static Distribution fixed(Duration value);
  static Distribution exponential(Duration mean);

  Family family() const { return family_; }
  const std::vector<double>& params() const { return params_; }

  /// Expected value in seconds.
  double mean_seconds() const;

  /// Draws one value, rounded to milliseconds and never below 1 ms.
  Duration sample(std::mt19937_64& rng) const;

  /// The distribution of `factor * X`. Throws ValidationError unless factor > 0.
  Distribution scaled(double factor) const;

  bool operator==(const Distribution&) const = default;

 private:
  Family family_ = Family::Fixed;
  std::vector<double> params_{1.0};
};

/// Weekly availability pattern in a fixed UTC offset. Intervals are
/// half-open [from, to) within one weekday (0 = Monday).
class Calendar {
 public:
  struct Interval {
    int weekday = 0;
    Duration from{};
    Duration to{};
    bool operator==(const Interval&) const = default;
  };

  /// Throws ValidationError for an empty list, empty or inverted intervals,
  /// overlaps, or times outside [00:00, 24:00].
  Calendar(std::vector<Interval> intervals, Duration utc_offset = Duration{0});

  static Calendar always();

  const std::vector<Interval>& intervals() const { return intervals_; }
  Duration utc_offset() const { return utc_offset_; }
  Duration weekly_on_duty() const { return weekly_total_; }
  bool is_always() const { return weekly_total_ == std::chrono::weeks{1}; }

  bool is_on_duty(Timestamp t) const;
  /// `t` itself when on duty, otherwise the start of the next interval.
  Timestamp next_on_duty(Timestamp t) const;

  /// On-duty time accumulated since a fixed anchor; nondecreasing and
  /// continuous. Differences of this function are exact on-duty durations.
  std::int64_t cumulative_ms(Timestamp t) const;
  /// Smallest instant whose cumulative_ms equals `value`.
  Timestamp instant_at(std::int64_t value) const;

  bool operator==(const Calendar& other) const {
    return intervals_ == other.intervals_ && utc_offset_ == other.utc_offset_;
  }

 private:
  struct Span {  // merged on-duty span within a local week, ms from Monday 00:00
    std::int64_t begin;
    std::int64_t end;
    std::int64_t before;  // on-duty ms in the week before `begin`
  };

  std::int64_t within_week(std::int64_t offset) const;

  std::vector<Interval> intervals_;
  Duration utc_offset_{0};
  std::vector<Span> spans_;
  Duration weekly_total_{0};
};

/// Earliest instant at which `busy` of on-duty time has elapsed since
/// `from`. Zero work returns `from` unchanged, even off duty.
Timestamp advance_over_calendar(const Calendar& cal, Timestamp from, Duration busy);

/// On-duty time in [t1, t2]; zero when t2 <= t1.
Duration on_duty_time_between(const Calendar& cal, Timestamp t1, Timestamp t2);

struct ResourceProfile {
  std::string id;
  Calendar calendar = Calendar::always();
  std::set<std::string> activities;  // task labels
  bool operator==(const ResourceProfile&) const = default;
};

/// Workflow graph plus its stochastic parameters and resources.
struct BPSModel {
  WFGraph graph;
  std::vector<ResourceProfile> resources;        // sorted by id
  std::map<std::string, Distribution> durations;  // task label -> D
  std::map<std::string, double> branching;        // conditional flow id -> P
  std::map<std::string, Distribution> event_waits;  // event node id -> T
  Distribution inter_arrival;                     // I

  const ResourceProfile* find_resource(std::string_view id) const;
  /// Resources qualified for `label`, in id order.
  std::vector<const ResourceProfile*> qualified(std::string_view label) const;
  /// Probability of leaving an XOR node through `flow`.
  double branch_probability(FlowIndex flow) const;
};

/// Checks every cross-reference and invariant; throws ValidationError.
/// Multi-exit XOR nodes with no listed probabilities are filled with a
/// uniform split before checking.
void validate(BPSModel& model);

/// Parses the JSON parameter document against `graph`:
///
///   {"arrival": {"family": "exponential", "params": [1800]},
///    "durations": {"<task label>": {"family": ..., "params": [...]}},
///    "branching": {"<flow id>": 0.4},
///    "event_waits": {"<event id>": {...}},
///    "resources": [{"id": "...", "timezone": "+01:00",
///                   "calendar": [{"day": "MON", "from": "09:00", "to": "17:00"}],
///                   "activities": ["<task label>"]}]}
///
/// A resource without "calendar" is available around the clock.
BPSModel parse_params(std::string_view json_document, const WFGraph& graph);

/// Inverse of parse_params for the parameter part of a model.
std::string write_params(const BPSModel& model);

}  // namespace bpsim
