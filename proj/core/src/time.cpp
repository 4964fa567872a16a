#include "bpsim/time.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "bpsim/errors.hpp"

namespace bpsim {
namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }
  char peek() const { return done() ? '\0' : text_[pos_]; }
  void skip() { ++pos_; }

  bool accept(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  // Reads exactly `width` digits.
  bool digits(int width, int& out) {
    out = 0;
    for (int i = 0; i < width; ++i) {
      if (done() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) return false;
      out = out * 10 + (text_[pos_] - '0');
      ++pos_;
    }
    return true;
  }

  std::size_t position() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

[[noreturn]] void bad_timestamp(std::string_view text) {
  throw ValidationError("malformed timestamp '" + std::string(text) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_offset(Cursor& cur, Duration& offset) {
  if (cur.done()) {
    offset = Duration{0};
    return true;
  }
  if (cur.accept('Z') || cur.accept('z')) {
    offset = Duration{0};
    return cur.done();
  }
  int sign = 0;
  if (cur.accept('+')) sign = 1;
  else if (cur.accept('-')) sign = -1;
  else return false;
  int hh = 0;
  int mm = 0;
  if (!cur.digits(2, hh)) return false;
  if (!cur.done()) {
    cur.accept(':');
    if (!cur.digits(2, mm)) return false;
  }
  if (!cur.done() || hh > 23 || mm > 59) return false;
  offset = std::chrono::hours{hh * sign} + std::chrono::minutes{mm * sign};
  return true;
}

}  // namespace

Timestamp parse_timestamp(std::string_view raw) {
  using namespace std::chrono;
  const std::string_view text = trim(raw);
  Cursor cur(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!cur.digits(4, y) || !cur.accept('-') || !cur.digits(2, mo) || !cur.accept('-') ||
      !cur.digits(2, d)) {
    bad_timestamp(raw);
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) bad_timestamp(raw);

  Duration time_of_day{0};
  if (!cur.done()) {
    if (!(cur.accept('T') || cur.accept('t') || cur.accept(' '))) bad_timestamp(raw);
    if (!cur.digits(2, h) || !cur.accept(':') || !cur.digits(2, mi)) bad_timestamp(raw);
    if (cur.accept(':') && !cur.digits(2, s)) bad_timestamp(raw);
    if (h > 23 || mi > 59 || s > 60) bad_timestamp(raw);
    time_of_day = hours{h} + minutes{mi} + seconds{s};
    if (cur.accept('.') || cur.accept(',')) {
      // Fractional seconds: keep milliseconds, round the rest.
      long long frac = 0;
      int ndigits = 0;
      while (std::isdigit(static_cast<unsigned char>(cur.peek()))) {
        if (ndigits < 4) {
          frac = frac * 10 + (cur.peek() - '0');
          ++ndigits;
        }
        cur.skip();
      }
      if (ndigits == 0) bad_timestamp(raw);
      while (ndigits < 4) {
        frac *= 10;
        ++ndigits;
      }
      time_of_day += Duration{(frac + 5) / 10};
    }
  }
  Duration offset{0};
  if (!parse_offset(cur, offset)) bad_timestamp(raw);
  return Timestamp{sys_days{ymd}.time_since_epoch()} + time_of_day - offset;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const auto tod = t - day_point;
  const auto h = duration_cast<hours>(tod);
  const auto m = duration_cast<minutes>(tod - h);
  const auto s = duration_cast<seconds>(tod - h - m);
  const auto ms = (tod - h - m - s).count();
  char buf[64];
  if (ms != 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03d+00:00",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(h.count()),
                  static_cast<int>(m.count()), static_cast<int>(s.count()),
                  static_cast<int>(ms));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d+00:00",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(h.count()),
                  static_cast<int>(m.count()), static_cast<int>(s.count()));
  }
  return buf;
}

std::string format_timestamp_compact(Timestamp t) {
  std::string iso = format_timestamp(std::chrono::floor<std::chrono::seconds>(t));
  std::string out;
  for (char c : iso.substr(0, 19)) {
    if (c != '-' && c != ':') out.push_back(c);
  }
  out.push_back('Z');
  return out;
}

Duration from_seconds(double seconds) {
  if (!std::isfinite(seconds)) throw ValidationError("non-finite duration");
  return Duration{std::llround(seconds * 1000.0)};
}

Duration parse_duration(std::string_view raw) {
  const std::string_view text = trim(raw);
  if (text.empty()) throw ValidationError("empty duration");

  auto unit_ms = [&](char u) -> double {
    switch (std::tolower(static_cast<unsigned char>(u))) {
      case 'w': return 7 * 86'400'000.0;
      case 'd': return 86'400'000.0;
      case 'h': return 3'600'000.0;
      case 'm': return 60'000.0;
      case 's': return 1'000.0;
      default: throw ValidationError("malformed duration '" + std::string(raw) + "'");
    }
  };

  std::string_view body = text;
  bool iso = false;
  if (body.front() == 'P' || body.front() == 'p') {
    iso = true;
    body.remove_prefix(1);
  }
  double total_ms = 0.0;
  bool in_time = !iso;
  bool any = false;
  std::size_t i = 0;
  while (i < body.size()) {
    if (iso && (body[i] == 'T' || body[i] == 't')) {
      in_time = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < body.size() &&
           (std::isdigit(static_cast<unsigned char>(body[j])) || body[j] == '.')) {
      ++j;
    }
    if (j == i) throw ValidationError("malformed duration '" + std::string(raw) + "'");
    double value = 0.0;
    try {
      value = std::stod(std::string(body.substr(i, j - i)));
    } catch (const std::exception&) {
      throw ValidationError("malformed duration '" + std::string(raw) + "'");
    }
    if (j == body.size()) {
      if (iso) throw ValidationError("malformed duration '" + std::string(raw) + "'");
      total_ms += value * 1000.0;  // bare number = seconds
      any = true;
      break;
    }
    char unit = body[j];
    // ISO: 'M' before 'T' would mean months, which have no fixed length.
    if (iso && !in_time && (unit == 'M' || unit == 'm')) {
      throw ValidationError("month durations are not supported: '" + std::string(raw) + "'");
    }
    total_ms += value * unit_ms(unit);
    any = true;
    i = j + 1;
  }
  if (!any) throw ValidationError("malformed duration '" + std::string(raw) + "'");
  return Duration{std::llround(total_ms)};
}

Duration parse_time_of_day(std::string_view raw) {
  const std::string_view text = trim(raw);
  Cursor cur(text);
  int h = 0, m = 0, s = 0;
  if (!cur.digits(2, h) || !cur.accept(':') || !cur.digits(2, m)) {
    throw ValidationError("malformed time of day '" + std::string(raw) + "'");
  }
  if (cur.accept(':') && !cur.digits(2, s)) {
    throw ValidationError("malformed time of day '" + std::string(raw) + "'");
  }
  if (!cur.done() || m > 59 || s > 59 || h > 24 || (h == 24 && (m != 0 || s != 0))) {
    throw ValidationError("malformed time of day '" + std::string(raw) + "'");
  }
  return std::chrono::hours{h} + std::chrono::minutes{m} + std::chrono::seconds{s};
}

Duration parse_utc_offset(std::string_view raw) {
  Cursor cur(trim(raw));
  Duration offset{0};
  if (!parse_offset(cur, offset)) {
    throw ValidationError("malformed UTC offset '" + std::string(raw) + "'");
  }
  return offset;
}

}  // namespace bpsim
