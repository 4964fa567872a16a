#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace bpsim {

/// All instants are UTC with millisecond resolution.
using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Duration>;

/// Parses ISO-8601 date-times such as `2024-03-01T08:00:00+02:00`,
/// `2024-03-01T08:00:00.250Z` or `2024-03-01 08:00:00` (no offset = UTC).
/// Throws ValidationError on malformed input.
Timestamp parse_timestamp(std::string_view text);

/// Canonical rendering: `YYYY-MM-DDTHH:MM:SS[.mmm]+00:00`. Milliseconds are
/// printed only when non-zero.
std::string format_timestamp(Timestamp t);

/// Compact form used in file names: `YYYYMMDDTHHMMSSZ`.
std::string format_timestamp_compact(Timestamp t);

/// Accepts `3600` (seconds), `90s`, `30m`, `8h`, `2d`, combinations such as
/// `1h30m`, and ISO-8601 durations (`PT8H`, `P1DT2H`).
Duration parse_duration(std::string_view text);

/// Parses `HH:MM` or `HH:MM:SS` as an offset from midnight; `24:00` allowed.
Duration parse_time_of_day(std::string_view text);

/// Parses a fixed UTC offset (`+02:00`, `-0530`, `Z`).
Duration parse_utc_offset(std::string_view text);

inline double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1000.0; }
inline double to_hours(Duration d) { return static_cast<double>(d.count()) / 3'600'000.0; }

/// Rounds to the nearest millisecond.
Duration from_seconds(double seconds);

}  // namespace bpsim
