#pragma once

// UTC timestamp parsing and calendar bucketing. Timestamps are seconds since
// the Unix epoch; all calendar arithmetic is UTC.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "futopic/error.hpp"

namespace futopic {

using UnixSeconds = std::int64_t;

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && ptr == s.data() + pos + len;
}

inline std::optional<std::chrono::sys_days> make_day(int y, int m, int d) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

inline std::optional<UnixSeconds> compose(std::chrono::sys_days day, int hh, int mm, int ss,
                                          int offset_seconds) {
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) return std::nullopt;
  const auto base = std::chrono::duration_cast<std::chrono::seconds>(day.time_since_epoch()).count();
  return base + hh * 3600 + mm * 60 + ss - offset_seconds;
}

// "+0000", "+00:00", "-05:30"
inline std::optional<int> parse_offset(std::string_view s) {
  if (s.empty() || (s[0] != '+' && s[0] != '-')) return std::nullopt;
  const int sign = s[0] == '-' ? -1 : 1;
  int hh = 0;
  int mm = 0;
  if (s.size() == 5) {
    if (!parse_fixed_int(s, 1, 2, hh) || !parse_fixed_int(s, 3, 2, mm)) return std::nullopt;
  } else if (s.size() == 6 && s[3] == ':') {
    if (!parse_fixed_int(s, 1, 2, hh) || !parse_fixed_int(s, 4, 2, mm)) return std::nullopt;
  } else if (s.size() == 3) {
    if (!parse_fixed_int(s, 1, 2, hh)) return std::nullopt;
  } else {
    return std::nullopt;
  }
  if (hh > 23 || mm > 59) return std::nullopt;
  return sign * (hh * 3600 + mm * 60);
}

// YYYY-MM-DD[(T| )HH:MM[:SS[.frac]]][Z|offset]
inline std::optional<UnixSeconds> parse_iso8601(std::string_view s) {
  int y = 0, mo = 0, d = 0;
  if (s.size() < 10 || !parse_fixed_int(s, 0, 4, y) || s[4] != '-' || !parse_fixed_int(s, 5, 2, mo) ||
      s[7] != '-' || !parse_fixed_int(s, 8, 2, d)) {
    return std::nullopt;
  }
  if (mo < 1 || mo > 12) return std::nullopt;
  const auto day = make_day(y, mo, d);
  if (!day) return std::nullopt;
  if (s.size() == 10) return compose(*day, 0, 0, 0, 0);
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!parse_fixed_int(s, 11, 2, hh) || s.size() < 16 || s[13] != ':' || !parse_fixed_int(s, 14, 2, mm)) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!parse_fixed_int(s, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      const std::size_t start = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      if (pos == start) return std::nullopt;
    }
  }
  int offset = 0;
  const auto rest = s.substr(pos);
  if (rest.empty() || rest == "Z" || rest == "z") {
    offset = 0;
  } else if (auto off = parse_offset(rest)) {
    offset = *off;
  } else {
    return std::nullopt;
  }
  return compose(*day, hh, mm, ss, offset);
}

inline int month_from_abbrev(std::string_view m) {
  static constexpr std::string_view names[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (int i = 0; i < 12; ++i) {
    if (names[i] == m) return i + 1;
  }
  return 0;
}

// Classic API form: "Wed Oct 10 20:19:24 +0000 2018"
inline std::optional<UnixSeconds> parse_twitter_classic(std::string_view s) {
  if (s.size() != 30 || s[3] != ' ' || s[7] != ' ' || s[10] != ' ' || s[19] != ' ' || s[25] != ' ') {
    return std::nullopt;
  }
  const int mo = month_from_abbrev(s.substr(4, 3));
  int d = 0, hh = 0, mm = 0, ss = 0, y = 0;
  if (mo == 0 || !parse_fixed_int(s, 8, 2, d) || !parse_fixed_int(s, 11, 2, hh) || s[13] != ':' ||
      !parse_fixed_int(s, 14, 2, mm) || s[16] != ':' || !parse_fixed_int(s, 17, 2, ss) ||
      !parse_fixed_int(s, 26, 4, y)) {
    return std::nullopt;
  }
  const auto off = parse_offset(s.substr(20, 5));
  const auto day = make_day(y, mo, d);
  if (!off || !day) return std::nullopt;
  return compose(*day, hh, mm, ss, *off);
}

}  // namespace detail

// Accepts ISO-8601 (date, date-time, optional fraction and offset) and the
// classic Twitter API timestamp. Returns nullopt when neither matches.
inline std::optional<UnixSeconds> parse_timestamp(std::string_view s) {
  if (auto v = detail::parse_iso8601(s)) return v;
  return detail::parse_twitter_classic(s);
}

// Strict YYYY-MM-DD, used for window bounds on the command line.
inline std::chrono::sys_days parse_date(std::string_view s) {
  int y = 0, mo = 0, d = 0;
  if (s.size() != 10 || !detail::parse_fixed_int(s, 0, 4, y) || s[4] != '-' ||
      !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' || !detail::parse_fixed_int(s, 8, 2, d) ||
      mo < 1 || mo > 12) {
    throw InvalidArgument("expected date as YYYY-MM-DD, got '" + std::string(s) + "'");
  }
  auto day = detail::make_day(y, mo, d);
  if (!day) throw InvalidArgument("not a calendar date: '" + std::string(s) + "'");
  return *day;
}

inline UnixSeconds to_unix(std::chrono::sys_days day) {
  return std::chrono::duration_cast<std::chrono::seconds>(day.time_since_epoch()).count();
}

inline std::chrono::sys_days day_of(UnixSeconds t) {
  return std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds{std::chrono::seconds{t}});
}

inline std::string format_date(UnixSeconds t) {
  const std::chrono::year_month_day ymd{day_of(t)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_timestamp(UnixSeconds t) {
  const auto day = day_of(t);
  const auto secs = t - to_unix(day);
  char buf[32];
  std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lldZ", static_cast<long long>(secs / 3600),
                static_cast<long long>((secs / 60) % 60), static_cast<long long>(secs % 60));
  return format_date(t) + buf;
}

enum class Granularity { day, week, month };

inline Granularity parse_granularity(std::string_view s) {
  if (s == "day") return Granularity::day;
  if (s == "week") return Granularity::week;
  if (s == "month") return Granularity::month;
  throw InvalidArgument("granularity must be day, week or month, got '" + std::string(s) + "'");
}

inline const char* to_string(Granularity g) {
  switch (g) {
    case Granularity::day: return "day";
    case Granularity::week: return "week";
    case Granularity::month: return "month";
  }
  return "?";
}

// Weeks start on Monday (ISO).
inline UnixSeconds bucket_start(UnixSeconds t, Granularity g) {
  using namespace std::chrono;
  const sys_days d = day_of(t);
  switch (g) {
    case Granularity::day:
      return to_unix(d);
    case Granularity::week: {
      const weekday wd{d};
      const auto since_monday = (wd.c_encoding() + 6) % 7;
      return to_unix(d - days{since_monday});
    }
    case Granularity::month: {
      const year_month_day ymd{d};
      return to_unix(sys_days{ymd.year() / ymd.month() / 1});
    }
  }
  return 0;
}

inline UnixSeconds next_bucket(UnixSeconds start, Granularity g) {
  using namespace std::chrono;
  const sys_days d = day_of(start);
  switch (g) {
    case Granularity::day: return to_unix(d + days{1});
    case Granularity::week: return to_unix(d + days{7});
    case Granularity::month: {
      const year_month_day ymd{d};
      const year_month ym = ymd.year() / ymd.month() + months{1};
      return to_unix(sys_days{ym / 1});
    }
  }
  return start;
}

}  // namespace futopic
