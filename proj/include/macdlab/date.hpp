#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace macdlab {

/// Calendar date with day resolution. Ordered, hashable through `days()`.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days d) : days_(d) {}
  constexpr Date(int y, unsigned m, unsigned d)
      : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}) {}

  /// Strict `YYYY-MM-DD`; returns nullopt on anything else, including
  /// impossible dates such as 2021-02-30.
  static std::optional<Date> parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y = 0;
    unsigned m = 0, d = 0;
    if (!parse_field(text.substr(0, 4), y) || !parse_field(text.substr(5, 2), m) ||
        !parse_field(text.substr(8, 2), d))
      return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return Date{std::chrono::sys_days{ymd}};
  }

  std::string str() const {
    std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  constexpr std::chrono::sys_days days() const { return days_; }
  /// Seconds since the Unix epoch at 00:00 UTC.
  long long epoch_seconds() const {
    return std::chrono::duration_cast<std::chrono::seconds>(days_.time_since_epoch()).count();
  }
  constexpr Date next_day() const { return Date{days_ + std::chrono::days{1}}; }

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  template <class T>
  static bool parse_field(std::string_view s, T& out) {
    for (char c : s)
      if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  }

  std::chrono::sys_days days_{};
};

}  // namespace macdlab
