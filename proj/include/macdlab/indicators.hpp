#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "macdlab/error.hpp"
#include "macdlab/marketdata.hpp"

namespace macdlab {

/// Per-bar indicator values aligned 1:1 with the input bars. The first
/// `warmup()` entries are undefined; every later entry is finite.
class IndicatorSeries {
 public:
  IndicatorSeries() = default;
  /// `values[i]` for i < warmup is ignored and stored as NaN.
  IndicatorSeries(std::vector<double> values, std::size_t warmup) : values_(std::move(values)), warmup_(warmup) {
    if (warmup_ > values_.size()) warmup_ = values_.size();
    std::fill(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(warmup_), kUndefined);
  }
  /// Fully defined series.
  static IndicatorSeries dense(std::span<const double> values) {
    return IndicatorSeries(std::vector<double>(values.begin(), values.end()), 0);
  }

  std::size_t size() const { return values_.size(); }
  std::size_t warmup() const { return warmup_; }
  bool defined(std::size_t i) const { return i >= warmup_ && i < values_.size(); }
  /// Precondition: defined(i).
  double operator[](std::size_t i) const { return values_[i]; }
  std::optional<double> get(std::size_t i) const {
    return defined(i) ? std::optional<double>(values_[i]) : std::nullopt;
  }
  /// Raw storage; undefined entries are NaN.
  const std::vector<double>& raw() const { return values_; }
  std::span<const double> defined_values() const {
    return std::span<const double>(values_).subspan(std::min(warmup_, values_.size()));
  }

 private:
  static constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values_;
  std::size_t warmup_ = 0;
};

struct MacdParams {
  int fast = 12;
  int slow = 26;
  int signal = 9;

  void check() const {
    if (fast < 1 || slow <= fast || signal < 1)
      throw Error(Errc::InvalidArgument, "MACD periods need 1 <= fast < slow and signal >= 1, got (" +
                                             std::to_string(fast) + "," + std::to_string(slow) + "," +
                                             std::to_string(signal) + ")");
  }
  friend auto operator<=>(const MacdParams&, const MacdParams&) = default;
};

enum class StdDevKind { Population, Sample };

namespace detail {

inline void require_window(int n, int min = 1) {
  if (n < min) throw Error(Errc::InvalidArgument, "window must be >= " + std::to_string(min));
}

inline void require_length(std::size_t have, std::size_t need, const char* what) {
  if (have < need)
    throw Error(Errc::WindowTooLarge,
                std::string(what) + ": needs " + std::to_string(need) + " values, have " + std::to_string(have));
}

inline void require_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw Error(Errc::MisalignedSeries, std::to_string(a) + " vs " + std::to_string(b) + " entries");
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double stddev(std::span<const double> v, StdDevKind kind) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double denom = kind == StdDevKind::Population ? static_cast<double>(v.size()) : static_cast<double>(v.size() - 1);
  return std::sqrt(ss / denom);
}

}  // namespace detail

/// Elementwise a - b; warm-up is the longer of the two.
inline IndicatorSeries operator-(const IndicatorSeries& a, const IndicatorSeries& b) {
  detail::require_aligned(a.size(), b.size());
  const std::size_t w = std::max(a.warmup(), b.warmup());
  std::vector<double> out(a.size());
  for (std::size_t i = w; i < a.size(); ++i) out[i] = a[i] - b[i];
  return IndicatorSeries(std::move(out), w);
}

// ---------------------------------------------------------------------------
// Moving averages

/// Trailing arithmetic mean over `n` defined values. Each window is summed
/// afresh, so no rounding drift accumulates along the series.
inline IndicatorSeries sma(const IndicatorSeries& x, int n) {
  detail::require_window(n);
  const auto un = static_cast<std::size_t>(n);
  detail::require_length(x.size() - x.warmup(), un, "sma");
  const std::size_t first = x.warmup() + un - 1;
  std::vector<double> out(x.size());
  for (std::size_t t = first; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) s += x[i];
    out[t] = s / n;
  }
  return IndicatorSeries(std::move(out), first);
}

inline IndicatorSeries sma(std::span<const double> x, int n) { return sma(IndicatorSeries::dense(x), n); }

/// EMA with alpha = 2/(n+1), seeded by the SMA of the first `n` defined values.
inline IndicatorSeries ema(const IndicatorSeries& x, int n) {
  detail::require_window(n);
  const auto un = static_cast<std::size_t>(n);
  detail::require_length(x.size() - x.warmup(), un, "ema");
  const double alpha = 2.0 / (n + 1.0);
  const std::size_t first = x.warmup() + un - 1;
  std::vector<double> out(x.size());
  double seed = 0.0;
  for (std::size_t i = x.warmup(); i <= first; ++i) seed += x[i];
  out[first] = seed / n;
  for (std::size_t t = first + 1; t < x.size(); ++t) out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1];
  return IndicatorSeries(std::move(out), first);
}

inline IndicatorSeries ema(std::span<const double> x, int n) { return ema(IndicatorSeries::dense(x), n); }

struct MacdLines {
  IndicatorSeries macd;
  IndicatorSeries signal;
  IndicatorSeries hist;
};

/// MACD line = EMA(fast) - EMA(slow); signal = EMA of the MACD line's defined
/// region; hist = macd - signal. hist warm-up is (slow-1)+(signal-1).
inline MacdLines macd(std::span<const double> close, MacdParams p) {
  p.check();
  detail::require_length(close.size(), static_cast<std::size_t>(p.slow + p.signal - 1), "macd");
  auto line = ema(close, p.fast) - ema(close, p.slow);
  auto sig = ema(line, p.signal);
  auto hist = line - sig;
  return {std::move(line), std::move(sig), std::move(hist)};
}

// ---------------------------------------------------------------------------
// Bollinger bands

struct BollingerBands {
  IndicatorSeries lower;
  IndicatorSeries middle;
  IndicatorSeries upper;
};

/// middle = SMA(n); bands at +/- k standard deviations over the same window.
inline BollingerBands bollinger(std::span<const double> close, int n = 14, double k = 2.0,
                                StdDevKind kind = StdDevKind::Population) {
  detail::require_window(n, 2);
  auto middle = sma(close, n);
  const auto un = static_cast<std::size_t>(n);
  std::vector<double> lo(close.size()), up(close.size());
  for (std::size_t t = middle.warmup(); t < close.size(); ++t) {
    const double offset = k * detail::stddev(close.subspan(t + 1 - un, un), kind);
    lo[t] = middle[t] - offset;
    up[t] = middle[t] + offset;
  }
  const auto w = middle.warmup();
  return {IndicatorSeries(std::move(lo), w), std::move(middle), IndicatorSeries(std::move(up), w)};
}

/// Bollinger band width (upper - lower) / middle.
inline IndicatorSeries bbw(const IndicatorSeries& lower, const IndicatorSeries& middle, const IndicatorSeries& upper) {
  detail::require_aligned(lower.size(), middle.size());
  detail::require_aligned(upper.size(), middle.size());
  const std::size_t w = std::max({lower.warmup(), middle.warmup(), upper.warmup()});
  std::vector<double> out(middle.size());
  for (std::size_t t = w; t < middle.size(); ++t) {
    if (!(middle[t] > 0.0))
      throw Error(Errc::NonPositiveMiddle, "middle band " + std::to_string(middle[t]) + " at index " + std::to_string(t));
    out[t] = (upper[t] - lower[t]) / middle[t];
  }
  return IndicatorSeries(std::move(out), w);
}

inline IndicatorSeries bbw(const BollingerBands& bb) { return bbw(bb.lower, bb.middle, bb.upper); }

// ---------------------------------------------------------------------------
// Oscillators

namespace detail {
/// 100 - 100/(1+up/down) with the closures down == 0 -> 100, up == 0 -> 0.
inline double bounded_oscillator(double up, double down) {
  if (down == 0.0) return 100.0;
  if (up == 0.0) return 0.0;
  return 100.0 - 100.0 / (1.0 + up / down);
}
}  // namespace detail

/// Wilder RSI. First averages are simple means of the first `n` changes,
/// then avg = (prev*(n-1) + current)/n. First defined entry is index n.
inline IndicatorSeries rsi(std::span<const double> close, int n = 14) {
  detail::require_window(n);
  const auto un = static_cast<std::size_t>(n);
  detail::require_length(close.size(), un + 1, "rsi");
  std::vector<double> out(close.size());
  double gain = 0.0, loss = 0.0;
  for (std::size_t i = 1; i <= un; ++i) {
    const double d = close[i] - close[i - 1];
    gain += std::max(d, 0.0);
    loss += std::max(-d, 0.0);
  }
  gain /= n;
  loss /= n;
  out[un] = detail::bounded_oscillator(gain, loss);
  for (std::size_t t = un + 1; t < close.size(); ++t) {
    const double d = close[t] - close[t - 1];
    gain = (gain * (n - 1) + std::max(d, 0.0)) / n;
    loss = (loss * (n - 1) + std::max(-d, 0.0)) / n;
    out[t] = detail::bounded_oscillator(gain, loss);
  }
  return IndicatorSeries(std::move(out), un);
}

inline IndicatorSeries typical_price(std::span<const Bar> bars) {
  std::vector<double> out(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) out[i] = (bars[i].high + bars[i].low + bars[i].close) / 3.0;
  return IndicatorSeries(std::move(out), 0);
}

/// Money flow index over the trailing `n` typical-price changes. Days whose
/// TP equals the prior day's add to neither flow sum.
inline IndicatorSeries mfi(std::span<const Bar> bars, int n = 14) {
  detail::require_window(n);
  const auto un = static_cast<std::size_t>(n);
  detail::require_length(bars.size(), un + 1, "mfi");
  const auto tp = typical_price(bars);
  std::vector<double> pos(bars.size()), neg(bars.size());
  for (std::size_t i = 1; i < bars.size(); ++i) {
    const double flow = tp[i] * bars[i].volume;
    if (tp[i] > tp[i - 1]) pos[i] = flow;
    else if (tp[i] < tp[i - 1]) neg[i] = flow;
  }
  std::vector<double> out(bars.size());
  for (std::size_t t = un; t < bars.size(); ++t) {
    double p = 0.0, q = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) {
      p += pos[i];
      q += neg[i];
    }
    out[t] = detail::bounded_oscillator(p, q);
  }
  return IndicatorSeries(std::move(out), un);
}

// ---------------------------------------------------------------------------
// Parabolic SAR

enum class Trend { Up, Down };

struct SarState {
  Trend trend = Trend::Up;
  double sar = 0.0;
  double ep = 0.0;
  double af = 0.0;
  bool flipped = false;  // trend reversed on this bar
};

/// Wilder's stop-and-reverse, bar by bar. Entry i of the result describes
/// bar i+1 (the first SAR needs two bars).
///
/// Start: trend from close_1 vs close_0 (up on ties); SAR is the two-bar low
/// (up) or high (down), EP the opposite extreme. Each later bar:
///   candidate = sar + af*(ep - sar), clamped outside the prior two bars'
///   range; if the bar penetrates the candidate the trend flips, SAR jumps to
///   the old EP (kept outside this and the prior bar), EP resets to this
///   bar's extreme and af to af0. Otherwise a new extreme moves EP and steps
///   af by af0 up to afmax.
inline std::vector<SarState> sar_trace(std::span<const Bar> bars, double af0 = 0.02, double afmax = 0.2) {
  if (bars.size() < 2) throw Error(Errc::SeriesTooShort, "sar needs at least 2 bars");
  if (!(af0 > 0.0) || afmax < af0) throw Error(Errc::InvalidArgument, "sar needs 0 < af0 <= afmax");
  std::vector<SarState> trace;
  trace.reserve(bars.size() - 1);
  SarState s;
  s.trend = bars[1].close >= bars[0].close ? Trend::Up : Trend::Down;
  if (s.trend == Trend::Up) {
    s.sar = std::min(bars[0].low, bars[1].low);
    s.ep = std::max(bars[0].high, bars[1].high);
  } else {
    s.sar = std::max(bars[0].high, bars[1].high);
    s.ep = std::min(bars[0].low, bars[1].low);
  }
  s.af = af0;
  trace.push_back(s);

  for (std::size_t t = 2; t < bars.size(); ++t) {
    const Bar& cur = bars[t];
    const Bar& p1 = bars[t - 1];
    const Bar& p2 = bars[t - 2];
    double candidate = s.sar + s.af * (s.ep - s.sar);
    s.flipped = false;
    if (s.trend == Trend::Up) {
      candidate = std::min({candidate, p1.low, p2.low});
      if (cur.low < candidate) {
        s.trend = Trend::Down;
        s.sar = std::max({s.ep, p1.high, cur.high});
        s.ep = cur.low;
        s.af = af0;
        s.flipped = true;
      } else {
        s.sar = candidate;
        if (cur.high > s.ep) {
          s.ep = cur.high;
          s.af = std::min(s.af + af0, afmax);
        }
      }
    } else {
      candidate = std::max({candidate, p1.high, p2.high});
      if (cur.high > candidate) {
        s.trend = Trend::Up;
        s.sar = std::min({s.ep, p1.low, cur.low});
        s.ep = cur.high;
        s.af = af0;
        s.flipped = true;
      } else {
        s.sar = candidate;
        if (cur.low < s.ep) {
          s.ep = cur.low;
          s.af = std::min(s.af + af0, afmax);
        }
      }
    }
    trace.push_back(s);
  }
  return trace;
}

inline IndicatorSeries sar(std::span<const Bar> bars, double af0 = 0.02, double afmax = 0.2) {
  const auto trace = sar_trace(bars, af0, afmax);
  std::vector<double> out(bars.size());
  for (std::size_t i = 0; i < trace.size(); ++i) out[i + 1] = trace[i].sar;
  return IndicatorSeries(std::move(out), 1);
}

// ---------------------------------------------------------------------------
// Volume-price-volatility

/// Volume-weighted mean of `price` over the trailing `n` bars.
inline IndicatorSeries vwma(const IndicatorSeries& price, std::span<const double> volume, int n) {
  detail::require_window(n);
  detail::require_aligned(price.size(), volume.size());
  const auto un = static_cast<std::size_t>(n);
  detail::require_length(price.size() - price.warmup(), un, "vwma");
  const std::size_t first = price.warmup() + un - 1;
  std::vector<double> out(price.size());
  for (std::size_t t = first; t < price.size(); ++t) {
    double pv = 0.0, v = 0.0;
    for (std::size_t i = t + 1 - un; i <= t; ++i) {
      pv += price[i] * volume[i];
      v += volume[i];
    }
    if (!(v > 0.0)) throw Error(Errc::ZeroVolumeWindow, "no volume in window ending at index " + std::to_string(t));
    out[t] = pv / v;
  }
  return IndicatorSeries(std::move(out), first);
}

/// Population standard deviation of one bar's open, high, low and close.
inline double daily_volatility(const Bar& b) {
  const double prices[] = {b.high, b.low, b.close, b.open};
  return detail::stddev(prices, StdDevKind::Population);
}

struct VpvmaLines {
  IndicatorSeries vpvma;
  IndicatorSeries vpvmas;
};

/// Short leg EMA(VWMA(TP,fast)*DV, fast) minus long leg
/// EMA(VWMA(TP,slow)*DV, slow); the signal line is an SMA(signal) of it.
inline VpvmaLines vpvma(std::span<const Bar> bars, MacdParams p) {
  p.check();
  detail::require_length(bars.size(), static_cast<std::size_t>(2 * (p.slow - 1) + p.signal), "vpvma");
  const auto tp = typical_price(bars);
  std::vector<double> volume(bars.size()), dv(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    volume[i] = bars[i].volume;
    dv[i] = daily_volatility(bars[i]);
  }
  auto weighted = [&](int n) {
    auto v = vwma(tp, volume, n);
    std::vector<double> prod(bars.size());
    for (std::size_t i = v.warmup(); i < bars.size(); ++i) prod[i] = v[i] * dv[i];
    return ema(IndicatorSeries(std::move(prod), v.warmup()), n);
  };
  auto line = weighted(p.fast) - weighted(p.slow);
  auto sig = sma(line, p.signal);
  return {std::move(line), std::move(sig)};
}

}  // namespace macdlab
