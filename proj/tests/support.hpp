#pragma once

// Shared helpers for the unit tests and the acceptance binary: synthetic
// bars, scratch directories and direct-definition reference computations.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "macdlab/marketdata.hpp"

namespace testsupport {

using macdlab::Bar;
using macdlab::Date;

inline Date day(int y, int m, int d) { return *Date::parse(std::to_string(y) + "-" + (m < 10 ? "0" : "") +
                                                         std::to_string(m) + "-" + (d < 10 ? "0" : "") + std::to_string(d)); }

/// Consecutive weekdays from `start`.
inline std::vector<Date> weekdays(Date start, std::size_t n) {
  std::vector<Date> out;
  Date d = start;
  while (out.size() < n) {
    const auto wd = std::chrono::weekday(d.days());
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.push_back(d);
    d = d.next_day();
  }
  return out;
}

/// Random-walk OHLCV bars with valid ranges. Prices stay well away from 0.
inline std::vector<Bar> random_bars(std::mt19937_64& rng, std::size_t n, double start_price = 100.0,
                                    double vol = 0.02) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::lognormal_distribution<double> v(12.0, 0.6);
  const auto dates = weekdays(day(2015, 1, 5), n);
  std::vector<Bar> bars(n);
  double prev = start_price;
  for (std::size_t i = 0; i < n; ++i) {
    Bar& b = bars[i];
    b.date = dates[i];
    b.open = prev * std::exp(0.3 * vol * z(rng));
    b.close = b.open * std::exp(vol * z(rng));
    b.high = std::max(b.open, b.close) * (1.0 + vol * u(rng));
    b.low = std::min(b.open, b.close) * (1.0 - vol * u(rng));
    b.adj_close = b.close;
    b.volume = std::round(v(rng));
    prev = b.close;
  }
  return bars;
}

inline macdlab::ValidatedBarSeries validated(std::vector<Bar> bars, std::string symbol = "TEST") {
  return macdlab::validate(macdlab::BarSeries{std::move(symbol), std::move(bars)}).take();
}

/// Bars from closes only: open = close, high/low = close +/- 1.
inline std::vector<Bar> bars_from_closes(const std::vector<double>& closes) {
  const auto dates = weekdays(day(2020, 1, 6), closes.size());
  std::vector<Bar> out;
  for (std::size_t i = 0; i < closes.size(); ++i)
    out.push_back({dates[i], closes[i], closes[i] + 1.0, closes[i] - 1.0, closes[i], closes[i], 1000.0});
  return out;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("macdlab_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Every regular file under `root`, relative path -> contents.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

// ---------------------------------------------------------------------------
// Reference computations. Each follows the textbook definition directly, in
// long double, with no incremental state shared between output positions.
// NaN marks an undefined entry.

namespace ref {

using LD = long double;
inline const double kNaN = std::nan("");

inline std::vector<double> sma(const std::vector<double>& x, int n) {
  std::vector<double> out(x.size(), kNaN);
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (t + 1 < static_cast<std::size_t>(n)) continue;
    LD s = 0;
    bool ok = true;
    for (std::size_t i = t + 1 - n; i <= t; ++i) {
      ok = ok && !std::isnan(x[i]);
      s += x[i];
    }
    if (ok) out[t] = static_cast<double>(s / n);
  }
  return out;
}

/// EMA written as its closed-form weighted sum over the seed and all later
/// inputs: e_t = (1-a)^k * seed + sum_j a (1-a)^(t-j) x_j.
inline std::vector<double> ema(const std::vector<double>& x, int n) {
  std::vector<double> out(x.size(), kNaN);
  std::size_t start = 0;
  while (start < x.size() && std::isnan(x[start])) ++start;
  const std::size_t first = start + n - 1;
  if (first >= x.size()) return out;
  LD seed = 0;
  for (std::size_t i = start; i <= first; ++i) seed += x[i];
  seed /= n;
  const LD a = 2.0L / (n + 1);
  std::vector<LD> decay(x.size() - first + 1, 1);
  for (std::size_t k = 1; k < decay.size(); ++k) decay[k] = std::pow(1 - a, static_cast<LD>(k));
  for (std::size_t t = first; t < x.size(); ++t) {
    LD v = decay[t - first] * seed;
    for (std::size_t j = first + 1; j <= t; ++j) v += a * decay[t - j] * x[j];
    out[t] = static_cast<double>(v);
  }
  return out;
}

inline std::vector<double> minus(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

struct Macd {
  std::vector<double> line, signal, hist;
};

inline Macd macd(const std::vector<double>& close, int fast, int slow, int signal) {
  Macd m;
  m.line = minus(ema(close, fast), ema(close, slow));
  m.signal = ema(m.line, signal);
  m.hist = minus(m.line, m.signal);
  return m;
}

inline LD window_std(const std::vector<double>& x, std::size_t t, int n, bool sample) {
  LD m = 0;
  for (std::size_t i = t + 1 - n; i <= t; ++i) m += x[i];
  m /= n;
  LD ss = 0;
  for (std::size_t i = t + 1 - n; i <= t; ++i) ss += (x[i] - m) * (x[i] - m);
  return std::sqrt(ss / (sample ? n - 1 : n));
}

struct Bands {
  std::vector<double> lower, middle, upper, width;
};

inline Bands bollinger(const std::vector<double>& close, int n, double k, bool sample = false) {
  Bands b;
  b.middle = sma(close, n);
  b.lower = b.upper = b.width = std::vector<double>(close.size(), kNaN);
  for (std::size_t t = n - 1; t < close.size(); ++t) {
    const LD sd = window_std(close, t, n, sample);
    b.lower[t] = static_cast<double>(b.middle[t] - k * sd);
    b.upper[t] = static_cast<double>(b.middle[t] + k * sd);
    b.width[t] = static_cast<double>(2 * k * sd / b.middle[t]);
  }
  return b;
}

inline double bounded(LD up, LD down) {
  if (down == 0) return 100.0;
  if (up == 0) return 0.0;
  return static_cast<double>(100 - 100 / (1 + up / down));
}

/// Wilder smoothing unrolled: avg_t = ((n-1)^k * avg_seed + sum (n-1)^(t-j) x_j) / n^k.
inline std::vector<double> rsi(const std::vector<double>& close, int n) {
  std::vector<double> out(close.size(), kNaN);
  std::vector<LD> gain(close.size()), loss(close.size());
  for (std::size_t i = 1; i < close.size(); ++i) {
    const LD d = static_cast<LD>(close[i]) - close[i - 1];
    gain[i] = d > 0 ? d : 0;
    loss[i] = d < 0 ? -d : 0;
  }
  for (std::size_t t = n; t < close.size(); ++t) {
    LD g = 0, l = 0;
    for (int i = 1; i <= n; ++i) {
      g += gain[i];
      l += loss[i];
    }
    g /= n;
    l /= n;
    for (std::size_t j = n + 1; j <= t; ++j) {
      g = (g * (n - 1) + gain[j]) / n;
      l = (l * (n - 1) + loss[j]) / n;
    }
    out[t] = bounded(g, l);
  }
  return out;
}

inline std::vector<double> typical(const std::vector<Bar>& bars) {
  std::vector<double> out;
  for (const auto& b : bars) out.push_back(static_cast<double>((static_cast<LD>(b.high) + b.low + b.close) / 3));
  return out;
}

inline std::vector<double> mfi(const std::vector<Bar>& bars, int n) {
  const auto tp = typical(bars);
  std::vector<double> out(bars.size(), kNaN);
  for (std::size_t t = n; t < bars.size(); ++t) {
    LD pos = 0, neg = 0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) {
      const LD flow = static_cast<LD>(tp[i]) * bars[i].volume;
      if (tp[i] > tp[i - 1]) pos += flow;
      if (tp[i] < tp[i - 1]) neg += flow;
    }
    out[t] = bounded(pos, neg);
  }
  return out;
}

/// Wilder's parabolic SAR with a signed trend (+1 long, -1 short).
inline std::vector<double> sar(const std::vector<Bar>& bars, double af0, double afmax) {
  std::vector<double> out(bars.size(), kNaN);
  if (bars.size() < 2) return out;
  int dir = bars[1].close >= bars[0].close ? 1 : -1;
  auto extreme = [&](const Bar& b, int d) { return d > 0 ? b.high : b.low; };
  auto opposite = [&](const Bar& b, int d) { return d > 0 ? b.low : b.high; };
  auto further = [](double a, double b, int d) { return d > 0 ? std::max(a, b) : std::min(a, b); };
  auto nearer = [](double a, double b, int d) { return d > 0 ? std::min(a, b) : std::max(a, b); };

  double s = nearer(opposite(bars[0], dir), opposite(bars[1], dir), dir);
  double ep = further(extreme(bars[0], dir), extreme(bars[1], dir), dir);
  double af = af0;
  out[1] = s;
  for (std::size_t t = 2; t < bars.size(); ++t) {
    double next = s + af * (ep - s);
    next = nearer(next, nearer(opposite(bars[t - 1], dir), opposite(bars[t - 2], dir), dir), dir);
    const bool penetrated = dir > 0 ? bars[t].low < next : bars[t].high > next;
    if (penetrated) {
      // Reverse: new stop at the old extreme, outside this and the prior bar.
      s = further(ep, further(opposite(bars[t - 1], -dir), opposite(bars[t], -dir), dir), dir);
      dir = -dir;
      ep = extreme(bars[t], dir);
      af = af0;
    } else {
      s = next;
      if ((dir > 0 && bars[t].high > ep) || (dir < 0 && bars[t].low < ep)) {
        ep = extreme(bars[t], dir);
        af = std::min(af + af0, afmax);
      }
    }
    out[t] = s;
  }
  return out;
}

inline std::vector<double> vwma(const std::vector<double>& price, const std::vector<double>& volume, int n) {
  std::vector<double> out(price.size(), kNaN);
  for (std::size_t t = n - 1; t < price.size(); ++t) {
    LD pv = 0, v = 0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) {
      pv += static_cast<LD>(price[i]) * volume[i];
      v += volume[i];
    }
    out[t] = static_cast<double>(pv / v);
  }
  return out;
}

inline double daily_volatility(const Bar& b) {
  const LD m = (static_cast<LD>(b.open) + b.high + b.low + b.close) / 4;
  const LD ss = (b.open - m) * (b.open - m) + (b.high - m) * (b.high - m) + (b.low - m) * (b.low - m) +
                (b.close - m) * (b.close - m);
  return static_cast<double>(std::sqrt(ss / 4));
}

struct Vpvma {
  std::vector<double> line, signal;
};

inline Vpvma vpvma(const std::vector<Bar>& bars, int fast, int slow, int signal) {
  const auto tp = typical(bars);
  std::vector<double> vol;
  for (const auto& b : bars) vol.push_back(b.volume);
  auto leg = [&](int n) {
    auto w = vwma(tp, vol, n);
    for (std::size_t i = 0; i < bars.size(); ++i) w[i] *= ref::daily_volatility(bars[i]);
    return ema(w, n);
  };
  Vpvma v;
  v.line = minus(leg(fast), leg(slow));
  v.signal = sma(v.line, signal);
  return v;
}

}  // namespace ref
}  // namespace testsupport
