#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "macdlab/error.hpp"
#include "macdlab/indicators.hpp"
#include "macdlab/marketdata.hpp"

namespace macdlab {

enum class Signal : char { Hold = 'H', Buy = 'B', Sell = 'S' };

/// Per-bar decisions aligned with the bars they were computed from.
class SignalSeries {
 public:
  SignalSeries() = default;
  explicit SignalSeries(std::size_t n) : signals_(n, Signal::Hold) {}
  explicit SignalSeries(std::vector<Signal> s) : signals_(std::move(s)) {}

  std::size_t size() const { return signals_.size(); }
  Signal operator[](std::size_t i) const { return signals_[i]; }
  Signal& operator[](std::size_t i) { return signals_[i]; }
  const std::vector<Signal>& values() const { return signals_; }

  std::size_t count(Signal s) const { return static_cast<std::size_t>(std::count(signals_.begin(), signals_.end(), s)); }
  /// Compact "HHBHS..." rendering, handy in diagnostics and tests.
  std::string str() const {
    std::string out(signals_.size(), 'H');
    for (std::size_t i = 0; i < signals_.size(); ++i) out[i] = static_cast<char>(signals_[i]);
    return out;
  }

  friend bool operator==(const SignalSeries&, const SignalSeries&) = default;

 private:
  std::vector<Signal> signals_;
};

enum class StrategyKind {
  MacdCrossoverSig,
  MacdCrossoverZero,
  MacdHist,
  MacdCrossoverSigAbove0,
  MacdBB,
  MacdSAR,
  MacdMFI,
  MacdRSI,
  VPVMA,
};

inline constexpr std::array kAllStrategies = {
    StrategyKind::MacdCrossoverSig, StrategyKind::MacdCrossoverZero, StrategyKind::MacdHist,
    StrategyKind::MacdCrossoverSigAbove0, StrategyKind::MacdBB, StrategyKind::MacdSAR,
    StrategyKind::MacdMFI, StrategyKind::MacdRSI, StrategyKind::VPVMA,
};

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::MacdCrossoverSig: return "MacdCrossoverSig";
    case StrategyKind::MacdCrossoverZero: return "MacdCrossoverZero";
    case StrategyKind::MacdHist: return "MacdHist";
    case StrategyKind::MacdCrossoverSigAbove0: return "MacdCrossoverSigAbove0";
    case StrategyKind::MacdBB: return "MacdBB";
    case StrategyKind::MacdSAR: return "MacdSAR";
    case StrategyKind::MacdMFI: return "MacdMFI";
    case StrategyKind::MacdRSI: return "MacdRSI";
    case StrategyKind::VPVMA: return "VPVMA";
  }
  return "?";
}

/// Row label used in reports.
inline std::string_view display_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::MacdCrossoverSig: return "MACD_crossoversig";
    case StrategyKind::MacdCrossoverZero: return "MACD_crossoverzero";
    case StrategyKind::MacdHist: return "MACD_hist";
    case StrategyKind::MacdCrossoverSigAbove0: return "MACD_crossoversigabout0";
    case StrategyKind::MacdBB: return "MACD&BB";
    case StrategyKind::MacdSAR: return "MACD&SAR";
    case StrategyKind::MacdMFI: return "MACD&MFI";
    case StrategyKind::MacdRSI: return "MACD&RSI";
    case StrategyKind::VPVMA: return "VPVMA";
  }
  return "?";
}

inline std::optional<StrategyKind> parse_strategy_kind(std::string_view name) {
  for (auto k : kAllStrategies)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

/// How a trailing-window threshold condition quantifies over the window.
enum class Quantifier { All, Any };
/// The VPVMA sell rule as printed requires vpvma_{t-1} <= vpvmas_{t-1};
/// Corrected uses >= instead.
enum class VpvmaSellMode { Literal, Corrected };

struct StrategyParams {
  MacdParams macd{12, 26, 9};
  // Bollinger / BBW
  int bb_window = 14;
  double bb_k = 2.0;
  StdDevKind bb_std = StdDevKind::Population;
  int bbw_short = 10;
  int bbw_long = 50;
  // SAR
  double sar_af0 = 0.02;
  double sar_afmax = 0.2;
  // MFI / RSI combos
  int mfi_window = 14;
  double mfi_lower = 25.0;
  double mfi_upper = 70.0;
  int rsi_window = 14;
  double rsi_lower = 35.0;
  double rsi_upper = 70.0;
  int lookback = 6;
  Quantifier quantifier = Quantifier::All;
  // VPVMA
  double bandwidth = 0.1;
  VpvmaSellMode vpvma_sell = VpvmaSellMode::Literal;

  friend bool operator==(const StrategyParams&, const StrategyParams&) = default;
};

struct StrategySpec {
  StrategyKind kind = StrategyKind::MacdCrossoverSig;
  StrategyParams params;
  std::string label;  // empty -> display_name(kind)

  std::string name() const { return label.empty() ? std::string(display_name(kind)) : label; }

  void check() const {
    const auto& p = params;
    p.macd.check();
    auto fail = [](const std::string& why) { throw Error(Errc::InvalidArgument, why); };
    if (!(p.mfi_lower < p.mfi_upper)) fail("mfi thresholds need lower < upper");
    if (!(p.rsi_lower < p.rsi_upper)) fail("rsi thresholds need lower < upper");
    if (p.bandwidth < 0.0) fail("bandwidth must be >= 0");
    if (p.lookback < 1) fail("lookback must be >= 1");
    if (p.bb_window < 2 || p.bbw_short < 1 || p.bbw_long < 1) fail("bollinger windows out of range");
    if (p.mfi_window < 1 || p.rsi_window < 1) fail("oscillator windows must be >= 1");
    if (!(p.sar_af0 > 0.0) || p.sar_afmax < p.sar_af0) fail("sar needs 0 < af0 <= afmax");
  }
};

namespace detail {

inline void align_all(std::initializer_list<std::size_t> sizes) {
  const auto first = *sizes.begin();
  for (auto s : sizes) require_aligned(first, s);
}

/// True when every series is defined at t, t-1, ..., t-depth+1.
template <class... S>
bool defined_back(std::size_t t, std::size_t depth, const S&... series) {
  if (t + 1 < depth) return false;
  return (series.defined(t + 1 - depth) && ...);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MACD rules

/// Buy on a strict up-cross of MACD through its signal line, Sell on a
/// strict down-cross.
inline SignalSeries macd_crossover_sig(const IndicatorSeries& macd, const IndicatorSeries& signal) {
  detail::align_all({macd.size(), signal.size()});
  SignalSeries out(macd.size());
  for (std::size_t t = 1; t < macd.size(); ++t) {
    if (!detail::defined_back(t, 2, macd, signal)) continue;
    if (macd[t - 1] < signal[t - 1] && macd[t] > signal[t]) out[t] = Signal::Buy;
    else if (macd[t - 1] > signal[t - 1] && macd[t] < signal[t]) out[t] = Signal::Sell;
  }
  return out;
}

inline SignalSeries macd_crossover_zero(const IndicatorSeries& macd) {
  SignalSeries out(macd.size());
  for (std::size_t t = 1; t < macd.size(); ++t) {
    if (!detail::defined_back(t, 2, macd)) continue;
    if (macd[t - 1] < 0.0 && macd[t] > 0.0) out[t] = Signal::Buy;
    else if (macd[t - 1] > 0.0 && macd[t] < 0.0) out[t] = Signal::Sell;
  }
  return out;
}

/// Three negative bars with a strict trough in the middle -> Buy; three
/// positive bars with a strict peak in the middle -> Sell.
inline SignalSeries macd_hist_rule(const IndicatorSeries& hist) {
  SignalSeries out(hist.size());
  for (std::size_t t = 2; t < hist.size(); ++t) {
    if (!detail::defined_back(t, 3, hist)) continue;
    const double a = hist[t - 2], b = hist[t - 1], c = hist[t];
    if (a < 0.0 && b < 0.0 && c < 0.0 && b < a && b < c) out[t] = Signal::Buy;
    else if (a > 0.0 && b > 0.0 && c > 0.0 && b > a && b > c) out[t] = Signal::Sell;
  }
  return out;
}

/// Signal-line cross confirmed by the MACD sign on the crossing bar.
inline SignalSeries macd_crossover_sig_above0(const IndicatorSeries& macd, const IndicatorSeries& signal) {
  auto out = macd_crossover_sig(macd, signal);
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (out[t] == Signal::Buy && !(macd[t] > 0.0)) out[t] = Signal::Hold;
    if (out[t] == Signal::Sell && !(macd[t] < 0.0)) out[t] = Signal::Hold;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Combination rules (level conditions on bar t)

inline SignalSeries macd_bb_rule(const IndicatorSeries& macd, const IndicatorSeries& signal, const IndicatorSeries& bbw,
                                 int short_win = 10, int long_win = 50) {
  detail::align_all({macd.size(), signal.size(), bbw.size()});
  const auto fast = sma(bbw, short_win);
  const auto slow = sma(bbw, long_win);
  SignalSeries out(macd.size());
  for (std::size_t t = 0; t < macd.size(); ++t) {
    if (!detail::defined_back(t, 1, macd, signal, fast, slow)) continue;
    if (macd[t] > signal[t] && fast[t] > slow[t]) out[t] = Signal::Buy;
    else if (macd[t] < signal[t] && fast[t] < slow[t]) out[t] = Signal::Sell;
  }
  return out;
}

/// MACD side plus a SAR flip through the close between t-1 and t.
inline SignalSeries macd_sar_rule(const IndicatorSeries& macd, const IndicatorSeries& signal,
                                  const IndicatorSeries& sar, std::span<const double> close) {
  detail::align_all({macd.size(), signal.size(), sar.size(), close.size()});
  SignalSeries out(macd.size());
  for (std::size_t t = 1; t < macd.size(); ++t) {
    if (!detail::defined_back(t, 1, macd, signal) || !detail::defined_back(t, 2, sar)) continue;
    const bool flip_below = sar[t - 1] > close[t - 1] && sar[t] < close[t];
    const bool flip_above = sar[t - 1] < close[t - 1] && sar[t] > close[t];
    if (macd[t] > signal[t] && flip_below) out[t] = Signal::Buy;
    else if (macd[t] < signal[t] && flip_above) out[t] = Signal::Sell;
  }
  return out;
}

/// MACD side plus a trailing-window oscillator condition: the last
/// `lookback` values (t back to t-lookback+1) all (or any, per `q`) at or
/// below `lower` for Buy, at or above `upper` for Sell.
inline SignalSeries macd_oscillator_rule(const IndicatorSeries& macd, const IndicatorSeries& signal,
                                         const IndicatorSeries& osc, double lower, double upper, int lookback,
                                         Quantifier q) {
  detail::align_all({macd.size(), signal.size(), osc.size()});
  if (lookback < 1) throw Error(Errc::InvalidArgument, "lookback must be >= 1");
  const auto depth = static_cast<std::size_t>(lookback);
  SignalSeries out(macd.size());
  for (std::size_t t = 0; t < macd.size(); ++t) {
    if (!detail::defined_back(t, 1, macd, signal) || !detail::defined_back(t, depth, osc)) continue;
    std::size_t low_hits = 0, high_hits = 0;
    for (std::size_t i = t + 1 - depth; i <= t; ++i) {
      low_hits += osc[i] <= lower;
      high_hits += osc[i] >= upper;
    }
    const bool oversold = q == Quantifier::All ? low_hits == depth : low_hits > 0;
    const bool overbought = q == Quantifier::All ? high_hits == depth : high_hits > 0;
    if (macd[t] > signal[t] && oversold) out[t] = Signal::Buy;
    else if (macd[t] < signal[t] && overbought) out[t] = Signal::Sell;
  }
  return out;
}

inline SignalSeries macd_mfi_rule(const IndicatorSeries& macd, const IndicatorSeries& signal, const IndicatorSeries& mfi,
                                  double lower = 25.0, double upper = 70.0, int lookback = 6,
                                  Quantifier q = Quantifier::All) {
  return macd_oscillator_rule(macd, signal, mfi, lower, upper, lookback, q);
}

inline SignalSeries macd_rsi_rule(const IndicatorSeries& macd, const IndicatorSeries& signal, const IndicatorSeries& rsi,
                                  double lower = 35.0, double upper = 70.0, int lookback = 6,
                                  Quantifier q = Quantifier::All) {
  return macd_oscillator_rule(macd, signal, rsi, lower, upper, lookback, q);
}

inline SignalSeries vpvma_rule(const IndicatorSeries& vpvma, const IndicatorSeries& vpvmas, double bandwidth = 0.1,
                               VpvmaSellMode mode = VpvmaSellMode::Literal) {
  detail::align_all({vpvma.size(), vpvmas.size()});
  SignalSeries out(vpvma.size());
  for (std::size_t t = 1; t < vpvma.size(); ++t) {
    if (!detail::defined_back(t, 2, vpvma, vpvmas)) continue;
    const bool was_below = vpvma[t - 1] <= vpvmas[t - 1];
    const bool was_above = vpvma[t - 1] >= vpvmas[t - 1];
    if (vpvma[t] > (1.0 + bandwidth) * vpvmas[t] && was_below) {
      out[t] = Signal::Buy;
    } else if (vpvma[t] < (1.0 - 2.0 * bandwidth) * vpvmas[t] &&
               (mode == VpvmaSellMode::Literal ? was_below : was_above)) {
      out[t] = Signal::Sell;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-indicator rules

/// Buy at or below `lower`, Sell at or above `upper` (RSI 30/70, MFI 25/75).
inline SignalSeries threshold_rule(const IndicatorSeries& osc, double lower, double upper) {
  SignalSeries out(osc.size());
  for (std::size_t t = osc.warmup(); t < osc.size(); ++t) {
    if (osc[t] <= lower) out[t] = Signal::Buy;
    else if (osc[t] >= upper) out[t] = Signal::Sell;
  }
  return out;
}

inline SignalSeries rsi_rule(const IndicatorSeries& rsi, double lower = 30.0, double upper = 70.0) {
  return threshold_rule(rsi, lower, upper);
}

inline SignalSeries mfi_rule(const IndicatorSeries& mfi, double lower = 25.0, double upper = 75.0) {
  return threshold_rule(mfi, lower, upper);
}

/// Buy while SMA(BBW, short) > SMA(BBW, long), Sell while below.
inline SignalSeries bbw_rule(const IndicatorSeries& bbw, int short_win = 10, int long_win = 50) {
  const auto fast = sma(bbw, short_win);
  const auto slow = sma(bbw, long_win);
  SignalSeries out(bbw.size());
  for (std::size_t t = 0; t < bbw.size(); ++t) {
    if (!detail::defined_back(t, 1, fast, slow)) continue;
    if (fast[t] > slow[t]) out[t] = Signal::Buy;
    else if (fast[t] < slow[t]) out[t] = Signal::Sell;
  }
  return out;
}

inline SignalSeries sar_rule(const IndicatorSeries& sar, std::span<const double> close) {
  detail::require_aligned(sar.size(), close.size());
  SignalSeries out(sar.size());
  for (std::size_t t = 1; t < sar.size(); ++t) {
    if (!detail::defined_back(t, 2, sar)) continue;
    if (sar[t - 1] > close[t - 1] && sar[t] < close[t]) out[t] = Signal::Buy;
    else if (sar[t - 1] < close[t - 1] && sar[t] > close[t]) out[t] = Signal::Sell;
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Computes whatever indicators `spec` needs and applies its rule.
inline SignalSeries generate_signals(const ValidatedBarSeries& series, const StrategySpec& spec) {
  spec.check();
  const auto& p = spec.params;
  const auto bars = std::span<const Bar>(series.bars());
  const auto close = series.closes();
  if (spec.kind == StrategyKind::VPVMA) {
    const auto v = vpvma(bars, p.macd);
    return vpvma_rule(v.vpvma, v.vpvmas, p.bandwidth, p.vpvma_sell);
  }
  const auto m = macd(close, p.macd);
  switch (spec.kind) {
    case StrategyKind::MacdCrossoverSig: return macd_crossover_sig(m.macd, m.signal);
    case StrategyKind::MacdCrossoverZero: return macd_crossover_zero(m.macd);
    case StrategyKind::MacdHist: return macd_hist_rule(m.hist);
    case StrategyKind::MacdCrossoverSigAbove0: return macd_crossover_sig_above0(m.macd, m.signal);
    case StrategyKind::MacdBB:
      return macd_bb_rule(m.macd, m.signal, bbw(bollinger(close, p.bb_window, p.bb_k, p.bb_std)), p.bbw_short,
                          p.bbw_long);
    case StrategyKind::MacdSAR: return macd_sar_rule(m.macd, m.signal, sar(bars, p.sar_af0, p.sar_afmax), close);
    case StrategyKind::MacdMFI:
      return macd_mfi_rule(m.macd, m.signal, mfi(bars, p.mfi_window), p.mfi_lower, p.mfi_upper, p.lookback,
                           p.quantifier);
    case StrategyKind::MacdRSI:
      return macd_rsi_rule(m.macd, m.signal, rsi(close, p.rsi_window), p.rsi_lower, p.rsi_upper, p.lookback,
                           p.quantifier);
    case StrategyKind::VPVMA: break;
  }
  throw Error(Errc::InvalidArgument, "unhandled strategy kind");
}

}  // namespace macdlab
