#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "macdlab/backtest.hpp"

namespace macdlab {

inline constexpr double kTradingDaysPerYear = 252.0;

/// Whether Sharpe/Sortino come from daily equity returns (annualized by
/// sqrt(252)) or from pooled per-trade returns (not annualized).
enum class SharpeBasis { EquityCurve, PerTrade };
enum class KurtosisKind { Raw, Excess };

/// Trade-level statistics are pooled across symbols; curve statistics
/// (Sharpe, Sortino, MDD) are computed per symbol and averaged with equal
/// weight over the symbols where they are defined.
struct AggregationPolicy {
  SharpeBasis sharpe_basis = SharpeBasis::EquityCurve;
  KurtosisKind kurtosis = KurtosisKind::Raw;

  std::string describe() const {
    std::string s = "trade_stats=pooled;curve_stats=per_symbol_mean;sharpe_basis=";
    s += sharpe_basis == SharpeBasis::EquityCurve ? "equity_curve_daily_sqrt252" : "per_trade";
    s += ";kurtosis=";
    s += kurtosis == KurtosisKind::Raw ? "raw" : "excess";
    return s;
  }
  friend bool operator==(const AggregationPolicy&, const AggregationPolicy&) = default;
};

namespace detail {

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pstd_of(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// A dispersion indistinguishable from rounding noise around `center`.
inline bool negligible(double sd, double center) { return sd == 0.0 || sd <= 1e-12 * std::abs(center); }

inline std::optional<double> ratio_or_absent(double num, double sd, double center) {
  if (negligible(sd, center)) return std::nullopt;
  return num / sd;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trade statistics

/// Winning trades / all trades. Zero-pnl trades count in the denominator.
inline std::optional<double> win_rate(std::span<const Trade> trades) {
  if (trades.empty()) return std::nullopt;
  const auto wins = std::count_if(trades.begin(), trades.end(), [](const Trade& t) { return t.pnl > 0.0; });
  return static_cast<double>(wins) / static_cast<double>(trades.size());
}

/// Mean winner gain over mean loser magnitude; absent without both.
inline std::optional<double> pnl_ratio(std::span<const Trade> trades) {
  double gain = 0.0, loss = 0.0;
  std::size_t nw = 0, nl = 0;
  for (const auto& t : trades) {
    if (t.pnl > 0.0) {
      gain += t.pnl;
      ++nw;
    } else if (t.pnl < 0.0) {
      loss += -t.pnl;
      ++nl;
    }
  }
  if (nw == 0 || nl == 0) return std::nullopt;
  return (gain / static_cast<double>(nw)) / (loss / static_cast<double>(nl));
}

struct AccumulatedProfit {
  double gain = 0.0;  // sum of winning pnl
  double loss = 0.0;  // sum of losing pnl (<= 0)
  double ap = 0.0;    // gain + loss
};

inline AccumulatedProfit accumulated_profit(std::span<const Trade> trades) {
  AccumulatedProfit a;
  for (const auto& t : trades) {
    if (t.pnl > 0.0) a.gain += t.pnl;
    else if (t.pnl < 0.0) a.loss += t.pnl;
  }
  a.ap = a.gain + a.loss;
  return a;
}

inline AccumulatedProfit accumulated_profit(std::span<const TradeLedger> ledgers) {
  std::vector<Trade> pooled;
  for (const auto& l : ledgers) pooled.insert(pooled.end(), l.trades.begin(), l.trades.end());
  return accumulated_profit(pooled);
}

struct ReturnMoments {
  std::optional<double> mean;
  std::optional<double> skewness;  // Fisher-Pearson g1
  std::optional<double> kurtosis;  // m4/m2^2, minus 3 when excess
};

inline ReturnMoments return_moments(std::span<const double> returns, KurtosisKind kind = KurtosisKind::Raw) {
  ReturnMoments m;
  if (returns.empty()) return m;
  const double mu = detail::mean_of(returns);
  m.mean = mu;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double r : returns) {
    const double d = r - mu;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const auto n = static_cast<double>(returns.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (returns.size() < 2 || detail::negligible(std::sqrt(m2), mu)) return m;
  m.skewness = m3 / std::pow(m2, 1.5);
  m.kurtosis = m4 / (m2 * m2) - (kind == KurtosisKind::Excess ? 3.0 : 0.0);
  return m;
}

inline std::vector<double> trade_returns(std::span<const Trade> trades) {
  std::vector<double> r;
  r.reserve(trades.size());
  for (const auto& t : trades) r.push_back(t.ret);
  return r;
}

inline ReturnMoments return_moments(std::span<const Trade> trades, KurtosisKind kind = KurtosisKind::Raw) {
  return return_moments(trade_returns(trades), kind);
}

// ---------------------------------------------------------------------------
// Curve statistics

inline std::vector<double> daily_returns(std::span<const double> equity) {
  std::vector<double> r;
  if (equity.size() < 2) return r;
  r.reserve(equity.size() - 1);
  for (std::size_t t = 1; t < equity.size(); ++t) r.push_back(equity[t] / equity[t - 1] - 1.0);
  return r;
}

/// mean/pstd of (r - rf) scaled by sqrt(periods_per_year); `rf` is per period.
inline std::optional<double> sharpe_of_returns(std::span<const double> r, double rf = 0.0,
                                               double periods_per_year = 1.0) {
  if (r.size() < 2) return std::nullopt;
  std::vector<double> ex(r.begin(), r.end());
  for (double& x : ex) x -= rf;
  const double mu = detail::mean_of(ex);
  auto s = detail::ratio_or_absent(mu, detail::pstd_of(ex), mu);
  if (!s) return s;
  return *s * std::sqrt(periods_per_year);
}

/// As sharpe_of_returns, with the pstd of the strictly negative excess
/// returns as the denominator. Absent without negative returns.
inline std::optional<double> sortino_of_returns(std::span<const double> r, double rf = 0.0,
                                                double periods_per_year = 1.0) {
  if (r.size() < 2) return std::nullopt;
  std::vector<double> ex(r.begin(), r.end()), down;
  for (double& x : ex) {
    x -= rf;
    if (x < 0.0) down.push_back(x);
  }
  if (down.empty()) return std::nullopt;
  const double mu = detail::mean_of(ex);
  auto s = detail::ratio_or_absent(mu, detail::pstd_of(down), detail::mean_of(down));
  if (!s) return s;
  return *s * std::sqrt(periods_per_year);
}

/// Annualized Sharpe ratio of daily equity returns.
inline std::optional<double> sharpe(std::span<const double> equity, double rf = 0.0) {
  const auto r = daily_returns(equity);
  return sharpe_of_returns(r, rf, kTradingDaysPerYear);
}

inline std::optional<double> sortino(std::span<const double> equity, double rf = 0.0) {
  const auto r = daily_returns(equity);
  return sortino_of_returns(r, rf, kTradingDaysPerYear);
}

/// Largest peak-to-trough decline as a positive fraction of the peak.
inline double max_drawdown(std::span<const double> equity) {
  double peak = 0.0, mdd = 0.0;
  for (double e : equity) {
    peak = std::max(peak, e);
    if (peak > 0.0) mdd = std::max(mdd, (peak - e) / peak);
  }
  return mdd;
}

// ---------------------------------------------------------------------------

struct StrategyReport {
  std::size_t nt = 0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t flat = 0;  // zero-pnl trades
  std::size_t symbols = 0;
  std::optional<double> win_rate;
  std::optional<double> pnl_ratio;
  std::optional<double> sharpe;
  std::optional<double> sortino;
  std::optional<double> mdd;
  double accumulated_gain = 0.0;
  double accumulated_loss = 0.0;
  double accumulated_profit = 0.0;
  std::optional<double> mean_ret;
  std::optional<double> skewness;
  std::optional<double> kurtosis;
  AggregationPolicy policy;
};

namespace detail {
inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& xs) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}
}  // namespace detail

inline StrategyReport aggregate(std::span<const TradeLedger> ledgers, const AggregationPolicy& policy = {}) {
  StrategyReport rep;
  rep.policy = policy;
  rep.symbols = ledgers.size();

  // Fold in symbol order so the result does not depend on input order.
  std::vector<const TradeLedger*> order;
  for (const auto& l : ledgers) order.push_back(&l);
  std::stable_sort(order.begin(), order.end(),
                   [](const TradeLedger* a, const TradeLedger* b) { return a->symbol < b->symbol; });

  std::vector<Trade> pooled;
  for (const auto* l : order) pooled.insert(pooled.end(), l->trades.begin(), l->trades.end());
  rep.nt = pooled.size();
  for (const auto& t : pooled) {
    if (t.pnl > 0.0) ++rep.wins;
    else if (t.pnl < 0.0) ++rep.losses;
    else ++rep.flat;
  }
  rep.win_rate = win_rate(pooled);
  rep.pnl_ratio = pnl_ratio(pooled);
  const auto ap = accumulated_profit(std::span<const Trade>(pooled));
  rep.accumulated_gain = ap.gain;
  rep.accumulated_loss = ap.loss;
  rep.accumulated_profit = ap.ap;
  const auto mom = return_moments(std::span<const Trade>(pooled), policy.kurtosis);
  rep.mean_ret = mom.mean;
  rep.skewness = mom.skewness;
  rep.kurtosis = mom.kurtosis;

  std::vector<std::optional<double>> sh, so, dd;
  for (const auto* l : order) {
    const auto eq = l->equity();
    if (policy.sharpe_basis == SharpeBasis::EquityCurve) {
      sh.push_back(sharpe(eq));
      so.push_back(sortino(eq));
    }
    dd.push_back(eq.empty() ? std::nullopt : std::optional<double>(max_drawdown(eq)));
  }
  if (policy.sharpe_basis == SharpeBasis::EquityCurve) {
    rep.sharpe = detail::mean_defined(sh);
    rep.sortino = detail::mean_defined(so);
  } else {
    const auto r = trade_returns(pooled);
    rep.sharpe = sharpe_of_returns(r);
    rep.sortino = sortino_of_returns(r);
  }
  rep.mdd = detail::mean_defined(dd);
  return rep;
}

}  // namespace macdlab
