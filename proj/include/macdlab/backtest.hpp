#pragma once

#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "macdlab/detail/parallel.hpp"
#include "macdlab/detail/text.hpp"
#include "macdlab/error.hpp"
#include "macdlab/marketdata.hpp"
#include "macdlab/signals.hpp"

namespace macdlab {

enum class FillPrice { NextOpen, NextClose };

struct ExecutionConfig {
  double initial_cash = 80000.0;
  FillPrice fill_price = FillPrice::NextOpen;
  bool force_close_at_end = true;

  void check() const {
    if (!(initial_cash > 0.0) || !std::isfinite(initial_cash))
      throw Error(Errc::InvalidArgument, "initial_cash must be positive");
  }
  friend bool operator==(const ExecutionConfig&, const ExecutionConfig&) = default;
};

struct Trade {
  Date entry_date;
  Date exit_date;
  double entry_price = 0.0;
  double exit_price = 0.0;
  long long shares = 0;
  double pnl = 0.0;
  double ret = 0.0;
  bool forced_exit = false;

  friend bool operator==(const Trade&, const Trade&) = default;
};

struct EquityPoint {
  Date date;
  double cash = 0.0;
  long long shares = 0;
  double equity = 0.0;

  friend bool operator==(const EquityPoint&, const EquityPoint&) = default;
};

struct TradeLedger {
  std::string symbol;
  std::vector<Trade> trades;
  std::vector<EquityPoint> equity_curve;

  std::vector<double> equity() const {
    std::vector<double> out;
    out.reserve(equity_curve.size());
    for (const auto& p : equity_curve) out.push_back(p.equity);
    return out;
  }
};

namespace detail {

inline Trade close_trade(Date entry_date, double entry_price, long long shares, Date exit_date, double exit_price,
                         bool forced) {
  Trade t;
  t.entry_date = entry_date;
  t.exit_date = exit_date;
  t.entry_price = entry_price;
  t.exit_price = exit_price;
  t.shares = shares;
  t.pnl = static_cast<double>(shares) * (exit_price - entry_price);
  t.ret = exit_price / entry_price - 1.0;
  t.forced_exit = forced;
  return t;
}

/// Largest whole share count whose cost does not exceed `cash`.
inline long long affordable_shares(double cash, double price) {
  auto n = static_cast<long long>(std::floor(cash / price));
  while (n > 0 && static_cast<double>(n) * price > cash) --n;
  return n;
}

}  // namespace detail

/// All-in/all-out long-only simulation. A signal on bar t executes on bar
/// t+1 at that bar's open (or close). Signals that target the current state
/// are ignored; a signal on the last bar has nowhere to execute. With
/// `force_close_at_end`, a still-open position is sold at the final close,
/// and an entry that could only fill on the final bar is skipped since it
/// would open and close on the same day. Equity is marked at every close.
inline TradeLedger run_backtest(const ValidatedBarSeries& series, const SignalSeries& signals,
                                const ExecutionConfig& cfg) {
  cfg.check();
  if (series.empty()) throw Error(Errc::EmptySeries, series.symbol() + ": no bars");
  detail::require_aligned(series.size(), signals.size());

  const auto& bars = series.bars();
  const std::size_t n = bars.size();
  TradeLedger ledger{series.symbol(), {}, {}};
  ledger.equity_curve.reserve(n);

  double cash = cfg.initial_cash;
  long long shares = 0;
  Date entry_date;
  double entry_price = 0.0;

  for (std::size_t t = 0; t < n; ++t) {
    const Bar& bar = bars[t];
    if (t > 0) {
      const Signal s = signals[t - 1];
      const double fill = cfg.fill_price == FillPrice::NextOpen ? bar.open : bar.close;
      const bool last = t + 1 == n;
      if (s == Signal::Buy && shares == 0 && !(last && cfg.force_close_at_end)) {
        const long long qty = detail::affordable_shares(cash, fill);
        if (qty >= 1) {
          cash -= static_cast<double>(qty) * fill;
          shares = qty;
          entry_date = bar.date;
          entry_price = fill;
        }
      } else if (s == Signal::Sell && shares > 0) {
        cash += static_cast<double>(shares) * fill;
        ledger.trades.push_back(detail::close_trade(entry_date, entry_price, shares, bar.date, fill, false));
        shares = 0;
      }
    }
    if (t + 1 == n && cfg.force_close_at_end && shares > 0) {
      cash += static_cast<double>(shares) * bar.close;
      ledger.trades.push_back(detail::close_trade(entry_date, entry_price, shares, bar.date, bar.close, true));
      shares = 0;
    }
    ledger.equity_curve.push_back({bar.date, cash, shares, cash + static_cast<double>(shares) * bar.close});
  }
  return ledger;
}

/// Rebuilds the equity curve from closed trades alone. For ledgers produced
/// by run_backtest with force_close_at_end this reproduces equity_curve
/// exactly.
inline std::vector<EquityPoint> replay_equity(const ValidatedBarSeries& series, const std::vector<Trade>& trades,
                                              double initial_cash) {
  std::vector<EquityPoint> curve;
  curve.reserve(series.size());
  double cash = initial_cash;
  long long shares = 0;
  std::size_t k = 0;
  for (const Bar& bar : series.bars()) {
    if (k < trades.size() && shares == 0 && trades[k].entry_date == bar.date) {
      cash -= static_cast<double>(trades[k].shares) * trades[k].entry_price;
      shares = trades[k].shares;
    }
    if (k < trades.size() && shares > 0 && trades[k].exit_date == bar.date) {
      cash += static_cast<double>(shares) * trades[k].exit_price;
      shares = 0;
      ++k;
    }
    curve.push_back({bar.date, cash, shares, cash + static_cast<double>(shares) * bar.close});
  }
  if (k != trades.size()) throw Error(Errc::MisalignedSeries, "trades reference dates outside the series");
  return curve;
}

// ---------------------------------------------------------------------------
// Ledger files

inline std::string trades_csv(const TradeLedger& ledger, std::string_view preamble = {}) {
  std::string out(preamble);
  out += "entry_date,exit_date,entry_price,exit_price,shares,pnl,ret,forced_exit\n";
  for (const auto& t : ledger.trades) {
    out += t.entry_date.str() + ',' + t.exit_date.str() + ',' + detail::format_double(t.entry_price) + ',' +
           detail::format_double(t.exit_price) + ',' + std::to_string(t.shares) + ',' + detail::format_double(t.pnl) +
           ',' + detail::format_double(t.ret) + ',' + (t.forced_exit ? "true" : "false") + '\n';
  }
  return out;
}

inline std::string equity_csv(const TradeLedger& ledger, std::string_view preamble = {}) {
  std::string out(preamble);
  out += "date,cash,shares,equity\n";
  for (const auto& p : ledger.equity_curve)
    out += p.date.str() + ',' + detail::format_double(p.cash) + ',' + std::to_string(p.shares) + ',' +
           detail::format_double(p.equity) + '\n';
  return out;
}

/// Inverse of trades_csv; '#' comment lines are skipped.
inline std::vector<Trade> parse_trades_csv(std::string_view text) {
  std::vector<Trade> out;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    auto line = detail::trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    start = pos == std::string_view::npos ? text.size() : pos + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != "entry_date,exit_date,entry_price,exit_price,shares,pnl,ret,forced_exit")
        throw Error(Errc::MalformedHeader, "unexpected trades header");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    auto bad = [&] { return Error(Errc::MalformedRow, "trades line " + std::to_string(lineno), lineno); };
    if (f.size() != 8) throw bad();
    Trade t;
    auto d0 = Date::parse(f[0]), d1 = Date::parse(f[1]);
    auto ep = detail::parse_double(f[2]), xp = detail::parse_double(f[3]), sh = detail::parse_double(f[4]),
         pnl = detail::parse_double(f[5]), ret = detail::parse_double(f[6]);
    if (!d0 || !d1 || !ep || !xp || !sh || !pnl || !ret || (f[7] != "true" && f[7] != "false")) throw bad();
    t.entry_date = *d0;
    t.exit_date = *d1;
    t.entry_price = *ep;
    t.exit_price = *xp;
    t.shares = static_cast<long long>(*sh);
    t.pnl = *pnl;
    t.ret = *ret;
    t.forced_exit = f[7] == "true";
    out.push_back(t);
  }
  if (!header_seen) throw Error(Errc::MalformedHeader, "missing trades header");
  return out;
}

// ---------------------------------------------------------------------------
// Universe runs

struct Diagnostic {
  std::string symbol;
  std::string message;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct UniverseRun {
  std::vector<TradeLedger> ledgers;   // sorted by symbol
  std::vector<Diagnostic> diagnostics;  // sorted by symbol
};

/// Independent per-symbol backtests over the universe period, each funded
/// with its own initial_cash. Missing or failing symbols become diagnostics.
inline UniverseRun run_universe(const Universe& universe, const StrategySpec& spec, const ExecutionConfig& cfg,
                                const std::map<std::string, ValidatedBarSeries>& data, unsigned threads = 1) {
  spec.check();
  cfg.check();
  std::vector<std::string> symbols = universe.symbols;
  std::sort(symbols.begin(), symbols.end());

  struct Slot {
    std::optional<TradeLedger> ledger;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(symbols.size());
  detail::parallel_for(symbols.size(), threads, [&](std::size_t i) {
    auto it = data.find(symbols[i]);
    if (it == data.end()) {
      slots[i].error = "no data";
      return;
    }
    try {
      auto series = window(it->second, universe.period.start, universe.period.end);
      if (series.empty()) {
        slots[i].error = "no bars inside " + universe.period.start.str() + ".." + universe.period.end.str();
        return;
      }
      slots[i].ledger = run_backtest(series, generate_signals(series, spec), cfg);
    } catch (const Error& ex) {
      slots[i].error = ex.what();
    }
  });

  UniverseRun run;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (slots[i].ledger) run.ledgers.push_back(std::move(*slots[i].ledger));
    else run.diagnostics.push_back({symbols[i], *slots[i].error});
  }
  return run;
}

}  // namespace macdlab
