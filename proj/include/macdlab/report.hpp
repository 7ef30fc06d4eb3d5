#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macdlab/backtest.hpp"
#include "macdlab/detail/text.hpp"
#include "macdlab/error.hpp"
#include "macdlab/metrics.hpp"

namespace macdlab {

inline constexpr const char* kSoftwareVersion = "macdlab 1.0.0";

struct PanelRow {
  std::string universe;
  std::string strategy;
  StrategyReport report;
  std::vector<Diagnostic> diagnostics;
};

struct PanelMetadata {
  std::string config_hash;
  std::string data_start;  // earliest bar used, YYYY-MM-DD
  std::string data_end;
  std::string software_version = kSoftwareVersion;
  std::string aggregation_policy;
};

/// One row per (universe, strategy).
struct PanelReport {
  PanelMetadata meta;
  std::vector<PanelRow> rows;
};

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> opt_from(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

inline std::string csv_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string cell(const std::optional<double>& v, int precision) {
  return v ? format_fixed(*v, precision) : std::string("-");
}

}  // namespace detail

inline std::string config_preamble(const std::string& hash) { return "# config_hash: " + hash + "\n"; }

inline nlohmann::json to_json(const StrategyReport& r) {
  using detail::opt;
  return {{"nt", r.nt},
          {"wins", r.wins},
          {"losses", r.losses},
          {"flat", r.flat},
          {"symbols", r.symbols},
          {"win_rate", opt(r.win_rate)},
          {"pnl_ratio", opt(r.pnl_ratio)},
          {"sharpe", opt(r.sharpe)},
          {"sortino", opt(r.sortino)},
          {"mdd", opt(r.mdd)},
          {"accumulated_gain", r.accumulated_gain},
          {"accumulated_loss", r.accumulated_loss},
          {"accumulated_profit", r.accumulated_profit},
          {"mean_ret", opt(r.mean_ret)},
          {"skewness", opt(r.skewness)},
          {"kurtosis", opt(r.kurtosis)}};
}

inline StrategyReport report_from_json(const nlohmann::json& v) {
  using detail::opt_from;
  StrategyReport r;
  r.nt = v.at("nt").get<std::size_t>();
  r.wins = v.at("wins").get<std::size_t>();
  r.losses = v.at("losses").get<std::size_t>();
  r.flat = v.at("flat").get<std::size_t>();
  r.symbols = v.at("symbols").get<std::size_t>();
  r.win_rate = opt_from(v.at("win_rate"));
  r.pnl_ratio = opt_from(v.at("pnl_ratio"));
  r.sharpe = opt_from(v.at("sharpe"));
  r.sortino = opt_from(v.at("sortino"));
  r.mdd = opt_from(v.at("mdd"));
  r.accumulated_gain = v.at("accumulated_gain").get<double>();
  r.accumulated_loss = v.at("accumulated_loss").get<double>();
  r.accumulated_profit = v.at("accumulated_profit").get<double>();
  r.mean_ret = opt_from(v.at("mean_ret"));
  r.skewness = opt_from(v.at("skewness"));
  r.kurtosis = opt_from(v.at("kurtosis"));
  return r;
}

inline nlohmann::json to_json(const PanelReport& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : p.rows) {
    nlohmann::json diags = nlohmann::json::array();
    for (const auto& d : row.diagnostics) diags.push_back({{"symbol", d.symbol}, {"message", d.message}});
    rows.push_back({{"universe", row.universe},
                    {"strategy", row.strategy},
                    {"metrics", to_json(row.report)},
                    {"diagnostics", diags}});
  }
  return {{"metadata",
           {{"config_hash", p.meta.config_hash},
            {"data_start", p.meta.data_start},
            {"data_end", p.meta.data_end},
            {"software_version", p.meta.software_version},
            {"aggregation_policy", p.meta.aggregation_policy}}},
          {"rows", rows}};
}

inline PanelReport panel_from_json(const nlohmann::json& v) {
  PanelReport p;
  try {
    const auto& m = v.at("metadata");
    p.meta.config_hash = m.at("config_hash").get<std::string>();
    p.meta.data_start = m.at("data_start").get<std::string>();
    p.meta.data_end = m.at("data_end").get<std::string>();
    p.meta.software_version = m.at("software_version").get<std::string>();
    p.meta.aggregation_policy = m.at("aggregation_policy").get<std::string>();
    for (const auto& r : v.at("rows")) {
      PanelRow row;
      row.universe = r.at("universe").get<std::string>();
      row.strategy = r.at("strategy").get<std::string>();
      row.report = report_from_json(r.at("metrics"));
      for (const auto& d : r.at("diagnostics"))
        row.diagnostics.push_back({d.at("symbol").get<std::string>(), d.at("message").get<std::string>()});
      p.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::MalformedRow, std::string("panel document: ") + ex.what());
  }
  return p;
}

/// Concatenates panels; all must carry the same config hash.
inline PanelReport merge_panels(const std::vector<PanelReport>& panels) {
  if (panels.empty()) throw Error(Errc::InvalidArgument, "no panels to merge");
  PanelReport out;
  out.meta = panels.front().meta;
  for (const auto& p : panels) {
    if (p.meta.config_hash != out.meta.config_hash)
      throw Error(Errc::HashMismatch, "panel hash " + p.meta.config_hash + " != " + out.meta.config_hash);
    out.meta.data_start = std::min(out.meta.data_start, p.meta.data_start);
    out.meta.data_end = std::max(out.meta.data_end, p.meta.data_end);
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
  }
  return out;
}

inline std::string panel_csv(const PanelReport& p) {
  std::string out = config_preamble(p.meta.config_hash);
  out += "universe,strategy,nt,win_rate,pnl_ratio,sharpe,sortino,mdd,gain,loss,ap,mean_ret,skewness,kurtosis\n";
  for (const auto& row : p.rows) {
    const auto& r = row.report;
    out += row.universe + ',' + row.strategy + ',' + std::to_string(r.nt) + ',' + detail::csv_opt(r.win_rate) + ',' +
           detail::csv_opt(r.pnl_ratio) + ',' + detail::csv_opt(r.sharpe) + ',' + detail::csv_opt(r.sortino) + ',' +
           detail::csv_opt(r.mdd) + ',' + detail::format_double(r.accumulated_gain) + ',' +
           detail::format_double(r.accumulated_loss) + ',' + detail::format_double(r.accumulated_profit) + ',' +
           detail::csv_opt(r.mean_ret) + ',' + detail::csv_opt(r.skewness) + ',' + detail::csv_opt(r.kurtosis) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plain-text tables

/// Left-aligned first column, right-aligned numeric columns.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void section(std::string title) { rows_.push_back({"\x01" + std::move(title)}); }

  std::string render() const {
    std::vector<std::size_t> width(header_.size(), 0);
    auto widen = [&](const std::vector<std::string>& r) {
      if (!r.empty() && !r[0].empty() && r[0][0] == '\x01') return;
      for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
    };
    widen(header_);
    for (const auto& r : rows_) widen(r);
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    auto line = [&](const std::vector<std::string>& r) {
      std::string s;
      for (std::size_t i = 0; i < width.size(); ++i) {
        const std::string& c = i < r.size() ? r[i] : std::string();
        const std::string pad(width[i] - std::min(width[i], c.size()), ' ');
        s += i == 0 ? c + pad : pad + c;
        if (i + 1 < width.size()) s += "  ";
      }
      while (!s.empty() && s.back() == ' ') s.pop_back();
      return s + '\n';
    };
    std::string out = line(header_);
    out += std::string(total > 2 ? total - 2 : 0, '-') + '\n';
    for (const auto& r : rows_) {
      if (!r.empty() && !r[0].empty() && r[0][0] == '\x01') out += r[0].substr(1) + '\n';
      else out += line(r);
    }
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

namespace detail {
template <class Fn>
void by_universe(const PanelReport& p, Fn&& fn) {
  std::vector<std::string> order;
  for (const auto& r : p.rows)
    if (std::find(order.begin(), order.end(), r.universe) == order.end()) order.push_back(r.universe);
  for (const auto& u : order) {
    std::vector<const PanelRow*> rows;
    for (const auto& r : p.rows)
      if (r.universe == u) rows.push_back(&r);
    fn(u, rows);
  }
}
}  // namespace detail

/// NT, AP, win rate, P&L, Sharpe, Sortino, MDD per strategy, one panel per
/// universe.
inline std::string performance_table(const PanelReport& p) {
  TextTable t({"Strategy", "NT", "AP", "Win rate", "P&L", "SR", "Sortino", "MDD"});
  detail::by_universe(p, [&](const std::string& u, const std::vector<const PanelRow*>& rows) {
    t.section("Panel: " + u);
    for (const auto* row : rows) {
      const auto& r = row->report;
      t.add({row->strategy, std::to_string(r.nt), detail::format_fixed(r.accumulated_profit, 2),
             detail::cell(r.win_rate, 2), detail::cell(r.pnl_ratio, 2), detail::cell(r.sharpe, 2),
             detail::cell(r.sortino, 2), detail::cell(r.mdd, 2)});
    }
  });
  return t.render();
}

inline std::string moments_table(const PanelReport& p) {
  TextTable t({"Strategy", "Mean Return", "Skewness", "Kurtosis"});
  detail::by_universe(p, [&](const std::string& u, const std::vector<const PanelRow*>& rows) {
    t.section("Panel: " + u);
    for (const auto* row : rows)
      t.add({row->strategy, detail::cell(row->report.mean_ret, 4), detail::cell(row->report.skewness, 4),
             detail::cell(row->report.kurtosis, 4)});
  });
  return t.render();
}

/// Rows of one universe sorted by accumulated profit, highest first.
inline std::vector<const PanelRow*> ap_ranking(const PanelReport& p, const std::string& universe) {
  std::vector<const PanelRow*> rows;
  for (const auto& r : p.rows)
    if (r.universe == universe) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const PanelRow* a, const PanelRow* b) {
    return a->report.accumulated_profit > b->report.accumulated_profit;
  });
  return rows;
}

inline std::string ap_table(const PanelReport& p) {
  TextTable t({"Strategy", "Gain", "Loss", "AP"});
  detail::by_universe(p, [&](const std::string& u, const std::vector<const PanelRow*>&) {
    t.section("Panel: " + u);
    for (const auto* row : ap_ranking(p, u))
      t.add({row->strategy, detail::format_fixed(row->report.accumulated_gain, 2),
             detail::format_fixed(row->report.accumulated_loss, 2),
             detail::format_fixed(row->report.accumulated_profit, 2)});
  });
  return t.render();
}

inline std::string ap_ranking_csv(const PanelReport& p) {
  std::string out = config_preamble(p.meta.config_hash);
  out += "universe,rank,strategy,gain,loss,ap\n";
  detail::by_universe(p, [&](const std::string& u, const std::vector<const PanelRow*>&) {
    int rank = 0;
    for (const auto* row : ap_ranking(p, u))
      out += u + ',' + std::to_string(++rank) + ',' + row->strategy + ',' +
             detail::format_double(row->report.accumulated_gain) + ',' +
             detail::format_double(row->report.accumulated_loss) + ',' +
             detail::format_double(row->report.accumulated_profit) + '\n';
  });
  return out;
}

inline std::string render_report(const PanelReport& p) {
  std::string out;
  out += "config_hash: " + p.meta.config_hash + "\n";
  out += "data: " + p.meta.data_start + " .. " + p.meta.data_end + "\n";
  out += "software: " + p.meta.software_version + "\n";
  out += "aggregation: " + p.meta.aggregation_policy + "\n\n";
  out += "Performance\n" + performance_table(p) + "\n";
  out += "Per-trade return moments\n" + moments_table(p) + "\n";
  out += "Accumulated profit ranking\n" + ap_table(p);
  return out;
}

// ---------------------------------------------------------------------------
// Plot data

struct HistogramBin {
  long long index = 0;  // bin covers [index*width, (index+1)*width)
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

/// Non-empty bins only, ascending. A 1e-9 relative nudge keeps values that
/// sit on a bin edge (0.15 with width 0.05) in the bin they name.
inline std::vector<HistogramBin> histogram(std::span<const double> values, double width) {
  if (!(width > 0.0)) throw Error(Errc::InvalidArgument, "bin width must be positive");
  std::map<long long, std::size_t> counts;
  for (double v : values) ++counts[static_cast<long long>(std::floor(v / width + 1e-9))];
  std::vector<HistogramBin> out;
  for (auto [k, n] : counts)
    out.push_back({k, static_cast<double>(k) * width, static_cast<double>(k + 1) * width, n});
  return out;
}

inline std::string histogram_csv(const std::vector<HistogramBin>& bins, std::string_view preamble = {}) {
  std::string out(preamble);
  out += "bin_lower,bin_upper,count\n";
  for (const auto& b : bins)
    out += detail::format_double(b.lower) + ',' + detail::format_double(b.upper) + ',' + std::to_string(b.count) + '\n';
  return out;
}

/// Pooled trades in symbol order, numbered from 1.
inline std::string scatter_csv(std::span<const TradeLedger> ledgers, std::string_view preamble = {}) {
  std::string out(preamble);
  out += "trade_index,return,symbol\n";
  std::size_t idx = 0;
  for (const auto& l : ledgers)
    for (const auto& t : l.trades) out += std::to_string(++idx) + ',' + detail::format_double(t.ret) + ',' + l.symbol + '\n';
  return out;
}

}  // namespace macdlab
