#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "macdlab/backtest.hpp"
#include "macdlab/detail/text.hpp"
#include "macdlab/error.hpp"
#include "macdlab/marketdata.hpp"
#include "macdlab/metrics.hpp"
#include "macdlab/optimizer.hpp"
#include "macdlab/signals.hpp"

namespace macdlab {

using nlohmann::json;

namespace detail {

[[noreturn]] inline void config_error(const std::string& why) { throw Error(Errc::InvalidConfig, why); }

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) config_error(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) config_error(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(where + "." + key + ": wrong type");
  }
}

inline GeneRange read_range(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    config_error(where + ": expected [lo, hi]");
  return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strategy specs

inline json to_json(const StrategySpec& s) {
  const auto& p = s.params;
  return {{"kind", std::string(to_string(s.kind))},
          {"label", s.name()},
          {"params",
           {{"fast", p.macd.fast},
            {"slow", p.macd.slow},
            {"signal", p.macd.signal},
            {"bb_window", p.bb_window},
            {"bb_k", p.bb_k},
            {"bb_std", p.bb_std == StdDevKind::Population ? "population" : "sample"},
            {"bbw_short", p.bbw_short},
            {"bbw_long", p.bbw_long},
            {"sar_af0", p.sar_af0},
            {"sar_afmax", p.sar_afmax},
            {"mfi_window", p.mfi_window},
            {"mfi_lower", p.mfi_lower},
            {"mfi_upper", p.mfi_upper},
            {"rsi_window", p.rsi_window},
            {"rsi_lower", p.rsi_lower},
            {"rsi_upper", p.rsi_upper},
            {"lookback", p.lookback},
            {"quantifier", p.quantifier == Quantifier::All ? "all" : "any"},
            {"bandwidth", p.bandwidth},
            {"vpvma_sell", p.vpvma_sell == VpvmaSellMode::Literal ? "literal" : "corrected"}}}};
}

/// Accepts a bare kind name ("MacdRSI") or {"kind", "label"?, "params"?}.
inline StrategySpec strategy_from_json(const json& v) {
  StrategySpec s;
  std::string kind;
  if (v.is_string()) {
    kind = v.get<std::string>();
  } else {
    detail::reject_unknown_keys(v, {"kind", "label", "params"}, "strategy");
    detail::read(v, "kind", kind, "strategy");
    detail::read(v, "label", s.label, "strategy");
  }
  auto k = parse_strategy_kind(kind);
  if (!k) detail::config_error("unknown strategy kind '" + kind + "'");
  s.kind = *k;
  if (v.is_object() && v.contains("params")) {
    const auto& p = v.at("params");
    const std::string where = "strategy " + kind + " params";
    detail::reject_unknown_keys(p,
                                {"fast", "slow", "signal", "bb_window", "bb_k", "bb_std", "bbw_short", "bbw_long",
                                 "sar_af0", "sar_afmax", "mfi_window", "mfi_lower", "mfi_upper", "rsi_window",
                                 "rsi_lower", "rsi_upper", "lookback", "quantifier", "bandwidth", "vpvma_sell"},
                                where);
    auto& sp = s.params;
    detail::read(p, "fast", sp.macd.fast, where);
    detail::read(p, "slow", sp.macd.slow, where);
    detail::read(p, "signal", sp.macd.signal, where);
    detail::read(p, "bb_window", sp.bb_window, where);
    detail::read(p, "bb_k", sp.bb_k, where);
    detail::read(p, "bbw_short", sp.bbw_short, where);
    detail::read(p, "bbw_long", sp.bbw_long, where);
    detail::read(p, "sar_af0", sp.sar_af0, where);
    detail::read(p, "sar_afmax", sp.sar_afmax, where);
    detail::read(p, "mfi_window", sp.mfi_window, where);
    detail::read(p, "mfi_lower", sp.mfi_lower, where);
    detail::read(p, "mfi_upper", sp.mfi_upper, where);
    detail::read(p, "rsi_window", sp.rsi_window, where);
    detail::read(p, "rsi_lower", sp.rsi_lower, where);
    detail::read(p, "rsi_upper", sp.rsi_upper, where);
    detail::read(p, "lookback", sp.lookback, where);
    detail::read(p, "bandwidth", sp.bandwidth, where);
    std::string text;
    if (p.contains("bb_std")) {
      detail::read(p, "bb_std", text, where);
      if (text == "population") sp.bb_std = StdDevKind::Population;
      else if (text == "sample") sp.bb_std = StdDevKind::Sample;
      else detail::config_error(where + ".bb_std: expected population|sample");
    }
    if (p.contains("quantifier")) {
      detail::read(p, "quantifier", text, where);
      if (text == "all") sp.quantifier = Quantifier::All;
      else if (text == "any") sp.quantifier = Quantifier::Any;
      else detail::config_error(where + ".quantifier: expected all|any");
    }
    if (p.contains("vpvma_sell")) {
      detail::read(p, "vpvma_sell", text, where);
      if (text == "literal") sp.vpvma_sell = VpvmaSellMode::Literal;
      else if (text == "corrected") sp.vpvma_sell = VpvmaSellMode::Corrected;
      else detail::config_error(where + ".vpvma_sell: expected literal|corrected");
    }
  }
  try {
    s.check();
  } catch (const Error& ex) {
    detail::config_error(std::string("strategy ") + kind + ": " + ex.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Execution, metrics, GA

inline json to_json(const ExecutionConfig& c) {
  return {{"initial_cash", c.initial_cash},
          {"fill_price", c.fill_price == FillPrice::NextOpen ? "NextOpen" : "NextClose"},
          {"force_close_at_end", c.force_close_at_end}};
}

inline ExecutionConfig execution_from_json(const json& v) {
  detail::reject_unknown_keys(v, {"initial_cash", "fill_price", "force_close_at_end"}, "execution");
  ExecutionConfig c;
  detail::read(v, "initial_cash", c.initial_cash, "execution");
  detail::read(v, "force_close_at_end", c.force_close_at_end, "execution");
  if (v.contains("fill_price")) {
    std::string f;
    detail::read(v, "fill_price", f, "execution");
    if (f == "NextOpen") c.fill_price = FillPrice::NextOpen;
    else if (f == "NextClose") c.fill_price = FillPrice::NextClose;
    else detail::config_error("execution.fill_price: expected NextOpen|NextClose");
  }
  if (!(c.initial_cash > 0.0)) detail::config_error("execution.initial_cash must be positive");
  return c;
}

inline AggregationPolicy policy_from_json(const json& v) {
  detail::reject_unknown_keys(v, {"sharpe_basis", "kurtosis"}, "metrics");
  AggregationPolicy p;
  std::string text;
  if (v.contains("sharpe_basis")) {
    detail::read(v, "sharpe_basis", text, "metrics");
    if (text == "equity_curve") p.sharpe_basis = SharpeBasis::EquityCurve;
    else if (text == "per_trade") p.sharpe_basis = SharpeBasis::PerTrade;
    else detail::config_error("metrics.sharpe_basis: expected equity_curve|per_trade");
  }
  if (v.contains("kurtosis")) {
    detail::read(v, "kurtosis", text, "metrics");
    if (text == "raw") p.kurtosis = KurtosisKind::Raw;
    else if (text == "excess") p.kurtosis = KurtosisKind::Excess;
    else detail::config_error("metrics.kurtosis: expected raw|excess");
  }
  return p;
}

inline json to_json(const GaConfig& g) {
  return {{"population_size", g.population_size},
          {"max_iterations", g.max_iterations},
          {"fast_range", {g.fast_range.lo, g.fast_range.hi}},
          {"slow_range", {g.slow_range.lo, g.slow_range.hi}},
          {"signal_range", {g.signal_range.lo, g.signal_range.hi}},
          {"mutation_prob", g.mutation_prob},
          {"elitism", g.elitism},
          {"convergence_patience", g.convergence_patience}};
}

/// `"preset": "widened"` starts from GaConfig::widened() before overrides.
inline GaConfig ga_from_json(const json& v) {
  detail::reject_unknown_keys(v,
                              {"preset", "population_size", "max_iterations", "fast_range", "slow_range",
                               "signal_range", "mutation_prob", "elitism", "convergence_patience"},
                              "ga");
  GaConfig g;
  if (v.contains("preset")) {
    std::string preset;
    detail::read(v, "preset", preset, "ga");
    if (preset == "widened") g = GaConfig::widened();
    else if (preset != "default") detail::config_error("ga.preset: expected default|widened");
  }
  detail::read(v, "population_size", g.population_size, "ga");
  detail::read(v, "max_iterations", g.max_iterations, "ga");
  detail::read(v, "mutation_prob", g.mutation_prob, "ga");
  detail::read(v, "elitism", g.elitism, "ga");
  detail::read(v, "convergence_patience", g.convergence_patience, "ga");
  if (v.contains("fast_range")) g.fast_range = detail::read_range(v.at("fast_range"), "ga.fast_range");
  if (v.contains("slow_range")) g.slow_range = detail::read_range(v.at("slow_range"), "ga.slow_range");
  if (v.contains("signal_range")) g.signal_range = detail::read_range(v.at("signal_range"), "ga.signal_range");
  try {
    g.check();
  } catch (const Error& ex) {
    if (ex.code() == Errc::InfeasibleRanges) throw;
    detail::config_error(std::string("ga: ") + ex.what());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Run configuration

struct DataSource {
  std::optional<std::filesystem::path> dir;  // <dir>/<symbol>.csv
  std::optional<std::string> url_template;   // remote fetch
  std::filesystem::path cache_dir = "cache";
};

/// One GA run: the fitness sums over `symbols` (one ETF by default).
struct OptimizeTarget {
  std::string name;
  std::vector<std::string> symbols;
  std::optional<Period> period;
  std::optional<std::filesystem::path> compare_universe;
};

struct OptimizeConfig {
  StrategyKind rule = StrategyKind::MacdCrossoverSigAbove0;
  std::vector<OptimizeTarget> targets;
  bool exhaustive = false;  // also run the exhaustive oracle
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::vector<std::filesystem::path> universe_files;
  DataSource data;
  std::vector<StrategySpec> strategies;
  ExecutionConfig execution;
  AggregationPolicy policy;
  std::optional<GaConfig> ga;
  std::optional<OptimizeConfig> optimize;
  double bin_width = 0.05;
  bool write_ledgers = true;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  json source;  // document as given, for fingerprinting

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }

  /// Fingerprint of everything that influences results. The output
  /// directory and thread count are excluded.
  std::string hash() const {
    json doc = source;
    doc.erase("output_dir");
    doc.erase("threads");
    doc["seed"] = seed;
    doc["resolved"] = {{"execution", to_json(execution)}, {"metrics", policy.describe()}};
    json strategies = json::array();
    for (const auto& s : this->strategies) strategies.push_back(to_json(s));
    doc["resolved"]["strategies"] = strategies;
    if (ga) doc["resolved"]["ga"] = to_json(*ga);
    return detail::hex64(detail::fnv1a(doc.dump()));
  }
};

inline std::optional<Period> period_from_json(const json& v, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  detail::reject_unknown_keys(v, {"start", "end"}, where);
  std::string s, e;
  detail::read(v, "start", s, where);
  detail::read(v, "end", e, where);
  auto ds = Date::parse(s), de = Date::parse(e);
  if (!ds || !de) detail::config_error(where + ": dates must be YYYY-MM-DD");
  if (de < ds) detail::config_error(where + ": start after end");
  return Period{*ds, *de};
}

inline RunConfig parse_run_config(const json& doc, std::filesystem::path base_dir) {
  detail::reject_unknown_keys(doc,
                              {"universe", "universes", "data", "strategies", "execution", "metrics", "ga", "optimize",
                               "plot", "write_ledgers", "output_dir", "seed", "threads"},
                              "config");
  RunConfig c;
  c.base_dir = std::move(base_dir);
  c.source = doc;

  if (doc.contains("universe")) c.universe_files.emplace_back(doc.at("universe").get<std::string>());
  if (doc.contains("universes")) {
    std::vector<std::string> files;
    detail::read(doc, "universes", files, "config");
    for (auto& f : files) c.universe_files.emplace_back(f);
  }

  if (!doc.contains("data")) detail::config_error("config: missing 'data'");
  {
    const auto& d = doc.at("data");
    detail::reject_unknown_keys(d, {"dir", "remote"}, "data");
    if (d.contains("dir")) c.data.dir = d.at("dir").get<std::string>();
    if (d.contains("remote")) {
      const auto& r = d.at("remote");
      detail::reject_unknown_keys(r, {"url_template", "cache_dir"}, "data.remote");
      std::string url, cache = "cache";
      detail::read(r, "url_template", url, "data.remote");
      detail::read(r, "cache_dir", cache, "data.remote");
      if (url.empty()) detail::config_error("data.remote.url_template is required");
      c.data.url_template = url;
      c.data.cache_dir = cache;
    }
    if (c.data.dir.has_value() == c.data.url_template.has_value())
      detail::config_error("data: give exactly one of 'dir' or 'remote'");
  }

  if (doc.contains("strategies")) {
    const auto& s = doc.at("strategies");
    if (s.is_string() && s.get<std::string>() == "all") {
      for (auto k : kAllStrategies) c.strategies.push_back(StrategySpec{k, {}, {}});
    } else if (s.is_array()) {
      for (const auto& item : s) c.strategies.push_back(strategy_from_json(item));
    } else {
      detail::config_error("strategies: expected \"all\" or an array");
    }
    std::set<std::string> names;
    for (const auto& spec : c.strategies)
      if (!names.insert(spec.name()).second)
        detail::config_error("strategies: duplicate label '" + spec.name() + "'; set distinct labels");
  }

  if (doc.contains("execution")) c.execution = execution_from_json(doc.at("execution"));
  if (doc.contains("metrics")) c.policy = policy_from_json(doc.at("metrics"));
  if (doc.contains("ga")) c.ga = ga_from_json(doc.at("ga"));
  if (doc.contains("optimize")) {
    const auto& o = doc.at("optimize");
    detail::reject_unknown_keys(o, {"rule", "targets", "exhaustive"}, "optimize");
    OptimizeConfig oc;
    std::string rule = std::string(to_string(oc.rule));
    detail::read(o, "rule", rule, "optimize");
    auto k = parse_strategy_kind(rule);
    if (!k) detail::config_error("optimize.rule: unknown strategy kind '" + rule + "'");
    oc.rule = *k;
    detail::read(o, "exhaustive", oc.exhaustive, "optimize");
    if (!o.contains("targets") || !o.at("targets").is_array() || o.at("targets").empty())
      detail::config_error("optimize.targets: expected a non-empty array");
    for (const auto& t : o.at("targets")) {
      detail::reject_unknown_keys(t, {"name", "symbols", "period", "compare_universe"}, "optimize.target");
      OptimizeTarget tgt;
      detail::read(t, "symbols", tgt.symbols, "optimize.target");
      if (tgt.symbols.empty()) detail::config_error("optimize.target: symbols must be non-empty");
      tgt.name = tgt.symbols.front();
      detail::read(t, "name", tgt.name, "optimize.target");
      if (t.contains("period")) tgt.period = period_from_json(t.at("period"), "optimize.target.period");
      if (t.contains("compare_universe")) tgt.compare_universe = t.at("compare_universe").get<std::string>();
      oc.targets.push_back(std::move(tgt));
    }
    c.optimize = std::move(oc);
  }
  if (doc.contains("plot")) {
    detail::reject_unknown_keys(doc.at("plot"), {"bin_width"}, "plot");
    detail::read(doc.at("plot"), "bin_width", c.bin_width, "plot");
    if (!(c.bin_width > 0.0)) detail::config_error("plot.bin_width must be positive");
  }
  detail::read(doc, "write_ledgers", c.write_ledgers, "config");
  std::string out = c.output_dir.string();
  detail::read(doc, "output_dir", out, "config");
  c.output_dir = out;
  detail::read(doc, "seed", c.seed, "config");
  detail::read(doc, "threads", c.threads, "config");
  if (c.threads == 0) c.threads = 1;
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path.string()));
  } catch (const json::parse_error& ex) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + ex.what());
  } catch (const Error& ex) {
    throw Error(Errc::InvalidConfig, ex.what());
  }
  return parse_run_config(doc, path.parent_path());
}

}  // namespace macdlab
