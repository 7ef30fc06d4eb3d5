#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macdlab/backtest.hpp"
#include "macdlab/config.hpp"
#include "macdlab/fetch.hpp"
#include "macdlab/marketdata.hpp"
#include "macdlab/metrics.hpp"
#include "macdlab/optimizer.hpp"
#include "macdlab/report.hpp"

namespace macdlab {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::InvalidUniverse:
    case Errc::InvalidArgument:
    case Errc::InfeasibleRanges:
      return kExitUsage;
    case Errc::MalformedHeader:
    case Errc::MalformedRow:
    case Errc::EmptySeries:
    case Errc::DuplicateDate:
    case Errc::InvertedRange:
    case Errc::NetworkFailure:
    case Errc::ProviderRejection:
    case Errc::HashMismatch:
    case Errc::Io:
    case Errc::SeriesTooShort:
    case Errc::WindowTooLarge:
    case Errc::ZeroVolumeWindow:
    case Errc::NonPositiveMiddle:
      return kExitData;
    case Errc::MisalignedSeries:
      return kExitInternal;
  }
  return kExitInternal;
}

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::vector<std::filesystem::path> panels;  // report only
};

/// Streams and transport used by commands. `transport` is only needed for
/// remote data sources.
struct CommandContext {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  HttpTransport transport;
};

namespace detail {

inline std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

inline std::string strategy_slug(const StrategySpec& s) {
  return slug(s.label.empty() ? std::string(to_string(s.kind)) : s.label);
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << content;
  if (!f.flush()) throw Error(Errc::Io, "cannot write " + path.string());
}

inline RunConfig prepare(const CommandOptions& opts) {
  if (!opts.config) throw Error(Errc::InvalidConfig, "--config is required");
  auto cfg = load_run_config(*opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.output_dir = opts.out ? *opts.out : cfg.resolve(cfg.output_dir);
  return cfg;
}

inline std::vector<Universe> load_universes(const RunConfig& cfg) {
  if (cfg.universe_files.empty()) throw Error(Errc::InvalidConfig, "no universe configured");
  std::vector<Universe> out;
  for (const auto& f : cfg.universe_files) {
    if (!std::filesystem::is_regular_file(cfg.resolve(f)))
      throw Error(Errc::InvalidConfig, "universe file " + cfg.resolve(f).string() + " not found");
    auto u = load_universe(cfg.resolve(f).string());
    for (const auto& prior : out)
      if (prior.name == u.name) throw Error(Errc::InvalidConfig, "duplicate universe name '" + u.name + "'");
    out.push_back(std::move(u));
  }
  return out;
}

struct LoadedData {
  std::map<std::string, ValidatedBarSeries> series;
  std::vector<Diagnostic> diagnostics;
};

/// Reads, parses and validates each symbol. Failures become diagnostics.
inline LoadedData load_symbols(const RunConfig& cfg, const CommandContext& ctx, const std::vector<std::string>& symbols,
                               const std::optional<Period>& period) {
  LoadedData out;
  std::optional<RemoteFetcher> fetcher;
  if (cfg.data.url_template) {
    if (!ctx.transport) throw Error(Errc::InvalidConfig, "remote data source configured but no transport available");
    if (!period) throw Error(Errc::InvalidConfig, "remote data needs a period");
    fetcher.emplace(*cfg.data.url_template, cfg.resolve(cfg.data.cache_dir), ctx.transport);
  }
  for (const auto& sym : symbols) {
    if (out.series.contains(sym)) continue;
    try {
      std::string text = fetcher ? fetcher->fetch(sym, *period)
                                 : read_file((cfg.resolve(*cfg.data.dir) / (sym + ".csv")).string());
      auto res = validate(parse_csv(text, sym));
      if (!res.valid()) {
        out.diagnostics.push_back({sym, std::to_string(res.violations.size()) + " bar violation(s), first " +
                                            res.violations.front().date.str() + " " + res.violations.front().rule});
        continue;
      }
      out.series.emplace(sym, std::move(res).take());
    } catch (const Error& ex) {
      out.diagnostics.push_back({sym, ex.what()});
    }
  }
  return out;
}

/// Load diagnostics win over backtest ones for the same symbol; the latter
/// only say the data was missing.
inline std::vector<Diagnostic> merged(std::vector<Diagnostic> a, const std::vector<Diagnostic>& b) {
  for (const auto& d : b)
    if (std::none_of(a.begin(), a.end(), [&](const Diagnostic& x) { return x.symbol == d.symbol; })) a.push_back(d);
  std::stable_sort(a.begin(), a.end(), [](const Diagnostic& x, const Diagnostic& y) { return x.symbol < y.symbol; });
  return a;
}

struct StrategyRun {
  const StrategySpec* spec;
  UniverseRun run;
};

struct UniverseRuns {
  Universe universe;
  LoadedData data;
  std::vector<StrategyRun> strategies;
};

inline std::vector<UniverseRuns> run_panels(const RunConfig& cfg, const CommandContext& ctx, bool compute) {
  if (cfg.strategies.empty()) throw Error(Errc::InvalidConfig, "no strategies configured");
  std::vector<UniverseRuns> out;
  for (auto& u : load_universes(cfg)) {
    UniverseRuns ur{u, load_symbols(cfg, ctx, u.symbols, u.period), {}};
    for (const auto& d : ur.data.diagnostics) ctx.err << "warning: " << u.name << "/" << d.symbol << ": " << d.message << "\n";
    if (compute)
      for (const auto& spec : cfg.strategies)
        ur.strategies.push_back({&spec, run_universe(u, spec, cfg.execution, ur.data.series, cfg.threads)});
    out.push_back(std::move(ur));
  }
  return out;
}

template <class Fn>
int guarded(const CommandContext& ctx, const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& ex) {
    ctx.err << name << ": " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    ctx.err << name << ": internal error: " << ex.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace detail

/// Parses and validates every input file, writes normalized CSVs to
/// <out>/data/ and a validation report. Exits 2 if any file is bad.
inline int cmd_ingest(const CommandOptions& opts, const CommandContext& ctx = {}) {
  return detail::guarded(ctx, "ingest", [&] {
    const auto cfg = detail::prepare(opts);
    const auto hash = cfg.hash();

    // (symbol, payload or error)
    std::vector<std::pair<std::string, std::function<std::string()>>> inputs;
    if (cfg.data.dir) {
      const auto dir = cfg.resolve(*cfg.data.dir);
      if (!std::filesystem::is_directory(dir)) throw Error(Errc::InvalidConfig, "data dir " + dir.string() + " missing");
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) inputs.emplace_back(f.stem().string(), [f] { return read_file(f.string()); });
    } else {
      if (!ctx.transport) throw Error(Errc::InvalidConfig, "remote data source configured but no transport available");
      for (const auto& u : detail::load_universes(cfg)) {
        auto fetcher = std::make_shared<RemoteFetcher>(*cfg.data.url_template, cfg.resolve(cfg.data.cache_dir), ctx.transport);
        for (const auto& s : u.symbols)
          inputs.emplace_back(s, [fetcher, s, p = u.period] { return fetcher->fetch(s, p); });
      }
    }

    nlohmann::json files = nlohmann::json::array();
    std::size_t bad = 0;
    for (const auto& [sym, load] : inputs) {
      nlohmann::json entry = {{"symbol", sym}};
      try {
        auto res = validate(parse_csv(load(), sym));
        if (res.valid()) {
          entry["status"] = "ok";
          entry["bars"] = res.series.size();
          entry["first"] = res.series.bars.front().date.str();
          entry["last"] = res.series.bars.back().date.str();
          if (!opts.dry_run) detail::write_text(cfg.output_dir / "data" / (sym + ".csv"), serialize_csv(res.series));
        } else {
          ++bad;
          entry["status"] = "invalid";
          nlohmann::json v = nlohmann::json::array();
          for (const auto& x : res.violations) v.push_back({{"date", x.date.str()}, {"rule", x.rule}});
          entry["violations"] = v;
          ctx.err << "ingest: " << sym << ": " << res.violations.size() << " violation(s)\n";
        }
      } catch (const Error& ex) {
        ++bad;
        entry["status"] = "error";
        entry["error"] = ex.what();
        if (ex.line()) entry["line"] = *ex.line();
        ctx.err << "ingest: " << ex.what() << "\n";
      }
      files.push_back(entry);
    }
    nlohmann::json report = {{"config_hash", hash}, {"software_version", kSoftwareVersion}, {"files", files}};
    if (!opts.dry_run) detail::write_text(cfg.output_dir / "validation.json", report.dump(2) + "\n");
    ctx.out << "ingest: " << inputs.size() - bad << " ok, " << bad << " rejected\n";
    if (inputs.empty()) {
      ctx.err << "ingest: no input files\n";
      return int(kExitData);
    }
    return bad == 0 ? int(kExitOk) : int(kExitData);
  });
}

/// Builds the panel report for the given runs.
inline PanelReport build_panel(const std::vector<detail::UniverseRuns>& runs, const RunConfig& cfg) {
  PanelReport panel;
  panel.meta.config_hash = cfg.hash();
  panel.meta.aggregation_policy = cfg.policy.describe();
  std::optional<Date> lo, hi;
  for (const auto& ur : runs)
    for (const auto& sr : ur.strategies) {
      for (const auto& l : sr.run.ledgers)
        if (!l.equity_curve.empty()) {
          if (!lo || l.equity_curve.front().date < *lo) lo = l.equity_curve.front().date;
          if (!hi || *hi < l.equity_curve.back().date) hi = l.equity_curve.back().date;
        }
      panel.rows.push_back({ur.universe.name, sr.spec->name(), aggregate(sr.run.ledgers, cfg.policy),
                            detail::merged(ur.data.diagnostics, sr.run.diagnostics)});
    }
  panel.meta.data_start = lo ? lo->str() : "";
  panel.meta.data_end = hi ? hi->str() : "";
  return panel;
}

/// Runs every configured strategy over every universe; writes panel.json,
/// panel.csv and per-symbol trade/equity ledgers.
inline int cmd_backtest(const CommandOptions& opts, const CommandContext& ctx = {}) {
  return detail::guarded(ctx, "backtest", [&] {
    const auto cfg = detail::prepare(opts);
    const auto runs = detail::run_panels(cfg, ctx, !opts.dry_run);
    bool any_data = false;
    for (const auto& ur : runs) any_data = any_data || !ur.data.series.empty();
    if (!any_data) {
      ctx.err << "backtest: no usable data for any symbol\n";
      return int(kExitData);
    }
    if (opts.dry_run) {
      ctx.out << "backtest: dry run ok (" << runs.size() << " universe(s), " << cfg.strategies.size()
              << " strategies)\n";
      return int(kExitOk);
    }
    const auto panel = build_panel(runs, cfg);
    const auto pre = config_preamble(panel.meta.config_hash);
    detail::write_text(cfg.output_dir / "panel.json", to_json(panel).dump(2) + "\n");
    detail::write_text(cfg.output_dir / "panel.csv", panel_csv(panel));
    if (cfg.write_ledgers)
      for (const auto& ur : runs)
        for (const auto& sr : ur.strategies) {
          const auto dir = cfg.output_dir / "ledgers" / detail::slug(ur.universe.name) / detail::strategy_slug(*sr.spec);
          for (const auto& l : sr.run.ledgers) {
            detail::write_text(dir / ("trades_" + detail::slug(l.symbol) + ".csv"), trades_csv(l, pre));
            detail::write_text(dir / ("equity_" + detail::slug(l.symbol) + ".csv"), equity_csv(l, pre));
          }
        }
    ctx.out << performance_table(panel);
    return int(kExitOk);
  });
}

/// Per-trade return scatter and histogram CSVs per (universe, strategy).
inline int cmd_plotdata(const CommandOptions& opts, const CommandContext& ctx = {}) {
  return detail::guarded(ctx, "plotdata", [&] {
    const auto cfg = detail::prepare(opts);
    const auto runs = detail::run_panels(cfg, ctx, !opts.dry_run);
    if (opts.dry_run) {
      ctx.out << "plotdata: dry run ok\n";
      return int(kExitOk);
    }
    const auto pre = config_preamble(cfg.hash());
    for (const auto& ur : runs)
      for (const auto& sr : ur.strategies) {
        const auto base = cfg.output_dir / "plot" / detail::slug(ur.universe.name);
        const auto name = detail::strategy_slug(*sr.spec);
        std::vector<double> rets;
        for (const auto& l : sr.run.ledgers)
          for (const auto& t : l.trades) rets.push_back(t.ret);
        detail::write_text(base / (name + "_scatter.csv"), scatter_csv(sr.run.ledgers, pre));
        detail::write_text(base / (name + "_hist.csv"), histogram_csv(histogram(rets, cfg.bin_width), pre));
      }
    ctx.out << "plotdata: wrote " << cfg.output_dir.string() << "/plot\n";
    return int(kExitOk);
  });
}

/// GA search per optimize target; writes best chromosomes, GA traces and,
/// when a comparison universe is given, baseline-vs-optimized metrics.
inline int cmd_optimize(const CommandOptions& opts, const CommandContext& ctx = {}) {
  return detail::guarded(ctx, "optimize", [&] {
    const auto cfg = detail::prepare(opts);
    if (!cfg.optimize) throw Error(Errc::InvalidConfig, "no 'optimize' section");
    const auto& oc = *cfg.optimize;
    const auto hash = cfg.hash();
    const auto pre = config_preamble(hash);
    const GaConfig ga_base = cfg.ga.value_or(GaConfig{});

    // Resolve every input before any search starts.
    struct Prepared {
      const OptimizeTarget* target;
      std::vector<ValidatedBarSeries> series;
      std::optional<Universe> compare;
    };
    std::vector<Prepared> prepared;
    for (const auto& t : oc.targets) {
      Prepared p{&t, {}, std::nullopt};
      if (t.compare_universe) {
        const auto path = cfg.resolve(*t.compare_universe);
        if (!std::filesystem::is_regular_file(path))
          throw Error(Errc::InvalidConfig, "compare universe " + path.string() + " not found");
        p.compare = load_universe(path.string());
      }
      auto period = t.period ? t.period : p.compare ? std::optional<Period>(p.compare->period) : std::nullopt;
      auto data = detail::load_symbols(cfg, ctx, t.symbols, period);
      if (!data.diagnostics.empty()) {
        for (const auto& d : data.diagnostics) ctx.err << "optimize: " << t.name << "/" << d.symbol << ": " << d.message << "\n";
        return int(kExitData);
      }
      for (const auto& s : t.symbols) {
        auto series = period ? window(data.series.at(s), period->start, period->end) : data.series.at(s);
        if (series.empty()) {
          ctx.err << "optimize: " << s << ": no bars in period\n";
          return int(kExitData);
        }
        p.series.push_back(std::move(series));
      }
      prepared.push_back(std::move(p));
    }
    if (opts.dry_run) {
      ctx.out << "optimize: dry run ok (" << prepared.size() << " target(s))\n";
      return int(kExitOk);
    }

    const auto dir = cfg.output_dir / "optimize";
    std::string best_csv = pre + "target,symbols,fast,slow,signal,fitness,generations,evaluations";
    if (oc.exhaustive) best_csv += ",exhaustive_fast,exhaustive_slow,exhaustive_signal,exhaustive_fitness";
    best_csv += "\n";
    std::string cmp_csv = pre + "target,universe,parameters,fast,slow,signal,nt,win_rate,pnl_ratio,sharpe,sortino,mdd,ap\n";
    nlohmann::json best_json = nlohmann::json::array();
    nlohmann::json cmp_json = nlohmann::json::array();
    bool any_compare = false;

    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto& p = prepared[i];
      GaConfig ga = ga_base;
      ga.seed = cfg.seed + i;
      ga.threads = cfg.threads;
      const StrategySpec base{oc.rule, {}, {}};
      const auto fitness = make_backtest_fitness(p.series, base, cfg.execution);
      const auto res = evolve(fitness, ga);

      std::string symbols;
      for (const auto& s : p.target->symbols) symbols += (symbols.empty() ? "" : " ") + s;
      best_csv += detail::slug(p.target->name) + ',' + symbols + ',' + std::to_string(res.best.fast) + ',' +
                  std::to_string(res.best.slow) + ',' + std::to_string(res.best.signal) + ',' +
                  detail::format_double(res.best_fitness) + ',' + std::to_string(res.trace.generations.size()) + ',' +
                  std::to_string(res.evaluations);
      nlohmann::json entry = {{"target", p.target->name},
                              {"symbols", p.target->symbols},
                              {"rule", std::string(to_string(oc.rule))},
                              {"seed", ga.seed},
                              {"best", {res.best.fast, res.best.slow, res.best.signal}},
                              {"fitness", res.best_fitness},
                              {"generations", res.trace.generations.size()},
                              {"evaluations", res.evaluations}};
      if (oc.exhaustive) {
        const auto ex = exhaustive_search(fitness, ga);
        best_csv += ',' + std::to_string(ex.best.fast) + ',' + std::to_string(ex.best.slow) + ',' +
                    std::to_string(ex.best.signal) + ',' + detail::format_double(ex.best_fitness);
        entry["exhaustive"] = {{"best", {ex.best.fast, ex.best.slow, ex.best.signal}},
                               {"fitness", ex.best_fitness},
                               {"evaluated", ex.evaluated}};
      }
      best_csv += '\n';
      best_json.push_back(entry);

      std::string trace = pre + "generation,best_fitness,mean_fitness,best_fast,best_slow,best_signal\n";
      for (const auto& g : res.trace.generations)
        trace += std::to_string(g.generation) + ',' + detail::format_double(g.best_fitness) + ',' +
                 detail::format_double(g.mean_fitness) + ',' + std::to_string(g.best.fast) + ',' +
                 std::to_string(g.best.slow) + ',' + std::to_string(g.best.signal) + '\n';
      detail::write_text(dir / ("ga_trace_" + detail::slug(p.target->name) + ".csv"), trace);

      if (p.compare) {
        any_compare = true;
        auto data = detail::load_symbols(cfg, ctx, p.compare->symbols, p.compare->period);
        for (const auto& [label, params] :
             {std::pair{std::string("traditional"), MacdParams{12, 26, 9}}, {std::string("optimized"), res.best.params()}}) {
          StrategySpec spec{oc.rule, {}, {}};
          spec.params.macd = params;
          const auto run = run_universe(*p.compare, spec, cfg.execution, data.series, cfg.threads);
          const auto r = aggregate(run.ledgers, cfg.policy);
          cmp_csv += detail::slug(p.target->name) + ',' + detail::slug(p.compare->name) + ',' + label + ',' +
                     std::to_string(params.fast) + ',' + std::to_string(params.slow) + ',' +
                     std::to_string(params.signal) + ',' + std::to_string(r.nt) + ',' + detail::csv_opt(r.win_rate) +
                     ',' + detail::csv_opt(r.pnl_ratio) + ',' + detail::csv_opt(r.sharpe) + ',' +
                     detail::csv_opt(r.sortino) + ',' + detail::csv_opt(r.mdd) + ',' +
                     detail::format_double(r.accumulated_profit) + '\n';
          cmp_json.push_back({{"target", p.target->name},
                              {"universe", p.compare->name},
                              {"parameters", label},
                              {"macd", {params.fast, params.slow, params.signal}},
                              {"metrics", to_json(r)}});
        }
      }
      ctx.out << "optimize: " << p.target->name << " -> (" << res.best.fast << "," << res.best.slow << ","
              << res.best.signal << ") fitness " << detail::format_fixed(res.best_fitness, 2) << "\n";
    }
    detail::write_text(dir / "best.csv", best_csv);
    detail::write_text(dir / "best.json",
                       nlohmann::json{{"config_hash", hash}, {"software_version", kSoftwareVersion}, {"results", best_json}}
                               .dump(2) + "\n");
    if (any_compare) {
      detail::write_text(dir / "comparison.csv", cmp_csv);
      detail::write_text(dir / "comparison.json",
                         nlohmann::json{{"config_hash", hash}, {"rows", cmp_json}}.dump(2) + "\n");
    }
    return int(kExitOk);
  });
}

/// Renders stored panels as text tables plus CSV and an AP ranking.
inline int cmd_report(const CommandOptions& opts, const CommandContext& ctx = {}) {
  return detail::guarded(ctx, "report", [&] {
    std::vector<std::filesystem::path> files = opts.panels;
    std::optional<std::filesystem::path> out_dir = opts.out;
    if (opts.config) {
      const auto cfg = detail::prepare(opts);
      if (files.empty()) files.push_back(cfg.output_dir / "panel.json");
      if (!out_dir) out_dir = cfg.output_dir;
    }
    if (files.empty()) throw Error(Errc::InvalidConfig, "report needs --config or --panel");
    if (!out_dir) out_dir = files.front().parent_path();

    std::vector<PanelReport> panels;
    for (const auto& f : files) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(read_file(f.string()));
      } catch (const nlohmann::json::parse_error& ex) {
        throw Error(Errc::MalformedRow, f.string() + ": " + ex.what());
      }
      panels.push_back(panel_from_json(doc));
    }
    const auto panel = merge_panels(panels);
    const auto text = render_report(panel);
    if (!opts.dry_run) {
      detail::write_text(*out_dir / "report.txt", text);
      detail::write_text(*out_dir / "report.csv", panel_csv(panel));
      detail::write_text(*out_dir / "ap_ranking.csv", ap_ranking_csv(panel));
    }
    ctx.out << text;
    return int(kExitOk);
  });
}

}  // namespace macdlab
