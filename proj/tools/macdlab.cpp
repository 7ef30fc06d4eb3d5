// macdlab command-line front end.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "macdlab/commands.hpp"
#include "macdlab/http_transport.hpp"

int main(int argc, char** argv) {
  using namespace macdlab;

  CLI::App app{"MACD strategy backtesting and GA parameter search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kSoftwareVersion));

  CommandOptions opts;
  std::string config, out;
  std::uint64_t seed = 0;
  std::vector<std::string> panels;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config, "run configuration (JSON)")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--out", out, "output directory (overrides config)");
    sub->add_option("--seed", seed, "RNG seed (overrides config)");
    sub->add_flag("--dry-run", opts.dry_run, "validate inputs without writing outputs");
  };

  auto* ingest = app.add_subcommand("ingest", "parse and validate bar data, write normalized CSVs");
  auto* backtest = app.add_subcommand("backtest", "run every strategy over every universe");
  auto* optimize = app.add_subcommand("optimize", "GA search for MACD periods");
  auto* plotdata = app.add_subcommand("plotdata", "per-trade return scatter and histogram CSVs");
  auto* report = app.add_subcommand("report", "render stored panels as tables");
  for (auto* s : {ingest, backtest, optimize, plotdata}) add_common(s, true);
  add_common(report, false);
  report->add_option("--panel", panels, "panel.json file(s) to merge")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(kExitUsage);
  }

  for (auto* s : {ingest, backtest, optimize, plotdata, report}) {
    if (!s->parsed()) continue;
    if (!config.empty()) opts.config = config;
    if (!out.empty()) opts.out = out;
    if (s->count("--seed")) opts.seed = seed;
    for (const auto& p : panels) opts.panels.emplace_back(p);
  }

  CommandContext ctx{std::cout, std::cerr, make_http_transport()};
  if (ingest->parsed()) return cmd_ingest(opts, ctx);
  if (backtest->parsed()) return cmd_backtest(opts, ctx);
  if (optimize->parsed()) return cmd_optimize(opts, ctx);
  if (plotdata->parsed()) return cmd_plotdata(opts, ctx);
  return cmd_report(opts, ctx);
}
