#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "macdlab/commands.hpp"
#include "support.hpp"

using namespace macdlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = MACDLAB_TEST_DATA;

/// A scratch directory with a config pointing at the bundled fixture.
struct Workspace {
  testsupport::TempDir tmp;
  std::ostringstream out, err;
  CommandContext ctx{out, err, {}};

  fs::path root() const { return tmp.path(); }

  fs::path config(json patch = json::object()) {
    json doc = {{"universe", kData + "/fixture10_universe.json"},
                {"data", {{"dir", kData + "/fixture10"}}},
                {"strategies", "all"},
                {"output_dir", "out"}};
    doc.merge_patch(patch);
    const auto p = root() / ("config_" + std::to_string(n_++) + ".json");
    testsupport::write_file(p, doc.dump(2));
    return p;
  }

  fs::path universe(const std::string& name, const json& symbols) {
    const auto p = root() / (name + ".json");
    testsupport::write_file(
        p, json{{"name", name}, {"symbols", symbols}, {"period", {{"start", "2015-01-01"}, {"end", "2021-12-31"}}}}.dump());
    return p;
  }

  CommandOptions opts(const fs::path& cfg, const std::string& out_dir = "out") const {
    CommandOptions o;
    o.config = cfg;
    o.out = root() / out_dir;
    return o;
  }

 private:
  int n_ = 0;
};

json tiny_optimize(bool exhaustive = true) {
  return {{"ga", {{"fast_range", {4, 6}}, {"slow_range", {7, 9}}, {"signal_range", {4, 6}}}},
          {"optimize", {{"exhaustive", exhaustive}, {"targets", {{{"symbols", {"STK01"}}}}}}}};
}

std::string fixture_csv(const std::string& sym) { return read_file(kData + "/fixture10/" + sym + ".csv"); }

}  // namespace

// ---------------------------------------------------------------------------
// ingest

TEST(Ingest, ValidDirectory) {
  Workspace w;
  ASSERT_EQ(cmd_ingest(w.opts(w.config()), w.ctx), kExitOk) << w.err.str();
  const auto report = json::parse(read_file((w.root() / "out/validation.json").string()));
  ASSERT_EQ(report["files"].size(), 10u);
  for (const auto& f : report["files"]) EXPECT_EQ(f["status"], "ok");
  EXPECT_EQ(report["config_hash"], load_run_config(w.config()).hash());
  const auto norm = read_file((w.root() / "out/data/STK03.csv").string());
  EXPECT_EQ(norm, serialize_csv(parse_csv(fixture_csv("STK03"), "STK03")));
}

TEST(Ingest, CorruptFileIsNamed) {
  Workspace w;
  testsupport::write_file(w.root() / "d/BROKEN.csv", "Date,Open,High,Low,Close,Volume\n2020-01-02,1,2,0.5,1.5,abc\n");
  const auto rc = cmd_ingest(w.opts(w.config({{"data", {{"dir", (w.root() / "d").string()}}}})), w.ctx);
  EXPECT_EQ(rc, kExitData);
  EXPECT_NE(w.err.str().find("BROKEN"), std::string::npos) << w.err.str();
}

TEST(Ingest, MixedDirectoryNormalizesTheValidFiles) {
  Workspace w;
  const auto d = w.root() / "mixed";
  testsupport::write_file(d / "STK01.csv", fixture_csv("STK01"));
  testsupport::write_file(d / "STK02.csv", fixture_csv("STK02"));
  testsupport::write_file(d / "HILO.csv", "Date,Open,High,Low,Close,Volume\n2020-01-02,1,0.5,2,1.5,100\n");
  testsupport::write_file(d / "NOHEAD.csv", "just,some,text\n");
  testsupport::write_file(d / "notes.txt", "ignored");
  EXPECT_EQ(cmd_ingest(w.opts(w.config({{"data", {{"dir", d.string()}}}})), w.ctx), kExitData);

  const auto report = json::parse(read_file((w.root() / "out/validation.json").string()));
  std::map<std::string, std::string> status;
  for (const auto& f : report["files"]) status[f["symbol"]] = f["status"];
  EXPECT_EQ(status, (std::map<std::string, std::string>{
                        {"HILO", "invalid"}, {"NOHEAD", "error"}, {"STK01", "ok"}, {"STK02", "ok"}}));
  EXPECT_TRUE(fs::exists(w.root() / "out/data/STK01.csv"));
  EXPECT_TRUE(fs::exists(w.root() / "out/data/STK02.csv"));
  EXPECT_FALSE(fs::exists(w.root() / "out/data/HILO.csv"));
  EXPECT_FALSE(fs::exists(w.root() / "out/data/NOHEAD.csv"));
}

TEST(Ingest, EmptyOrMissingDirectory) {
  Workspace w;
  fs::create_directories(w.root() / "empty");
  EXPECT_EQ(cmd_ingest(w.opts(w.config({{"data", {{"dir", (w.root() / "empty").string()}}}})), w.ctx), kExitData);
  EXPECT_EQ(cmd_ingest(w.opts(w.config({{"data", {{"dir", (w.root() / "nope").string()}}}})), w.ctx), kExitUsage);
}

TEST(Ingest, RemoteSourceUsesTransportAndCache) {
  Workspace w;
  int calls = 0;
  w.ctx.transport = [&](const std::string& url) -> HttpResponse {
    ++calls;
    const auto sym = url.substr(url.rfind('/') + 1, 5);
    return {200, fixture_csv(sym)};
  };
  auto cfg = w.config({{"data", {{"dir", nullptr}, {"remote", {{"url_template", "http://example.test/{symbol}?a={period1}"},
                                                                {"cache_dir", (w.root() / "cache").string()}}}}}});
  ASSERT_EQ(cmd_ingest(w.opts(cfg), w.ctx), kExitOk) << w.err.str();
  EXPECT_EQ(calls, 10);
  ASSERT_EQ(cmd_ingest(w.opts(cfg, "out2"), w.ctx), kExitOk);
  EXPECT_EQ(calls, 10);
}

// ---------------------------------------------------------------------------
// backtest

TEST(Backtest, FixturePanelHasNineRowsMatchingOracle) {
  Workspace w;
  ASSERT_EQ(cmd_backtest(w.opts(w.config()), w.ctx), kExitOk) << w.err.str();
  const auto panel = panel_from_json(json::parse(read_file((w.root() / "out/panel.json").string())));
  ASSERT_EQ(panel.rows.size(), 9u);
  const auto expected = json::parse(read_file(kData + "/oracle_expected.json"));
  for (const auto& row : panel.rows) {
    EXPECT_EQ(row.universe, "FIX10");
    const auto& e = expected["rows"][row.strategy];
    EXPECT_EQ(row.report.nt, e["nt"].get<std::size_t>()) << row.strategy;
    EXPECT_NEAR(row.report.accumulated_profit, e["ap"].get<double>(),
                1e-10 * std::max(1.0, std::abs(e["ap"].get<double>())));
    EXPECT_TRUE(row.diagnostics.empty());
  }
  EXPECT_EQ(panel.meta.config_hash, load_run_config(w.config()).hash());
  EXPECT_TRUE(fs::exists(w.root() / "out/panel.csv"));
  EXPECT_TRUE(fs::exists(w.root() / "out/ledgers/FIX10/MacdRSI/trades_STK05.csv"));
  EXPECT_TRUE(fs::exists(w.root() / "out/ledgers/FIX10/VPVMA/equity_STK10.csv"));
  EXPECT_NE(w.out.str().find("Panel: FIX10"), std::string::npos);

  // ledger files round-trip and carry the hash
  const auto trades = read_file((w.root() / "out/ledgers/FIX10/MacdHist/trades_STK01.csv").string());
  EXPECT_EQ(trades.rfind(config_preamble(panel.meta.config_hash), 0), 0u);
  EXPECT_FALSE(parse_trades_csv(trades).empty());
}

TEST(Backtest, ByteIdenticalReruns) {
  Workspace w;
  const auto cfg = w.config();
  ASSERT_EQ(cmd_backtest(w.opts(cfg, "a"), w.ctx), kExitOk);
  ASSERT_EQ(cmd_backtest(w.opts(cfg, "b"), w.ctx), kExitOk);
  ASSERT_EQ(cmd_backtest(w.opts(w.config({{"threads", 4}}), "c"), w.ctx), kExitOk);
  const auto a = testsupport::snapshot(w.root() / "a");
  EXPECT_GT(a.size(), 100u);
  EXPECT_EQ(a, testsupport::snapshot(w.root() / "b"));
  EXPECT_EQ(a, testsupport::snapshot(w.root() / "c"));
}

TEST(Backtest, UniverseErrors) {
  Workspace w;
  const auto empty = w.universe("EMPTY", json::array());
  EXPECT_EQ(cmd_backtest(w.opts(w.config({{"universe", empty.string()}})), w.ctx), kExitUsage);
  EXPECT_EQ(cmd_backtest(w.opts(w.config({{"universe", (w.root() / "missing.json").string()}})), w.ctx), kExitUsage);
  const auto ghosts = w.universe("GHOSTS", {"AAA", "BBB"});
  EXPECT_EQ(cmd_backtest(w.opts(w.config({{"universe", ghosts.string()}})), w.ctx), kExitData);
  EXPECT_EQ(cmd_backtest(w.opts(w.config({{"strategies", json::array()}})), w.ctx), kExitUsage);
}

TEST(Backtest, MissingSymbolIsReportedButNotFatal) {
  Workspace w;
  const auto u = w.universe("PART", {"STK01", "ZZZ", "STK02"});
  ASSERT_EQ(cmd_backtest(w.opts(w.config({{"universe", u.string()}, {"strategies", {"MacdHist"}}})), w.ctx), kExitOk);
  const auto panel = panel_from_json(json::parse(read_file((w.root() / "out/panel.json").string())));
  ASSERT_EQ(panel.rows.size(), 1u);
  EXPECT_EQ(panel.rows[0].report.symbols, 2u);
  ASSERT_EQ(panel.rows[0].diagnostics.size(), 1u);
  EXPECT_EQ(panel.rows[0].diagnostics[0].symbol, "ZZZ");
  EXPECT_NE(w.err.str().find("ZZZ"), std::string::npos);
}

TEST(Backtest, BadConfigIsUsageError) {
  Workspace w;
  EXPECT_EQ(cmd_backtest(w.opts(w.config({{"bogus", true}})), w.ctx), kExitUsage);
  CommandOptions none;
  EXPECT_EQ(cmd_backtest(none, w.ctx), kExitUsage);
  testsupport::write_file(w.root() / "broken.json", "{");
  EXPECT_EQ(cmd_backtest(w.opts(w.root() / "broken.json"), w.ctx), kExitUsage);
}

// ---------------------------------------------------------------------------
// optimize

TEST(Optimize, TinyRangeMatchesExhaustive) {
  Workspace w;
  ASSERT_EQ(cmd_optimize(w.opts(w.config(tiny_optimize())), w.ctx), kExitOk) << w.err.str();
  const auto best = json::parse(read_file((w.root() / "out/optimize/best.json").string()));
  ASSERT_EQ(best["results"].size(), 1u);
  const auto& r = best["results"][0];
  EXPECT_EQ(r["exhaustive"]["evaluated"], 27);
  EXPECT_EQ(r["fitness"], r["exhaustive"]["fitness"]);
  EXPECT_EQ(r["best"], r["exhaustive"]["best"]);
  const auto trace = read_file((w.root() / "out/optimize/ga_trace_STK01.csv").string());
  EXPECT_NE(trace.find("generation,best_fitness,mean_fitness,best_fast,best_slow,best_signal\n"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')), 2u + r["generations"].get<std::size_t>());
}

TEST(Optimize, DeterministicForFixedSeed) {
  Workspace w;
  auto patch = tiny_optimize(false);
  patch["ga"] = json::object();
  patch["ga"]["max_iterations"] = 15;
  patch["optimize"]["targets"] = {{{"symbols", {"STK01"}}}, {{"name", "pair"}, {"symbols", {"STK02", "STK03"}}}};
  const auto cfg = w.config(patch);
  ASSERT_EQ(cmd_optimize(w.opts(cfg, "a"), w.ctx), kExitOk) << w.err.str();
  ASSERT_EQ(cmd_optimize(w.opts(cfg, "b"), w.ctx), kExitOk);
  const auto a = testsupport::snapshot(w.root() / "a");
  EXPECT_EQ(a.size(), 4u);  // best.csv, best.json, two traces
  EXPECT_EQ(a, testsupport::snapshot(w.root() / "b"));

  auto o = w.opts(cfg, "c");
  o.seed = 12345;
  ASSERT_EQ(cmd_optimize(o, w.ctx), kExitOk);
  EXPECT_NE(a, testsupport::snapshot(w.root() / "c"));
}

TEST(Optimize, MissingDataIsDataError) {
  Workspace w;
  auto patch = tiny_optimize();
  patch["optimize"]["targets"] = {{{"symbols", {"STK01", "NOPE"}}}};
  EXPECT_EQ(cmd_optimize(w.opts(w.config(patch)), w.ctx), kExitData);
  EXPECT_FALSE(fs::exists(w.root() / "out"));
  EXPECT_EQ(cmd_optimize(w.opts(w.config()), w.ctx), kExitUsage);  // no optimize section
}

TEST(Optimize, ComparisonAgainstTraditionalParameters) {
  Workspace w;
  auto patch = tiny_optimize(false);
  patch["optimize"]["targets"] = {{{"symbols", {"STK01"}}, {"compare_universe", kData + "/fixture10_universe.json"}}};
  ASSERT_EQ(cmd_optimize(w.opts(w.config(patch)), w.ctx), kExitOk) << w.err.str();
  const auto cmp = json::parse(read_file((w.root() / "out/optimize/comparison.json").string()));
  ASSERT_EQ(cmp["rows"].size(), 2u);
  EXPECT_EQ(cmp["rows"][0]["parameters"], "traditional");
  EXPECT_EQ(cmp["rows"][0]["macd"], json({12, 26, 9}));
  const auto expected = json::parse(read_file(kData + "/oracle_expected.json"));
  EXPECT_EQ(cmp["rows"][0]["metrics"]["nt"], expected["rows"]["MACD_crossoversigabout0"]["nt"]);
  const auto best = json::parse(read_file((w.root() / "out/optimize/best.json").string()));
  EXPECT_EQ(cmp["rows"][1]["macd"], best["results"][0]["best"]);
}

// ---------------------------------------------------------------------------
// plotdata and report

TEST(PlotData, FilesPerStrategyAndByteIdentical) {
  Workspace w;
  const auto cfg = w.config();
  ASSERT_EQ(cmd_plotdata(w.opts(cfg, "a"), w.ctx), kExitOk) << w.err.str();
  ASSERT_EQ(cmd_plotdata(w.opts(cfg, "b"), w.ctx), kExitOk);
  const auto a = testsupport::snapshot(w.root() / "a");
  EXPECT_EQ(a.size(), 18u);
  EXPECT_EQ(a, testsupport::snapshot(w.root() / "b"));
  const auto& hist = a.at("plot/FIX10/MacdRSI_hist.csv");
  EXPECT_NE(hist.find("bin_lower,bin_upper,count\n"), std::string::npos);
  const auto& scatter = a.at("plot/FIX10/MacdRSI_scatter.csv");
  EXPECT_NE(scatter.find("trade_index,return,symbol\n1,"), std::string::npos);
}

TEST(Report, RegeneratesByteIdentical) {
  Workspace w;
  const auto cfg = w.config();
  ASSERT_EQ(cmd_backtest(w.opts(cfg), w.ctx), kExitOk);
  ASSERT_EQ(cmd_report(w.opts(cfg), w.ctx), kExitOk) << w.err.str();
  const auto first = testsupport::snapshot(w.root() / "out");
  ASSERT_TRUE(first.contains("report.txt"));
  ASSERT_TRUE(first.contains("ap_ranking.csv"));
  ASSERT_EQ(cmd_report(w.opts(cfg), w.ctx), kExitOk);
  EXPECT_EQ(first, testsupport::snapshot(w.root() / "out"));

  // AP ranking rows are sorted by AP
  const auto ranking = first.at("ap_ranking.csv");
  std::istringstream in(ranking);
  std::string line;
  std::vector<double> aps;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("universe,", 0) != 0) aps.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  ASSERT_EQ(aps.size(), 9u);
  EXPECT_TRUE(std::is_sorted(aps.rbegin(), aps.rend()));
}

TEST(Report, MergesPanelsAndRefusesMixedHashes) {
  Workspace w;
  ASSERT_EQ(cmd_backtest(w.opts(w.config(), "a"), w.ctx), kExitOk);
  const auto u = w.universe("SMALL", {"STK01", "STK02"});
  ASSERT_EQ(cmd_backtest(w.opts(w.config({{"universe", u.string()}}), "b"), w.ctx), kExitOk);
  ASSERT_EQ(cmd_backtest(w.opts(w.config(), "c"), w.ctx), kExitOk);

  CommandOptions same;
  same.panels = {w.root() / "a/panel.json", w.root() / "c/panel.json"};
  same.out = w.root() / "merged";
  EXPECT_EQ(cmd_report(same, w.ctx), kExitOk);
  EXPECT_TRUE(fs::exists(w.root() / "merged/report.txt"));

  CommandOptions mixed;
  mixed.panels = {w.root() / "a/panel.json", w.root() / "b/panel.json"};
  EXPECT_EQ(cmd_report(mixed, w.ctx), kExitData);
  EXPECT_NE(w.err.str().find("hash"), std::string::npos);

  CommandOptions nothing;
  EXPECT_EQ(cmd_report(nothing, w.ctx), kExitUsage);
}

// ---------------------------------------------------------------------------
// --dry-run

TEST(DryRun, WritesNothing) {
  Workspace w;
  auto o = w.opts(w.config(tiny_optimize()));
  o.dry_run = true;
  EXPECT_EQ(cmd_ingest(o, w.ctx), kExitOk);
  EXPECT_EQ(cmd_backtest(o, w.ctx), kExitOk);
  EXPECT_EQ(cmd_plotdata(o, w.ctx), kExitOk);
  EXPECT_EQ(cmd_optimize(o, w.ctx), kExitOk);
  EXPECT_FALSE(fs::exists(w.root() / "out"));

  // report reads existing panels but does not write
  auto real = w.opts(w.config(), "r");
  ASSERT_EQ(cmd_backtest(real, w.ctx), kExitOk);
  const auto before = testsupport::snapshot(w.root() / "r");
  real.dry_run = true;
  EXPECT_EQ(cmd_report(real, w.ctx), kExitOk);
  EXPECT_EQ(before, testsupport::snapshot(w.root() / "r"));

  // dry runs still validate
  auto bad = w.opts(w.config({{"universe", (w.root() / "missing.json").string()}}));
  bad.dry_run = true;
  EXPECT_EQ(cmd_backtest(bad, w.ctx), kExitUsage);
}

// ---------------------------------------------------------------------------
// Binary

namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(MACDLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  Workspace w;
  const auto cfg = w.config();
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("backtest"), 1);
  EXPECT_EQ(run_cli("backtest --config " + (w.root() / "none.json").string()), 1);
  EXPECT_EQ(run_cli("backtest --config " + cfg.string() + " --seed notanumber"), 1);
  EXPECT_EQ(run_cli("backtest --config " + cfg.string() + " --dry-run"), 0);
  EXPECT_FALSE(fs::exists(w.root() / "out"));
  EXPECT_EQ(run_cli("backtest --config " + cfg.string() + " --out " + (w.root() / "cli").string() + " --seed 3"), 0);
  EXPECT_TRUE(fs::exists(w.root() / "cli/panel.json"));
  EXPECT_EQ(run_cli("report --panel " + (w.root() / "cli/panel.json").string()), 0);
  EXPECT_TRUE(fs::exists(w.root() / "cli/report.txt"));

  testsupport::write_file(w.root() / "bad/X.csv", "garbage\n");
  EXPECT_EQ(run_cli("ingest --config " + w.config({{"data", {{"dir", (w.root() / "bad").string()}}}}).string()), 2);
}
