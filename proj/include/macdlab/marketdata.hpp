#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "macdlab/date.hpp"
#include "macdlab/detail/text.hpp"
#include "macdlab/error.hpp"

namespace macdlab {

/// One trading day. `adj_close` is carried through ingestion and emission but
/// never enters a computation: fills happen at traded prices only.
struct Bar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;
  double volume = 0.0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

struct BarSeries {
  std::string symbol;
  std::vector<Bar> bars;

  std::size_t size() const { return bars.size(); }
  bool empty() const { return bars.empty(); }
  friend bool operator==(const BarSeries&, const BarSeries&) = default;
};

struct Violation {
  Date date;
  std::string rule;  // e.g. "high<low", "close>high"

  friend bool operator==(const Violation&, const Violation&) = default;
};

class ValidatedBarSeries;

/// Outcome of `validate`. The series is always retained for inspection.
struct ValidationResult {
  BarSeries series;
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  /// Throws InvalidArgument when violations exist.
  ValidatedBarSeries take() &&;
};

/// A BarSeries whose every bar satisfies the OHLCV invariants and whose dates
/// are strictly increasing. Only `validate` and `window` construct one.
class ValidatedBarSeries {
 public:
  ValidatedBarSeries() = default;

  const std::string& symbol() const { return series_.symbol; }
  const std::vector<Bar>& bars() const { return series_.bars; }
  const BarSeries& series() const { return series_; }
  std::size_t size() const { return series_.bars.size(); }
  bool empty() const { return series_.bars.empty(); }
  const Bar& operator[](std::size_t i) const { return series_.bars[i]; }

  std::vector<double> closes() const { return column(&Bar::close); }
  std::vector<double> opens() const { return column(&Bar::open); }
  std::vector<double> highs() const { return column(&Bar::high); }
  std::vector<double> lows() const { return column(&Bar::low); }
  std::vector<double> volumes() const { return column(&Bar::volume); }

  friend bool operator==(const ValidatedBarSeries&, const ValidatedBarSeries&) = default;

 private:
  friend struct ValidationResult;
  friend ValidatedBarSeries window(const ValidatedBarSeries&, Date, Date);
  explicit ValidatedBarSeries(BarSeries s) : series_(std::move(s)) {}

  std::vector<double> column(double Bar::*field) const {
    std::vector<double> out;
    out.reserve(series_.bars.size());
    for (const auto& b : series_.bars) out.push_back(b.*field);
    return out;
  }

  BarSeries series_;
};

inline ValidatedBarSeries ValidationResult::take() && {
  if (!valid())
    throw Error(Errc::InvalidArgument, series.symbol + ": " + std::to_string(violations.size()) +
                                           " bar violation(s), first at " + violations.front().date.str() +
                                           " (" + violations.front().rule + ")");
  return ValidatedBarSeries{std::move(series)};
}

/// Parses a daily OHLCV CSV payload. Columns are located by header name, so
/// column order is free; `Adj Close` is optional. Rows are returned sorted by
/// date. Lines beginning with '#' and blank lines are skipped.
inline BarSeries parse_csv(std::string_view text, std::string symbol) {
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  {
    std::size_t start = 0, lineno = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
      ++lineno;
      auto t = detail::trim(line);
      if (!t.empty() && t.front() != '#') lines.emplace_back(lineno, t);
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  }
  if (lines.empty()) throw Error(Errc::MalformedHeader, symbol + ": missing header row");

  const auto header = detail::split(lines.front().second, ',');
  auto find_col = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return static_cast<int>(i);
    return -1;
  };
  const int c_date = find_col("Date"), c_open = find_col("Open"), c_high = find_col("High"),
            c_low = find_col("Low"), c_close = find_col("Close"), c_adj = find_col("Adj Close"),
            c_vol = find_col("Volume");
  for (auto [name, idx] : {std::pair{"Date", c_date}, {"Open", c_open}, {"High", c_high}, {"Low", c_low},
                           {"Close", c_close}, {"Volume", c_vol}})
    if (idx < 0) throw Error(Errc::MalformedHeader, symbol + ": header lacks column '" + name + "'");

  BarSeries out{std::move(symbol), {}};
  out.bars.reserve(lines.size() - 1);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto [lineno, line] = lines[k];
    const auto fields = detail::split(line, ',');
    if (fields.size() != header.size())
      throw Error(Errc::MalformedRow,
                  out.symbol + ": line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()),
                  lineno);
    auto bad = [&](const char* what) {
      return Error(Errc::MalformedRow, out.symbol + ": line " + std::to_string(lineno) + ": bad " + what, lineno);
    };
    auto num = [&](int idx, const char* what) {
      auto v = detail::parse_double(fields[static_cast<std::size_t>(idx)]);
      if (!v) throw bad(what);
      return *v;
    };
    Bar b;
    auto d = Date::parse(detail::trim(fields[static_cast<std::size_t>(c_date)]));
    if (!d) throw bad("Date");
    b.date = *d;
    b.open = num(c_open, "Open");
    b.high = num(c_high, "High");
    b.low = num(c_low, "Low");
    b.close = num(c_close, "Close");
    b.adj_close = c_adj >= 0 ? num(c_adj, "Adj Close") : b.close;
    b.volume = num(c_vol, "Volume");
    out.bars.push_back(b);
  }
  if (out.bars.empty()) throw Error(Errc::EmptySeries, out.symbol + ": no data rows");

  std::stable_sort(out.bars.begin(), out.bars.end(), [](const Bar& a, const Bar& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < out.bars.size(); ++i)
    if (out.bars[i].date == out.bars[i - 1].date)
      throw Error(Errc::DuplicateDate, out.symbol + ": duplicate date " + out.bars[i].date.str());
  return out;
}

/// Emits `Date,Open,High,Low,Close,Adj Close,Volume` with shortest
/// round-trip number formatting, so parse_csv(serialize_csv(s)) == s.
inline std::string serialize_csv(const BarSeries& series) {
  std::string out = "Date,Open,High,Low,Close,Adj Close,Volume\n";
  out.reserve(out.size() + series.bars.size() * 72);
  for (const auto& b : series.bars) {
    out += b.date.str();
    for (double v : {b.open, b.high, b.low, b.close, b.adj_close, b.volume}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

/// Checks every bar invariant and date ordering. Violations are data.
inline ValidationResult validate(BarSeries series) {
  ValidationResult res;
  for (std::size_t i = 0; i < series.bars.size(); ++i) {
    const Bar& b = series.bars[i];
    auto flag = [&](const char* rule) { res.violations.push_back({b.date, rule}); };
    bool finite = true;
    for (double v : {b.open, b.high, b.low, b.close, b.volume})
      finite = finite && std::isfinite(v);
    if (!finite) {
      flag("non-finite");
      continue;
    }
    if (b.open <= 0 || b.high <= 0 || b.low <= 0 || b.close <= 0) flag("price<=0");
    if (b.volume < 0) flag("volume<0");
    if (b.high < b.low) flag("high<low");
    if (b.open > b.high) flag("open>high");
    if (b.close > b.high) flag("close>high");
    if (b.open < b.low) flag("open<low");
    if (b.close < b.low) flag("close<low");
    if (i > 0 && !(series.bars[i - 1].date < b.date)) flag("date-order");
  }
  res.series = std::move(series);
  return res;
}

/// Bars with start <= date <= end, order preserved. Empty result is legal.
inline ValidatedBarSeries window(const ValidatedBarSeries& series, Date start, Date end) {
  if (end < start) throw Error(Errc::InvertedRange, start.str() + " > " + end.str());
  const auto& bars = series.bars();
  auto lo = std::lower_bound(bars.begin(), bars.end(), start, [](const Bar& b, Date d) { return b.date < d; });
  auto hi = std::upper_bound(lo, bars.end(), end, [](Date d, const Bar& b) { return d < b.date; });
  return ValidatedBarSeries{BarSeries{series.symbol(), std::vector<Bar>(lo, hi)}};
}

struct Period {
  Date start;
  Date end;
  friend bool operator==(const Period&, const Period&) = default;
};

struct Universe {
  std::string name;
  std::vector<std::string> symbols;
  Period period;
};

/// Universe document: {"name": ..., "symbols": [...], "period": {"start": ..., "end": ...}}.
inline Universe parse_universe(const nlohmann::json& doc) {
  auto fail = [](const std::string& why) { return Error(Errc::InvalidUniverse, why); };
  if (!doc.is_object()) throw fail("document is not an object");
  Universe u;
  try {
    u.name = doc.at("name").get<std::string>();
    u.symbols = doc.at("symbols").get<std::vector<std::string>>();
    const auto& p = doc.at("period");
    auto s = Date::parse(p.at("start").get<std::string>());
    auto e = Date::parse(p.at("end").get<std::string>());
    if (!s || !e) throw fail("period dates must be YYYY-MM-DD");
    u.period = {*s, *e};
  } catch (const nlohmann::json::exception& ex) {
    throw fail(ex.what());
  }
  if (u.symbols.empty()) throw fail(u.name + ": symbol list is empty");
  std::set<std::string> seen;
  for (const auto& s : u.symbols)
    if (s.empty() || !seen.insert(s).second) throw fail(u.name + ": duplicate or empty symbol '" + s + "'");
  if (!(u.period.start < u.period.end)) throw fail(u.name + ": period start must precede end");
  return u;
}

inline nlohmann::json to_json(const Universe& u) {
  return {{"name", u.name},
          {"symbols", u.symbols},
          {"period", {{"start", u.period.start.str()}, {"end", u.period.end.str()}}}};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Universe load_universe(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(Errc::InvalidUniverse, path + ": " + ex.what());
  }
  return parse_universe(doc);
}

}  // namespace macdlab
