#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>

#include "macdlab/date.hpp"
#include "macdlab/error.hpp"
#include "macdlab/marketdata.hpp"

namespace macdlab {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Performs a GET on a fully expanded URL. Throws Error(NetworkFailure) when
/// no response could be obtained.
using HttpTransport = std::function<HttpResponse(const std::string& url)>;

/// Expands {symbol}, {start}, {end} (YYYY-MM-DD) and {period1}, {period2}
/// (epoch seconds; period2 is the day after `end` so the range is inclusive).
inline std::string expand_url(std::string tmpl, const std::string& symbol, const Period& period) {
  auto replace_all = [&](const std::string& key, const std::string& value) {
    for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size()))
      tmpl.replace(pos, key.size(), value);
  };
  replace_all("{symbol}", symbol);
  replace_all("{start}", period.start.str());
  replace_all("{end}", period.end.str());
  replace_all("{period1}", std::to_string(period.start.epoch_seconds()));
  replace_all("{period2}", std::to_string(period.end.next_day().epoch_seconds()));
  return tmpl;
}

/// Quote-service client with a read-through cache at
/// `<cache_dir>/<symbol>/<start>_<end>.csv`. A payload is cached only after it
/// parses as a bar series, and the file appears atomically (temp + rename).
class RemoteFetcher {
 public:
  RemoteFetcher(std::string url_template, std::filesystem::path cache_dir, HttpTransport transport)
      : url_template_(std::move(url_template)), cache_dir_(std::move(cache_dir)), transport_(std::move(transport)) {}

  std::filesystem::path cache_path(const std::string& symbol, const Period& period) const {
    return cache_dir_ / symbol / (period.start.str() + "_" + period.end.str() + ".csv");
  }

  bool cached(const std::string& symbol, const Period& period) const {
    return std::filesystem::is_regular_file(cache_path(symbol, period));
  }

  /// Returns the provider's CSV verbatim, from cache when present.
  std::string fetch(const std::string& symbol, const Period& period) const {
    if (period.end < period.start) throw Error(Errc::InvertedRange, period.start.str() + " > " + period.end.str());
    const auto path = cache_path(symbol, period);
    if (std::filesystem::is_regular_file(path)) return read_file(path.string());

    const auto url = expand_url(url_template_, symbol, period);
    HttpResponse resp;
    try {
      resp = transport_(url);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      throw Error(Errc::NetworkFailure, url + ": " + ex.what());
    }
    if (resp.status != 200)
      throw Error(Errc::ProviderRejection, symbol + ": HTTP " + std::to_string(resp.status) + ": " + resp.body);
    try {
      (void)parse_csv(resp.body, symbol);
    } catch (const Error& ex) {
      throw Error(Errc::ProviderRejection, symbol + ": unparseable payload (" + ex.what() + ")");
    }
    store(path, resp.body);
    return resp.body;
  }

 private:
  static void store(const std::filesystem::path& path, const std::string& body) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::Io, "cannot create " + path.parent_path().string());
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << body;
      if (!out.flush()) {
        std::filesystem::remove(tmp, ec);
        throw Error(Errc::Io, "cannot write " + tmp.string());
      }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw Error(Errc::Io, "cannot publish " + path.string());
    }
  }

  std::string url_template_;
  std::filesystem::path cache_dir_;
  HttpTransport transport_;
};

}  // namespace macdlab
