#pragma once

// Default HttpTransport over cpp-httplib. Kept apart from fetch.hpp so that
// library users who inject their own transport do not compile httplib.

#include <string>

#include <httplib.h>

#include "macdlab/error.hpp"
#include "macdlab/fetch.hpp"

namespace macdlab {

inline HttpTransport make_http_transport(int timeout_seconds = 30) {
  return [timeout_seconds](const std::string& url) {
    // scheme://host[:port]/path?query
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::NetworkFailure, "not an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_follow_location(true);
    client.set_connection_timeout(timeout_seconds);
    client.set_read_timeout(timeout_seconds);
    client.set_default_headers({{"User-Agent", "macdlab/1.0"}});
    auto res = client.Get(path);
    if (!res) throw Error(Errc::NetworkFailure, url + ": " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  };
}

}  // namespace macdlab
