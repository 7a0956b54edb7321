#pragma once

// Pulls in cpp-httplib; include only where live network access is wanted.
#include <httplib.h>

#include <string>

#include "autoform/http.hpp"

namespace autoform {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse send(const HttpRequest& request) override {
    const auto scheme_end = request.url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("bad URL '" + request.url + "'");
    const auto path_start = request.url.find('/', scheme_end + 3);
    const std::string origin = request.url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : request.url.substr(path_start);

    httplib::Client client(origin);
    const auto secs = request.timeout.count() / 1000;
    client.set_connection_timeout(secs > 0 ? secs : 1);
    client.set_read_timeout(secs > 0 ? secs : 1);
    httplib::Headers headers(request.headers.begin(), request.headers.end());

    httplib::Result res = request.method == "GET"
                              ? client.Get(path, headers)
                              : client.Post(path, headers, request.body, "application/json");
    if (!res) {
      throw TransientError("connection to " + origin + " failed: " + httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  }
};

}  // namespace autoform
