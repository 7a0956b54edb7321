#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <string>

#include "autoform/error.hpp"

namespace autoform {

struct HttpRequest {
  std::string method = "POST";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
  std::chrono::milliseconds timeout{60'000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Every network byte the harness sends goes through one of these, so tests
/// can count or forbid traffic. Connection-level failures throw TransientError.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// Counts calls; forwards to `inner` when given, otherwise refuses.
class CountingTransport final : public HttpTransport {
 public:
  explicit CountingTransport(std::shared_ptr<HttpTransport> inner = nullptr)
      : inner_(std::move(inner)) {}

  HttpResponse send(const HttpRequest& request) override {
    ++calls_;
    if (!inner_) throw TransientError("network disabled: " + request.method + " " + request.url);
    return inner_->send(request);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<HttpTransport> inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace autoform
