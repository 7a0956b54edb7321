#pragma once

#include <nlohmann/json.hpp>

#include <cctype>
#include <memory>
#include <string>

#include "autoform/error.hpp"
#include "autoform/fixtures.hpp"
#include "autoform/http.hpp"
#include "autoform/tool_types.hpp"

namespace autoform {

/// Expert drafter endpoint. Drafts are advisory text for the orchestrator.
class Drafter {
 public:
  virtual ~Drafter() = default;
  virtual ToolOutcome translate(const std::string& statement) = 0;
};

/// Web search provider. Payload: {"results": [{"title","snippet","url"}...]}.
class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual ToolOutcome search(const std::string& query) = 0;
};

inline constexpr std::string_view kDrafterFixtureKind = "lean4_translator";
inline constexpr std::string_view kSearchFixtureKind = "search_online";

class ReplayDrafter final : public Drafter {
 public:
  explicit ReplayDrafter(std::shared_ptr<FixtureStore> fixtures) : fixtures_(std::move(fixtures)) {}
  ToolOutcome translate(const std::string& statement) override {
    return fixtures_->require(kDrafterFixtureKind, json{{"statement", statement}}).get<ToolOutcome>();
  }

 private:
  std::shared_ptr<FixtureStore> fixtures_;
};

class ReplaySearch final : public SearchProvider {
 public:
  explicit ReplaySearch(std::shared_ptr<FixtureStore> fixtures) : fixtures_(std::move(fixtures)) {}
  ToolOutcome search(const std::string& query) override {
    return fixtures_->require(kSearchFixtureKind, json{{"query", query}}).get<ToolOutcome>();
  }

 private:
  std::shared_ptr<FixtureStore> fixtures_;
};

/// POSTs {"statement": ...} and expects {"draft": ...} back.
class HttpDrafter final : public Drafter {
 public:
  HttpDrafter(std::shared_ptr<HttpTransport> transport, std::string url)
      : transport_(std::move(transport)), url_(std::move(url)) {}

  ToolOutcome translate(const std::string& statement) override {
    HttpRequest req;
    req.url = url_;
    req.headers["Content-Type"] = "application/json";
    req.body = json{{"statement", statement}}.dump();
    HttpResponse res;
    try {
      res = transport_->send(req);
    } catch (const TransientError& e) {
      return ToolOutcome::failure(std::string("drafter unreachable: ") + e.what());
    }
    if (res.status != 200) {
      return ToolOutcome::failure("drafter returned HTTP " + std::to_string(res.status));
    }
    try {
      json j = json::parse(res.body);
      return ToolOutcome::success(j.at("draft").get<std::string>());
    } catch (const json::exception& e) {
      return ToolOutcome::failure(std::string("drafter sent an undecodable body: ") + e.what());
    }
  }

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string url_;
};

/// GETs `<url>?q=<query>` and expects {"results": [...]} back.
class HttpSearch final : public SearchProvider {
 public:
  HttpSearch(std::shared_ptr<HttpTransport> transport, std::string url, std::string api_key = {})
      : transport_(std::move(transport)), url_(std::move(url)), api_key_(std::move(api_key)) {}

  ToolOutcome search(const std::string& query) override {
    HttpRequest req;
    req.method = "GET";
    req.url = url_ + (url_.find('?') == std::string::npos ? "?q=" : "&q=") + url_encode(query);
    if (!api_key_.empty()) req.headers["Authorization"] = "Bearer " + api_key_;
    HttpResponse res;
    try {
      res = transport_->send(req);
    } catch (const TransientError& e) {
      return ToolOutcome::failure(std::string("search provider unreachable: ") + e.what());
    }
    if (res.status != 200) {
      return ToolOutcome::failure("search provider returned HTTP " + std::to_string(res.status));
    }
    try {
      json j = json::parse(res.body);
      json results = json::array();
      for (const auto& r : j.at("results")) {
        results.push_back(json{{"title", r.value("title", "")},
                               {"snippet", r.value("snippet", "")},
                               {"url", r.value("url", "")}});
      }
      return ToolOutcome::success(json{{"results", results}}.dump());
    } catch (const json::exception& e) {
      return ToolOutcome::failure(std::string("search provider sent an undecodable body: ") +
                                  e.what());
    }
  }

  static std::string url_encode(const std::string& s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
      if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
        out.push_back(static_cast<char>(c));
      } else {
        out.push_back('%');
        out.push_back(kHex[c >> 4]);
        out.push_back(kHex[c & 0xF]);
      }
    }
    return out;
  }

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string url_;
  std::string api_key_;
};

/// Write-through wrappers used by `--record` to build replay fixtures.
class RecordingDrafter final : public Drafter {
 public:
  RecordingDrafter(std::shared_ptr<Drafter> inner, std::shared_ptr<FixtureStore> fixtures)
      : inner_(std::move(inner)), fixtures_(std::move(fixtures)) {}
  ToolOutcome translate(const std::string& statement) override {
    ToolOutcome o = inner_->translate(statement);
    fixtures_->put(kDrafterFixtureKind, json{{"statement", statement}}, json(o));
    return o;
  }

 private:
  std::shared_ptr<Drafter> inner_;
  std::shared_ptr<FixtureStore> fixtures_;
};

class RecordingSearch final : public SearchProvider {
 public:
  RecordingSearch(std::shared_ptr<SearchProvider> inner, std::shared_ptr<FixtureStore> fixtures)
      : inner_(std::move(inner)), fixtures_(std::move(fixtures)) {}
  ToolOutcome search(const std::string& query) override {
    ToolOutcome o = inner_->search(query);
    fixtures_->put(kSearchFixtureKind, json{{"query", query}}, json(o));
    return o;
  }

 private:
  std::shared_ptr<SearchProvider> inner_;
  std::shared_ptr<FixtureStore> fixtures_;
};

}  // namespace autoform
