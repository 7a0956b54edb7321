#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "autoform/error.hpp"
#include "autoform/fixtures.hpp"
#include "autoform/hash.hpp"
#include "autoform/http.hpp"
#include "autoform/message.hpp"
#include "autoform/tool_types.hpp"

namespace autoform {

using json = nlohmann::json;

struct ChatTurnRequest {
  std::vector<Message> history;
  std::vector<ToolSpec> tool_specs;
  std::string model_id;
  json decoding = json::object();  // passed through to the provider untouched
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  friend bool operator==(const Usage&, const Usage&) = default;
};

struct ChatTurnResponse {
  Message message;
  Usage usage;
  json provider_meta = json::object();
};

inline void to_json(json& j, const ChatTurnResponse& r) {
  j = json{{"message", r.message},
           {"usage", json{{"prompt_tokens", r.usage.prompt_tokens},
                          {"completion_tokens", r.usage.completion_tokens}}},
           {"provider_meta", r.provider_meta}};
}

inline void from_json(const json& j, ChatTurnResponse& r) {
  r.message = j.at("message").get<Message>();
  const json u = j.value("usage", json::object());
  r.usage.prompt_tokens = u.value("prompt_tokens", std::int64_t{0});
  r.usage.completion_tokens = u.value("completion_tokens", std::int64_t{0});
  r.provider_meta = j.value("provider_meta", json::object());
}

/// Stable replay key: SHA-256 over model id, serialized history and tool specs.
inline json fixture_request(const ChatTurnRequest& req) {
  return json{{"model_id", req.model_id}, {"history", req.history}, {"tool_specs", req.tool_specs}};
}

inline std::string history_hash(const ChatTurnRequest& req) {
  return FixtureStore::key("chat", fixture_request(req));
}

class ModelHandle {
 public:
  virtual ~ModelHandle() = default;
  virtual ChatTurnResponse complete(const ChatTurnRequest& request) = 0;
};

inline void validate_response(const ChatTurnResponse& r, const std::string& raw) {
  try {
    validate_assistant_message(r.message);
  } catch (const ValidationError& e) {
    throw DecodeError(std::string("malformed assistant message: ") + e.what(), raw);
  }
}

/// Pops canned responses in order. Exhaustion is a test misconfiguration.
class ScriptedModel final : public ModelHandle {
 public:
  explicit ScriptedModel(std::vector<ChatTurnResponse> script) : script_(script.begin(), script.end()) {
    if (script_.empty()) throw ValidationError("scripted model needs a non-empty script");
  }

  static std::unique_ptr<ScriptedModel> of_messages(const std::vector<Message>& msgs) {
    std::vector<ChatTurnResponse> script;
    for (const auto& m : msgs) script.push_back(ChatTurnResponse{m, Usage{}, json::object()});
    return std::make_unique<ScriptedModel>(std::move(script));
  }

  ChatTurnResponse complete(const ChatTurnRequest&) override {
    std::lock_guard lock(mu_);
    if (script_.empty()) throw ScriptExhausted("scripted model has no responses left");
    ChatTurnResponse r = std::move(script_.front());
    script_.pop_front();
    ++served_;
    validate_response(r, json(r).dump());
    return r;
  }

  std::size_t remaining() const {
    std::lock_guard lock(mu_);
    return script_.size();
  }
  std::size_t served() const {
    std::lock_guard lock(mu_);
    return served_;
  }

 private:
  mutable std::mutex mu_;
  std::deque<ChatTurnResponse> script_;
  std::size_t served_ = 0;
};

/// Answers purely from fixtures; a miss is a hard error naming the hash.
class ReplayModel final : public ModelHandle {
 public:
  explicit ReplayModel(std::shared_ptr<FixtureStore> fixtures) : fixtures_(std::move(fixtures)) {}

  ChatTurnResponse complete(const ChatTurnRequest& req) override {
    const std::string key = history_hash(req);
    auto hit = fixtures_->lookup(key);
    if (!hit) throw FixtureMiss(key, "chat fixture (history hash)");
    ChatTurnResponse r = hit->get<ChatTurnResponse>();
    validate_response(r, hit->dump());
    return r;
  }

 private:
  std::shared_ptr<FixtureStore> fixtures_;
};

/// Saves every response of `inner` as a fixture for later replay.
class RecordingModel final : public ModelHandle {
 public:
  RecordingModel(std::shared_ptr<ModelHandle> inner, std::shared_ptr<FixtureStore> fixtures)
      : inner_(std::move(inner)), fixtures_(std::move(fixtures)) {}

  ChatTurnResponse complete(const ChatTurnRequest& req) override {
    ChatTurnResponse r = inner_->complete(req);
    fixtures_->put("chat", fixture_request(req), json(r));
    return r;
  }

 private:
  std::shared_ptr<ModelHandle> inner_;
  std::shared_ptr<FixtureStore> fixtures_;
};

struct ProviderConfig {
  std::string base_url;       // e.g. https://api.openai.com/v1
  std::string api_key;        // resolved from the environment by the caller
  std::string provider_model; // name the provider knows the model by
  std::chrono::milliseconds timeout{180'000};
};

/// OpenAI-compatible chat-completions client with tool calling.
class OpenAiCompatModel final : public ModelHandle {
 public:
  OpenAiCompatModel(std::shared_ptr<HttpTransport> transport, ProviderConfig cfg)
      : transport_(std::move(transport)), cfg_(std::move(cfg)) {}

  static json encode_messages(const std::vector<Message>& history) {
    json out = json::array();
    for (const auto& m : history) {
      json jm{{"role", to_string(m.role)}, {"content", m.content}};
      if (m.role == Role::Tool) jm["tool_call_id"] = m.in_reply_to.value_or("");
      if (!m.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& c : m.tool_calls) {
          calls.push_back(json{{"id", c.call_id},
                               {"type", "function"},
                               {"function", json{{"name", c.name}, {"arguments", c.arguments.dump()}}}});
        }
        jm["tool_calls"] = calls;
        if (m.content.empty()) jm["content"] = nullptr;
      }
      out.push_back(std::move(jm));
    }
    return out;
  }

  static ChatTurnResponse decode(const std::string& body) {
    try {
      json j = json::parse(body);
      const json& msg = j.at("choices").at(0).at("message");
      Message m = Message::assistant(msg.contains("content") && msg["content"].is_string()
                                         ? msg["content"].get<std::string>()
                                         : std::string{});
      if (msg.contains("tool_calls") && msg["tool_calls"].is_array()) {
        for (const auto& c : msg["tool_calls"]) {
          const json& fn = c.at("function");
          json args = json::object();
          const std::string raw_args = fn.value("arguments", std::string{"{}"});
          try {
            args = json::parse(raw_args.empty() ? "{}" : raw_args);
          } catch (const json::parse_error&) {
            // Keep the raw text; the toolbelt reports it as malformed.
            args = json{{"__unparsed__", raw_args}};
          }
          m.tool_calls.push_back({c.at("id").get<std::string>(), fn.at("name").get<std::string>(), args});
        }
      }
      ChatTurnResponse r{std::move(m), {}, json::object()};
      if (j.contains("usage")) {
        r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
        r.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
      }
      r.provider_meta = json{{"id", j.value("id", "")}, {"model", j.value("model", "")}};
      validate_response(r, body);
      return r;
    } catch (const json::exception& e) {
      throw DecodeError(std::string("cannot decode provider response: ") + e.what(), body);
    }
  }

  ChatTurnResponse complete(const ChatTurnRequest& req) override {
    json body{{"model", cfg_.provider_model.empty() ? req.model_id : cfg_.provider_model},
              {"messages", encode_messages(req.history)}};
    if (!req.tool_specs.empty()) {
      json specs = json::array();
      for (const auto& s : req.tool_specs) {
        json fn = s;
        specs.push_back(json{{"type", "function"}, {"function", fn}});
      }
      body["tools"] = specs;
    }
    for (const auto& [k, v] : req.decoding.items()) body[k] = v;

    HttpRequest http;
    http.url = cfg_.base_url + "/chat/completions";
    http.headers["Content-Type"] = "application/json";
    if (!cfg_.api_key.empty()) http.headers["Authorization"] = "Bearer " + cfg_.api_key;
    http.body = body.dump();
    http.timeout = cfg_.timeout;
    HttpResponse res = transport_->send(http);
    if (res.status == 429 || res.status >= 500) {
      throw TransientError("provider returned HTTP " + std::to_string(res.status));
    }
    if (res.status != 200) {
      throw GatewayError("provider returned HTTP " + std::to_string(res.status) + ": " + res.body);
    }
    return decode(res.body);
  }

 private:
  std::shared_ptr<HttpTransport> transport_;
  ProviderConfig cfg_;
};

/// Bounds concurrent in-flight provider requests for one credential.
class RateLimiter {
 public:
  explicit RateLimiter(std::ptrdiff_t max_in_flight) : sem_(max_in_flight) {}
  void acquire() { sem_.acquire(); }
  void release() { sem_.release(); }

 private:
  std::counting_semaphore<1024> sem_;
};

struct GatewayOptions {
  int max_attempts = 4;  // provider calls per complete()
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

/// Retry, rate limiting and verbatim logging around any model handle.
class Gateway final : public ModelHandle {
 public:
  using Logger = std::function<void(const ChatTurnRequest&, const ChatTurnResponse&)>;

  Gateway(std::shared_ptr<ModelHandle> inner, GatewayOptions opts = {},
          std::shared_ptr<RateLimiter> limiter = nullptr, Logger log = nullptr)
      : inner_(std::move(inner)), opts_(std::move(opts)), limiter_(std::move(limiter)), log_(std::move(log)) {
    if (opts_.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
  }

  ChatTurnResponse complete(const ChatTurnRequest& req) override {
    auto backoff = opts_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        if (limiter_) limiter_->acquire();
        struct Release {
          RateLimiter* l;
          ~Release() {
            if (l) l->release();
          }
        } release{limiter_.get()};
        ++provider_calls_;
        ChatTurnResponse r = inner_->complete(req);
        if (log_) log_(req, r);
        return r;
      } catch (const DecodeError&) {
        throw;
      } catch (const TransientError& e) {
        if (attempt >= opts_.max_attempts) {
          throw GatewayError("gave up after " + std::to_string(attempt) + " attempts: " + e.what());
        }
      }
      opts_.sleep(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * opts_.backoff_factor));
    }
  }

  std::size_t provider_calls() const { return provider_calls_.load(); }

 private:
  std::shared_ptr<ModelHandle> inner_;
  GatewayOptions opts_;
  std::shared_ptr<RateLimiter> limiter_;
  Logger log_;
  std::atomic<std::size_t> provider_calls_{0};
};

/// Appends {"request_hash","response"} lines to a file, one per response.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path path) : path_(std::move(path)) {}

  Gateway::Logger logger() {
    return [this](const ChatTurnRequest& req, const ChatTurnResponse& r) { append(req, r); };
  }

  void append(const ChatTurnRequest& req, const ChatTurnResponse& r) {
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app);
    out << json{{"request_hash", history_hash(req)}, {"model_id", req.model_id}, {"response", r}}.dump()
        << '\n';
  }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

}  // namespace autoform
