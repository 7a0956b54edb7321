#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include "autoform/error.hpp"
#include "autoform/hash.hpp"

namespace autoform {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Content-addressed request → response files:
///   <dir>/<sha256(kind + "\n" + request)>.json = {"kind", "request", "response"}
class FixtureStore {
 public:
  explicit FixtureStore(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  static std::string key(std::string_view kind, const json& request) {
    std::string material(kind);
    material.push_back('\n');
    material += request.dump();
    return sha256_hex(material);
  }

  std::optional<json> lookup(const std::string& key) const {
    std::ifstream in(dir_ / (key + ".json"));
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return json::parse(ss.str()).at("response");
    } catch (const json::exception& e) {
      throw ConfigError("corrupt fixture " + key + ": " + e.what());
    }
  }

  /// Returns the stored response or throws FixtureMiss naming the key.
  json require(std::string_view kind, const json& request) const {
    const std::string k = key(kind, request);
    auto hit = lookup(k);
    if (!hit) throw FixtureMiss(k, std::string(kind) + " fixture");
    return *hit;
  }

  std::string put(std::string_view kind, const json& request, const json& response) {
    const std::string k = key(kind, request);
    std::lock_guard lock(mu_);
    fs::create_directories(dir_);
    const fs::path tmp = dir_ / (k + ".tmp");
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw StorageError("cannot write fixture " + tmp.string());
      out << json{{"kind", kind}, {"request", request}, {"response", response}}.dump(2);
    }
    fs::rename(tmp, dir_ / (k + ".json"));
    return k;
  }

 private:
  fs::path dir_;
  std::mutex mu_;
};

}  // namespace autoform
