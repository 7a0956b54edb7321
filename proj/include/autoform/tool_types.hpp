#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoform/error.hpp"

namespace autoform {

using json = nlohmann::json;

enum class Severity { Info, Warning, Error };

inline std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warning: return "warning";
    case Severity::Error: return "error";
  }
  return "?";
}

inline Severity parse_severity(std::string_view s) {
  if (s == "info" || s == "information") return Severity::Info;
  if (s == "warning") return Severity::Warning;
  if (s == "error") return Severity::Error;
  throw ValidationError("unknown severity '" + std::string(s) + "'");
}

struct SourcePos {
  int line = 0;
  int column = 0;
  friend bool operator==(const SourcePos&, const SourcePos&) = default;
};

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string message;
  std::optional<SourcePos> pos;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

inline void to_json(json& j, const Diagnostic& d) {
  j = json{{"severity", to_string(d.severity)}, {"message", d.message}};
  if (d.pos) {
    j["line"] = d.pos->line;
    j["column"] = d.pos->column;
  }
}

inline void from_json(const json& j, Diagnostic& d) {
  d.severity = parse_severity(j.at("severity").get<std::string>());
  d.message = j.at("message").get<std::string>();
  if (j.contains("line")) {
    d.pos = SourcePos{j.at("line").get<int>(), j.value("column", 0)};
  } else {
    d.pos.reset();
  }
}

/// Uniform result of any tool call. `ok == false` always carries either an
/// error diagnostic or an error description in the payload.
struct ToolOutcome {
  bool ok = false;
  std::string payload;
  std::vector<Diagnostic> diagnostics;

  static ToolOutcome success(std::string payload, std::vector<Diagnostic> diags = {}) {
    return ToolOutcome{true, std::move(payload), std::move(diags)};
  }
  static ToolOutcome failure(std::string message) {
    Diagnostic d{Severity::Error, message, std::nullopt};
    return ToolOutcome{false, json{{"error", std::move(message)}}.dump(), {std::move(d)}};
  }

  friend bool operator==(const ToolOutcome&, const ToolOutcome&) = default;
};

inline void to_json(json& j, const ToolOutcome& o) {
  j = json{{"ok", o.ok}, {"payload", o.payload}, {"diagnostics", o.diagnostics}};
}

inline void from_json(const json& j, ToolOutcome& o) {
  o.ok = j.at("ok").get<bool>();
  o.payload = j.at("payload").get<std::string>();
  o.diagnostics = j.at("diagnostics").get<std::vector<Diagnostic>>();
}

/// Result of one full elaboration of a source file.
struct CompilerReport {
  bool success = false;
  std::vector<Diagnostic> messages;
  std::int64_t elapsed_ms = 0;
  std::string snapshot_id;
  bool timed_out = false;

  bool has_errors() const {
    for (const auto& m : messages) {
      if (m.severity == Severity::Error) return true;
    }
    return false;
  }

  friend bool operator==(const CompilerReport&, const CompilerReport&) = default;
};

inline void to_json(json& j, const CompilerReport& r) {
  j = json{{"success", r.success},
           {"messages", r.messages},
           {"elapsed_ms", r.elapsed_ms},
           {"snapshot_id", r.snapshot_id},
           {"timed_out", r.timed_out}};
}

inline void from_json(const json& j, CompilerReport& r) {
  r.success = j.at("success").get<bool>();
  r.messages = j.at("messages").get<std::vector<Diagnostic>>();
  r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
  r.snapshot_id = j.value("snapshot_id", std::string{});
  r.timed_out = j.value("timed_out", false);
}

/// Compiler output as a tool outcome. Errors go to diagnostics so the model
/// sees them. The payload is the report minus its timing, so identical
/// compiles give identical histories and replay keys stay stable.
inline ToolOutcome to_outcome(const CompilerReport& r) {
  ToolOutcome o;
  o.ok = r.success;
  json payload = r;
  payload.erase("elapsed_ms");
  o.payload = payload.dump();
  o.diagnostics = r.messages;
  if (!o.ok && !r.has_errors()) {
    o.diagnostics.push_back({Severity::Error, "compilation failed", std::nullopt});
  }
  return o;
}

struct ToolParam {
  std::string name;
  std::string type;  // JSON-schema primitive: string, boolean, integer, array
  std::string description;
  bool required = false;
  friend bool operator==(const ToolParam&, const ToolParam&) = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ToolParam> params;
  friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

inline void to_json(json& j, const ToolSpec& s) {
  json props = json::object();
  json required = json::array();
  for (const auto& p : s.params) {
    json prop{{"type", p.type}, {"description", p.description}};
    if (p.type == "array") prop["items"] = json{{"type", "string"}};
    props[p.name] = prop;
    if (p.required) required.push_back(p.name);
  }
  j = json{{"name", s.name},
           {"description", s.description},
           {"parameters", json{{"type", "object"}, {"properties", props}, {"required", required}}}};
}

}  // namespace autoform
