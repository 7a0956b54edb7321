#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "autoform/error.hpp"
#include "autoform/tool_types.hpp"

namespace autoform {

enum class Role { System, User, Assistant, Tool };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "?";
}

inline Role parse_role(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  if (s == "tool") return Role::Tool;
  throw ValidationError("unknown message role '" + std::string(s) + "'");
}

struct ToolCall {
  std::string call_id;
  std::string name;
  json arguments = json::object();
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

inline void to_json(json& j, const ToolCall& c) {
  j = json{{"call_id", c.call_id}, {"name", c.name}, {"arguments", c.arguments}};
}

inline void from_json(const json& j, ToolCall& c) {
  c.call_id = j.at("call_id").get<std::string>();
  c.name = j.at("name").get<std::string>();
  c.arguments = j.value("arguments", json::object());
}

struct Message {
  Role role = Role::User;
  std::string content;
  std::vector<ToolCall> tool_calls;
  std::optional<std::string> in_reply_to;

  static Message system(std::string text) { return {Role::System, std::move(text), {}, {}}; }
  static Message user(std::string text) { return {Role::User, std::move(text), {}, {}}; }
  static Message assistant(std::string text, std::vector<ToolCall> calls = {}) {
    return {Role::Assistant, std::move(text), std::move(calls), {}};
  }
  static Message tool(std::string call_id, std::string text) {
    return {Role::Tool, std::move(text), {}, std::move(call_id)};
  }

  friend bool operator==(const Message&, const Message&) = default;
};

inline void to_json(json& j, const Message& m) {
  j = json{{"role", to_string(m.role)}, {"content", m.content}};
  if (!m.tool_calls.empty()) j["tool_calls"] = m.tool_calls;
  if (m.in_reply_to) j["in_reply_to"] = *m.in_reply_to;
}

inline void from_json(const json& j, Message& m) {
  m.role = parse_role(j.at("role").get<std::string>());
  m.content = j.value("content", std::string{});
  m.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
  if (j.contains("in_reply_to")) {
    m.in_reply_to = j.at("in_reply_to").get<std::string>();
  } else {
    m.in_reply_to.reset();
  }
}

/// Checks the per-message invariants of an assistant reply: it carries
/// content, tool calls, or both, and every call has a distinct non-empty id.
inline void validate_assistant_message(const Message& m) {
  if (m.role != Role::Assistant) throw ValidationError("expected an assistant message");
  if (m.content.empty() && m.tool_calls.empty()) {
    throw ValidationError("assistant message has neither content nor tool calls");
  }
  std::set<std::string> ids;
  for (const auto& c : m.tool_calls) {
    if (c.call_id.empty()) throw ValidationError("tool call without call_id");
    if (c.name.empty()) throw ValidationError("tool call without a tool name");
    if (!ids.insert(c.call_id).second) {
      throw ValidationError("duplicate call_id '" + c.call_id + "' in one message");
    }
  }
}

struct EpisodeTranscript {
  std::vector<Message> messages;
  std::vector<std::pair<std::string, ToolOutcome>> tool_outcomes;
  int steps = 0;

  friend bool operator==(const EpisodeTranscript&, const EpisodeTranscript&) = default;
};

inline void to_json(json& j, const EpisodeTranscript& t) {
  json outcomes = json::array();
  for (const auto& [id, o] : t.tool_outcomes) {
    outcomes.push_back(json{{"call_id", id}, {"outcome", o}});
  }
  j = json{{"messages", t.messages}, {"tool_outcomes", outcomes}, {"steps", t.steps}};
}

inline void from_json(const json& j, EpisodeTranscript& t) {
  t.messages = j.at("messages").get<std::vector<Message>>();
  t.tool_outcomes.clear();
  for (const auto& e : j.at("tool_outcomes")) {
    t.tool_outcomes.emplace_back(e.at("call_id").get<std::string>(),
                                 e.at("outcome").get<ToolOutcome>());
  }
  t.steps = j.at("steps").get<int>();
}

/// Returns every integrity violation found; an empty list means the
/// transcript is well formed:
///   messages[0] is system, messages[1] is user,
///   steps == number of assistant messages,
///   each tool reply answers exactly one earlier call, and each call gets
///   exactly one reply.
inline std::vector<std::string> transcript_problems(const EpisodeTranscript& t) {
  std::vector<std::string> problems;
  if (t.messages.size() < 2 || t.messages[0].role != Role::System ||
      t.messages[1].role != Role::User) {
    problems.emplace_back("transcript must open with a system message then a user message");
  }
  int assistants = 0;
  std::map<std::string, int> replies;  // call_id -> reply count
  std::set<std::string> issued;
  for (std::size_t i = 0; i < t.messages.size(); ++i) {
    const Message& m = t.messages[i];
    if (m.role == Role::Assistant) {
      ++assistants;
      if (m.content.empty() && m.tool_calls.empty()) {
        problems.push_back("assistant message " + std::to_string(i) + " is empty");
      }
      for (const auto& c : m.tool_calls) {
        if (!issued.insert(c.call_id).second) {
          problems.push_back("call_id '" + c.call_id + "' issued twice");
        }
        replies.emplace(c.call_id, 0);
      }
    } else if (m.role == Role::Tool) {
      if (!m.in_reply_to) {
        problems.push_back("tool message " + std::to_string(i) + " lacks in_reply_to");
        continue;
      }
      auto it = replies.find(*m.in_reply_to);
      if (it == replies.end()) {
        problems.push_back("tool message " + std::to_string(i) + " answers unknown call '" +
                           *m.in_reply_to + "'");
      } else {
        ++it->second;
      }
    }
  }
  for (const auto& [id, n] : replies) {
    if (n != 1) {
      problems.push_back("call '" + id + "' has " + std::to_string(n) + " replies");
    }
  }
  if (assistants != t.steps) {
    problems.push_back("steps=" + std::to_string(t.steps) + " but " + std::to_string(assistants) +
                       " assistant messages");
  }
  return problems;
}

}  // namespace autoform
