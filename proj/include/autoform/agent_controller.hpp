#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "autoform/core.hpp"
#include "autoform/message.hpp"
#include "autoform/model_gateway.hpp"
#include "autoform/prompts.hpp"
#include "autoform/records.hpp"
#include "autoform/toolbelt.hpp"

namespace autoform {

inline constexpr int kDefaultStepBudget = 24;

namespace annotation {
inline constexpr std::string_view kEmbeddedSuccess =
    "conformance: success declaration embedded in prose";
inline constexpr std::string_view kUnverifiedSuccess =
    "flag: success declared but the last compiler run did not succeed";
inline constexpr std::string_view kNoCompile = "flag: success declared without any compiler run";
inline constexpr std::string_view kStaleCompile =
    "note: file rewritten after the last compiler run";
inline constexpr std::string_view kBudgetExhausted = "budget exhausted";
inline constexpr std::string_view kNoCode = "no code emitted";
inline constexpr std::string_view kGatewayPrefix = "gateway error: ";
}  // namespace annotation

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Failure;
  EpisodeTranscript transcript;
  std::optional<std::string> final_code;
  int steps_used = 0;
  bool success_declared = false;
  std::vector<std::string> annotations;
};

struct EpisodeOptions {
  int t_max = kDefaultStepBudget;
  std::string model_id;
  json decoding = json::object();
  PromptTemplates templates = PromptTemplates::builtin();
  std::string file_name = "Main.lean";
};

enum class SuccessForm { None, Strict, Embedded };

/// Strict means the whole message is the JSON object {"status":"success"}.
/// Embedded means such an object appears somewhere inside other text.
inline SuccessForm detect_success(const std::string& content) {
  const auto t = detail::trim(content);
  if (!t.empty() && t.front() == '{') {
    const json j = json::parse(t.begin(), t.end(), nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.size() == 1 && j.contains("status") &&
        j["status"] == "success") {
      return SuccessForm::Strict;
    }
  }
  static const std::regex embedded(R"re(\{\s*"status"\s*:\s*"success"\s*\})re");
  return std::regex_search(content, embedded) ? SuccessForm::Embedded : SuccessForm::None;
}

/// First fenced code block of a response, without the fence lines.
inline std::optional<std::string> extract_code_block(const std::string& text) {
  static const std::regex fence(R"(```[^\n]*\n([\s\S]*?)```)");
  std::smatch m;
  if (!std::regex_search(text, m, fence)) return std::nullopt;
  return m[1].str();
}

inline std::string user_message(const TheoremItem& item, const PromptTemplates& t,
                                const std::string& file_name) {
  return render(t.user_message, {{"id", item.id},
                                 {"domain", std::string(display_name(item.domain))},
                                 {"file", file_name},
                                 {"statement", item.statement_text}});
}

/// The zero-tool baseline: one model call, code taken from the first fenced
/// block. Success here only means code was emitted; compilation and
/// faithfulness are judged afterwards.
inline EpisodeResult one_shot(const TheoremItem& item, ModelHandle& model,
                              const EpisodeOptions& opts = {}) {
  EpisodeResult res;
  const ToolConfig baseline{};
  res.transcript.messages.push_back(Message::system(assemble_prompt(baseline, opts.templates)));
  res.transcript.messages.push_back(Message::user(
      render(opts.templates.one_shot_user_message,
             {{"id", item.id},
              {"domain", std::string(display_name(item.domain))},
              {"statement", item.statement_text}})));
  ChatTurnResponse resp;
  try {
    resp = model.complete(ChatTurnRequest{res.transcript.messages, {}, opts.model_id, opts.decoding});
  } catch (const GatewayError& e) {
    res.annotations.push_back(std::string(annotation::kGatewayPrefix) + e.what());
    return res;
  }
  res.transcript.messages.push_back(resp.message);
  res.transcript.steps = res.steps_used = 1;
  res.final_code = extract_code_block(resp.message.content);
  if (res.final_code) {
    res.status = EpisodeStatus::Success;
  } else {
    res.annotations.emplace_back(annotation::kNoCode);
  }
  return res;
}

/// The agent loop. Each step is one model call; every tool call in the reply
/// is executed and answered before the next step. A reply without tool calls
/// that declares success ends the episode.
inline EpisodeResult run_episode(const TheoremItem& item, const ToolConfig& config,
                                 ModelHandle& model, Toolbelt& toolbelt,
                                 const EpisodeOptions& opts = {}) {
  if (opts.t_max < 1) throw ConfigError("step budget must be at least 1");
  if (!(toolbelt.config() == config)) {
    throw ConfigError("toolbelt configured for " + toolbelt.config().code() + " but episode is " +
                      config.code());
  }
  if (config.is_baseline()) return one_shot(item, model, opts);

  EpisodeResult res;
  auto& H = res.transcript.messages;
  H.push_back(Message::system(assemble_prompt(config, opts.templates)));
  H.push_back(Message::user(user_message(item, opts.templates, opts.file_name)));
  const auto specs = toolbelt.specs();

  auto finish = [&](EpisodeStatus s) {
    res.status = s;
    res.steps_used = res.transcript.steps;
    res.final_code = toolbelt.last_written();
    return res;
  };

  for (int t = 1; t <= opts.t_max; ++t) {
    ChatTurnResponse resp;
    try {
      resp = model.complete(ChatTurnRequest{H, specs, opts.model_id, opts.decoding});
    } catch (const GatewayError& e) {
      res.annotations.push_back(std::string(annotation::kGatewayPrefix) + e.what());
      return finish(EpisodeStatus::Failure);
    }
    H.push_back(resp.message);
    ++res.transcript.steps;

    if (!resp.message.tool_calls.empty()) {
      for (const auto& call : resp.message.tool_calls) {
        ToolOutcome out = toolbelt.execute(call);
        H.push_back(Message::tool(call.call_id, json(out).dump()));
        res.transcript.tool_outcomes.emplace_back(call.call_id, std::move(out));
      }
      continue;
    }

    const SuccessForm form = detect_success(resp.message.content);
    if (form == SuccessForm::None) continue;
    res.success_declared = true;
    if (form == SuccessForm::Embedded) res.annotations.emplace_back(annotation::kEmbeddedSuccess);
    if (config.f) {
      const auto& last = toolbelt.last_compile();
      if (!last) {
        res.annotations.emplace_back(annotation::kNoCompile);
        return finish(EpisodeStatus::Failure);
      }
      if (!last->success) {
        res.annotations.emplace_back(annotation::kUnverifiedSuccess);
        return finish(EpisodeStatus::Failure);
      }
      if (toolbelt.written_since_last_compile()) res.annotations.emplace_back(annotation::kStaleCompile);
    }
    return finish(EpisodeStatus::Success);
  }
  res.annotations.emplace_back(annotation::kBudgetExhausted);
  return finish(EpisodeStatus::Failure);
}

}  // namespace autoform
