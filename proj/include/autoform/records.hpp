#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "autoform/core.hpp"
#include "autoform/error.hpp"

namespace autoform {

using json = nlohmann::json;

enum class EpisodeStatus { Success, Failure };

inline std::string_view to_string(EpisodeStatus s) {
  return s == EpisodeStatus::Success ? "success" : "failure";
}

inline EpisodeStatus parse_status(std::string_view s) {
  if (s == "success") return EpisodeStatus::Success;
  if (s == "failure") return EpisodeStatus::Failure;
  throw ValidationError("unknown episode status '" + std::string(s) + "'");
}

struct JudgeVerdict {
  std::string judge_id;
  bool faithful = false;
  int grade = 0;
  std::string thought;
  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

inline void to_json(json& j, const JudgeVerdict& v) {
  j = json{{"judge_id", v.judge_id},
           {"faithful", v.faithful},
           {"grade", v.grade},
           {"thought", v.thought}};
}

inline void from_json(const json& j, JudgeVerdict& v) {
  v.judge_id = j.at("judge_id").get<std::string>();
  v.faithful = j.at("faithful").get<bool>();
  v.grade = j.at("grade").get<int>();
  v.thought = j.at("thought").get<std::string>();
}

/// One finished episode plus its evaluation state.
struct RunRecord {
  std::string theorem_id;
  Domain domain = Domain::RealAnalysis;
  ToolConfig config;
  std::string orchestrator_id;
  int step_budget = 0;
  int steps_used = 0;
  EpisodeStatus status = EpisodeStatus::Failure;
  std::optional<std::string> final_code;
  bool compile_pass = false;
  std::map<std::string, JudgeVerdict> verdicts;
  std::set<std::string> judge_invalid;
  bool faithful_primary = false;
  bool faithful_consensus = false;
  std::string transcript_ref;
  std::int64_t wall_time_ms = 0;
  std::vector<std::string> annotations;

  /// "theorem_id|config|orchestrator_id"; unique within a store.
  std::string key() const { return run_key(theorem_id, config, orchestrator_id); }

  static std::string run_key(const std::string& theorem_id, const ToolConfig& c,
                             const std::string& orchestrator_id) {
    return theorem_id + "|" + c.code() + "|" + orchestrator_id;
  }

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline void to_json(json& j, const RunRecord& r) {
  j = json{{"theorem_id", r.theorem_id},
           {"domain", to_string(r.domain)},
           {"config", r.config.code()},
           {"orchestrator_id", r.orchestrator_id},
           {"step_budget", r.step_budget},
           {"steps_used", r.steps_used},
           {"status", to_string(r.status)},
           {"final_code", r.final_code ? json(*r.final_code) : json(nullptr)},
           {"compile_pass", r.compile_pass},
           {"verdicts", r.verdicts},
           {"judge_invalid", r.judge_invalid},
           {"faithful_primary", r.faithful_primary},
           {"faithful_consensus", r.faithful_consensus},
           {"transcript_ref", r.transcript_ref},
           {"wall_time_ms", r.wall_time_ms},
           {"annotations", r.annotations}};
}

inline void from_json(const json& j, RunRecord& r) {
  r.theorem_id = j.at("theorem_id").get<std::string>();
  auto d = parse_domain(j.at("domain").get<std::string>());
  if (!d) throw ValidationError("unknown domain in run record");
  r.domain = *d;
  r.config = ToolConfig::parse(j.at("config").get<std::string>());
  r.orchestrator_id = j.at("orchestrator_id").get<std::string>();
  r.step_budget = j.at("step_budget").get<int>();
  r.steps_used = j.at("steps_used").get<int>();
  r.status = parse_status(j.at("status").get<std::string>());
  const auto& fc = j.at("final_code");
  r.final_code = fc.is_null() ? std::nullopt : std::optional<std::string>(fc.get<std::string>());
  r.compile_pass = j.at("compile_pass").get<bool>();
  r.verdicts = j.at("verdicts").get<std::map<std::string, JudgeVerdict>>();
  r.judge_invalid = j.value("judge_invalid", std::set<std::string>{});
  r.faithful_primary = j.at("faithful_primary").get<bool>();
  r.faithful_consensus = j.at("faithful_consensus").get<bool>();
  r.transcript_ref = j.at("transcript_ref").get<std::string>();
  r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  r.annotations = j.value("annotations", std::vector<std::string>{});
}

/// Throws ValidationError naming the first violated record invariant.
inline void validate_record(const RunRecord& r) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("run " + r.key() + ": " + why);
  };
  if (r.theorem_id.empty()) fail("empty theorem_id");
  if (r.orchestrator_id.empty()) fail("empty orchestrator_id");
  if (r.step_budget < 1) fail("step budget must be >= 1");
  if (r.steps_used < 0 || r.steps_used > r.step_budget) {
    fail("steps_used=" + std::to_string(r.steps_used) + " outside [0, " +
         std::to_string(r.step_budget) + "]");
  }
  if (r.wall_time_ms < 0) fail("negative wall time");
  if (!r.compile_pass && (r.faithful_primary || r.faithful_consensus)) {
    fail("faithful flag set although compile_pass=false");
  }
  if (r.faithful_consensus && !r.faithful_primary) {
    fail("faithful_consensus set without faithful_primary");
  }
  for (const auto& [id, v] : r.verdicts) {
    if (id != v.judge_id) fail("verdict map key '" + id + "' != judge_id '" + v.judge_id + "'");
    if (v.grade < 0 || v.grade > 10) fail("judge grade out of [0,10]");
    if (!r.compile_pass && (v.faithful || v.grade > 3)) {
      fail("verdict by " + id + " violates the compile-fail rule");
    }
  }
}

}  // namespace autoform
