#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "autoform/benchmark_store.hpp"
#include "autoform/compiler.hpp"
#include "autoform/csv.hpp"
#include "autoform/model_gateway.hpp"
#include "autoform/numeric.hpp"
#include "autoform/prompts.hpp"
#include "autoform/records.hpp"

namespace autoform {

inline constexpr int kFaithfulThreshold = 9;
inline constexpr int kCompileFailMaxGrade = 3;

/// Absent code never reaches the compiler.
inline bool compile_gate(const std::optional<std::string>& final_code, Compiler& compiler) {
  if (!final_code) return false;
  return compiler.compile(*final_code).success;
}

inline bool faithful(bool compile_pass, int grade) {
  if (grade < 0 || grade > 10) {
    throw ValidationError("grade " + std::to_string(grade) + " outside 0..10");
  }
  return compile_pass && grade >= kFaithfulThreshold;
}

struct JudgeParse {
  std::optional<JudgeVerdict> verdict;
  std::string error;  // set when verdict is empty
};

/// Strict reading of the judge contract: one JSON object, exactly the keys
/// faithful (bool), grade (integer 0..10) and thought (string), and for
/// non-compiling code faithful=false with grade at most 3. Nothing is
/// repaired or clamped.
inline JudgeParse parse_judge_response(const std::string& raw, bool compile_pass,
                                       const std::string& judge_id) {
  const json j = json::parse(raw, nullptr, false);
  if (j.is_discarded()) return {std::nullopt, "response is not valid JSON"};
  if (!j.is_object()) return {std::nullopt, "response is not a JSON object"};
  for (const auto& [k, v] : j.items()) {
    if (k != "faithful" && k != "grade" && k != "thought") {
      return {std::nullopt, "unexpected key '" + k + "'"};
    }
  }
  for (const char* k : {"faithful", "grade", "thought"}) {
    if (!j.contains(k)) return {std::nullopt, std::string("missing key '") + k + "'"};
  }
  if (!j["faithful"].is_boolean()) return {std::nullopt, "'faithful' must be a boolean"};
  if (!j["grade"].is_number_integer()) return {std::nullopt, "'grade' must be an integer"};
  if (!j["thought"].is_string()) return {std::nullopt, "'thought' must be a string"};
  const auto grade = j["grade"].get<std::int64_t>();
  if (grade < 0 || grade > 10) {
    return {std::nullopt, "grade " + std::to_string(grade) + " outside 0..10"};
  }
  JudgeVerdict v{judge_id, j["faithful"].get<bool>(), static_cast<int>(grade),
                 j["thought"].get<std::string>()};
  if (!compile_pass && (v.faithful || v.grade > kCompileFailMaxGrade)) {
    return {std::nullopt, "compile_pass is False but verdict has faithful=" +
                              std::string(v.faithful ? "true" : "false") +
                              ", grade=" + std::to_string(v.grade)};
  }
  return {v, {}};
}

struct JudgeOptions {
  std::string judge_id;
  std::string model_id;
  json decoding = json::object();
  int max_attempts = 3;
  PromptTemplates templates = PromptTemplates::builtin();
};

struct JudgeOutcome {
  std::optional<JudgeVerdict> verdict;  // empty means judge-invalid
  int attempts = 0;
  std::vector<std::string> rejections;
};

inline std::string judge_user_message(const std::string& statement, const std::string& code,
                                      bool compile_pass, const PromptTemplates& t) {
  return render(t.judge_user_message, {{"statement", statement},
                                       {"code", code},
                                       {"compile_pass", compile_pass ? "True" : "False"}});
}

/// Queries the judge, feeding each rejection reason back and re-asking until
/// a contract-conforming verdict arrives or the attempt cap is hit.
inline JudgeOutcome judge(const std::string& statement, const std::string& code, bool compile_pass,
                          ModelHandle& judge_model, const JudgeOptions& opts) {
  if (opts.max_attempts < 1) throw ConfigError("judge attempt cap must be at least 1");
  JudgeOutcome out;
  std::vector<Message> history = {
      Message::system(opts.templates.judge_prompt),
      Message::user(judge_user_message(statement, code, compile_pass, opts.templates))};
  while (out.attempts < opts.max_attempts) {
    ++out.attempts;
    ChatTurnResponse resp;
    try {
      resp = judge_model.complete(ChatTurnRequest{history, {}, opts.model_id, opts.decoding});
    } catch (const GatewayError& e) {
      out.rejections.push_back(std::string("gateway: ") + e.what());
      return out;
    }
    JudgeParse p = parse_judge_response(resp.message.content, compile_pass, opts.judge_id);
    if (p.verdict) {
      out.verdict = std::move(p.verdict);
      return out;
    }
    out.rejections.push_back(p.error);
    history.push_back(resp.message);
    history.push_back(Message::user("Your previous response was rejected: " + p.error +
                                    ". Return ONLY the JSON object required by the output contract."));
  }
  return out;
}

/// Recomputes the two metric flags of a run from its stored verdicts.
inline void apply_metrics(RunRecord& r, const std::string& primary, const std::string& secondary) {
  auto pass = [&](const std::string& id) {
    auto it = r.verdicts.find(id);
    return it != r.verdicts.end() && faithful(r.compile_pass, it->second.grade);
  };
  r.faithful_primary = pass(primary);
  r.faithful_consensus = r.faithful_primary && pass(secondary);
}

struct ConsensusSummary {
  std::int64_t pass_primary = 0;
  std::int64_t pass_secondary = 0;
  std::int64_t pass_consensus = 0;
  std::optional<Rational> consensus_rate;  // empty is the undefined flag
  std::int64_t judged = 0;
  std::int64_t judge_invalid = 0;
  std::vector<std::string> excluded;  // run keys lacking a verdict

  bool rate_undefined() const { return !consensus_rate; }
};

inline ConsensusSummary consensus_from_counts(std::int64_t pass_primary, std::int64_t pass_secondary,
                                              std::int64_t pass_consensus) {
  if (pass_primary < 0 || pass_secondary < 0 || pass_consensus < 0) {
    throw ValidationError("negative pass count");
  }
  if (pass_consensus > std::min(pass_primary, pass_secondary)) {
    throw ValidationError("consensus count exceeds a single judge's count");
  }
  ConsensusSummary s;
  s.pass_primary = pass_primary;
  s.pass_secondary = pass_secondary;
  s.pass_consensus = pass_consensus;
  if (pass_primary > 0) s.consensus_rate = Rational(pass_consensus, pass_primary);
  return s;
}

inline ConsensusSummary consensus_summary(const std::vector<RunRecord>& runs,
                                          const std::string& primary,
                                          const std::string& secondary) {
  std::int64_t p = 0, s = 0, c = 0, judged = 0, invalid = 0;
  std::vector<std::string> excluded;
  for (const auto& r : runs) {
    if (r.judge_invalid.count(primary) || r.judge_invalid.count(secondary)) ++invalid;
    auto vp = r.verdicts.find(primary);
    auto vs = r.verdicts.find(secondary);
    if (vp == r.verdicts.end() || vs == r.verdicts.end()) {
      excluded.push_back(r.key());
      continue;
    }
    ++judged;
    const bool fp = faithful(r.compile_pass, vp->second.grade);
    const bool fs = faithful(r.compile_pass, vs->second.grade);
    p += fp;
    s += fs;
    c += fp && fs;
  }
  ConsensusSummary out = consensus_from_counts(p, s, c);
  out.judged = judged;
  out.judge_invalid = invalid;
  out.excluded = std::move(excluded);
  return out;
}

struct SystemContainment {
  std::string system;
  std::int64_t pass_primary = 0;
  std::int64_t pass_secondary = 0;
  std::int64_t primary_only = 0;    // |P \ S|
  std::int64_t secondary_only = 0;  // |S \ P|
};

struct ContainmentReport {
  std::vector<SystemContainment> systems;
  std::array<std::int64_t, 4> disagreements_by_domain{};  // indexed by domain_index
};

/// "orchestrator/config" identifies a system in the containment view.
inline std::string system_label(const RunRecord& r) {
  return r.orchestrator_id + "/" + r.config.code();
}

inline ContainmentReport containment_report(const std::vector<RunRecord>& runs,
                                            const std::string& primary,
                                            const std::string& secondary) {
  std::map<std::string, SystemContainment> by_system;
  ContainmentReport rep;
  for (const auto& r : runs) {
    auto vp = r.verdicts.find(primary);
    auto vs = r.verdicts.find(secondary);
    if (vp == r.verdicts.end() || vs == r.verdicts.end()) continue;
    const bool fp = faithful(r.compile_pass, vp->second.grade);
    const bool fs = faithful(r.compile_pass, vs->second.grade);
    auto& sys = by_system[system_label(r)];
    sys.system = system_label(r);
    sys.pass_primary += fp;
    sys.pass_secondary += fs;
    sys.primary_only += fp && !fs;
    sys.secondary_only += fs && !fp;
    if (fp != fs) ++rep.disagreements_by_domain[domain_index(r.domain)];
  }
  for (auto& [k, v] : by_system) rep.systems.push_back(std::move(v));
  return rep;
}

// Human audit support: a review sheet of sampled faithful runs, and a
// calculator comparing the filled-in human grades with the judge's.

inline void export_audit_sheet(const std::vector<RunRecord>& runs, const Corpus& corpus,
                               const std::string& judge_id, std::size_t sample_size,
                               std::uint64_t seed, std::ostream& out) {
  std::vector<const RunRecord*> pool;
  for (const auto& r : runs) {
    auto v = r.verdicts.find(judge_id);
    if (v != r.verdicts.end() && faithful(r.compile_pass, v->second.grade)) pool.push_back(&r);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > sample_size) pool.resize(sample_size);
  std::sort(pool.begin(), pool.end(),
            [](const RunRecord* a, const RunRecord* b) { return a->key() < b->key(); });
  csv::write_row(out, {"run_key", "theorem_id", "domain", "config", "statement", "final_code",
                       "judge_grade", "human_grade"});
  for (const RunRecord* r : pool) {
    const TheoremItem* item = corpus.find(r->theorem_id);
    csv::write_row(out, {r->key(), r->theorem_id, std::string(to_string(r->domain)),
                         r->config.code(), item ? item->statement_text : "",
                         r->final_code.value_or(""),
                         std::to_string(r->verdicts.at(judge_id).grade), ""});
  }
}

struct AgreementStats {
  std::int64_t compared = 0;
  std::int64_t exact = 0;
  std::int64_t within_one_faithful = 0;  // |diff| = 1 with both grades in the faithful range
  std::int64_t threshold_crossing = 0;   // one side faithful, the other not
  std::int64_t other = 0;
  std::vector<std::string> unknown_keys;

  Rational exact_pct() const { return compared ? percent(exact, compared) : Rational(0); }
  Rational within_one_pct() const {
    return compared ? percent(within_one_faithful, compared) : Rational(0);
  }
  Rational crossing_pct() const {
    return compared ? percent(threshold_crossing, compared) : Rational(0);
  }
  Rational binary_agreement_pct() const {
    return compared ? percent(compared - threshold_crossing, compared) : Rational(0);
  }
};

inline void tally_agreement(AgreementStats& st, int judge_grade, int human_grade) {
  if (human_grade < 0 || human_grade > 10) {
    throw ValidationError("human grade " + std::to_string(human_grade) + " outside 0..10");
  }
  ++st.compared;
  const bool fj = judge_grade >= kFaithfulThreshold;
  const bool fh = human_grade >= kFaithfulThreshold;
  if (judge_grade == human_grade) {
    ++st.exact;
  } else if (fj != fh) {
    ++st.threshold_crossing;
  } else if (fj && std::abs(judge_grade - human_grade) == 1) {
    ++st.within_one_faithful;
  } else {
    ++st.other;
  }
}

/// Reads a sheet with at least the columns run_key and human_grade; rows
/// with an empty human_grade are skipped.
inline AgreementStats audit_agreement(std::istream& sheet, const std::vector<RunRecord>& runs,
                                      const std::string& judge_id) {
  const auto rows = csv::read_all(sheet);
  if (rows.empty()) throw ValidationError("audit sheet is empty");
  const auto& header = rows.front();
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("audit sheet lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t key_col = col("run_key"), grade_col = col("human_grade");
  std::map<std::string, const RunRecord*> by_key;
  for (const auto& r : runs) by_key[r.key()] = &r;

  AgreementStats st;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() <= std::max(key_col, grade_col) || row[grade_col].empty()) continue;
    auto it = by_key.find(row[key_col]);
    if (it == by_key.end() || !it->second->verdicts.count(judge_id)) {
      st.unknown_keys.push_back(row[key_col]);
      continue;
    }
    int human = 0;
    try {
      std::size_t used = 0;
      human = std::stoi(row[grade_col], &used);
      if (used != row[grade_col].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("audit sheet row " + std::to_string(i + 1) + ": bad human_grade '" +
                            row[grade_col] + "'");
    }
    tally_agreement(st, it->second->verdicts.at(judge_id).grade, human);
  }
  return st;
}

}  // namespace autoform
