#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "autoform/hash.hpp"
#include "autoform/model_gateway.hpp"
#include "autoform/services.hpp"
#include "autoform/toolbelt.hpp"

// Offline stand-ins for the orchestrator, the judges and the external
// services. Every reply is a pure function of the request so the stubs can
// be recorded and replayed like live models.

namespace autoform::stub {

namespace detail {

inline std::uint64_t draw(std::string_view a, std::string_view b, std::uint64_t salt = 0) {
  return splitmix64(fnv1a64(a) ^ splitmix64(fnv1a64(b) + salt));
}

inline std::string field(const std::string& text, const std::string& label) {
  const auto at = text.find(label);
  if (at == std::string::npos) return {};
  const auto start = at + label.size();
  const auto end = text.find('\n', start);
  return text.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

inline std::string lean_name(std::string id) {
  for (char& c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') c = '_';
  }
  if (id.empty() || std::isdigit(static_cast<unsigned char>(id.front()))) id.insert(0, "thm_");
  return id;
}

}  // namespace detail

/// One statement shape per domain, with the identifier a sloppy draft
/// misspells and the namespace that resolves it.
struct StatementShape {
  std::string pattern;  // {name} and {ident} are substituted
  std::string ident;    // correct identifier
  std::string typo;     // misspelled identifier, unknown to the checker
  std::string ns;
};

inline const StatementShape& shape_for(std::string_view domain_display) {
  static const StatementShape algebra{
      "theorem {name} (p : Polynomial ℂ) (h : 0 < p.natDegree) : ∃ z : ℂ, {ident} p z := by sorry",
      "Polynomial.IsRoot", "Polynomial.isRoot", "Polynomial"};
  static const StatementShape real{
      "theorem {name} : {ident} (fun n : ℕ => (1 : ℝ) / n) Filter.atTop (nhds 0) := by sorry",
      "Filter.Tendsto", "Filter.tendsto", "Filter"};
  static const StatementShape complex{
      "theorem {name} (z : ℂ) : Complex.abs ({ident} z) = Real.exp z.re := by sorry",
      "Complex.exp", "Complex.expp", "Complex"};
  static const StatementShape topology{
      "theorem {name} {X : Type*} [TopologicalSpace X] : IsOpen ({ident} : Set X) := by sorry",
      "Set.univ", "Set.Univ", "Set"};
  if (domain_display == "Algebra") return algebra;
  if (domain_display == "Complex Analysis") return complex;
  if (domain_display == "Topology") return topology;
  return real;
}

inline std::string render_shape(const StatementShape& s, const std::string& name,
                                const std::string& ident) {
  std::string body = s.pattern;
  body.replace(body.find("{name}"), 6, name);
  body.replace(body.find("{ident}"), 7, ident);
  return "import Mathlib\n\n" + body + "\n";
}

struct OrchestratorPolicy {
  int typo_pct_one_shot = 60;
  int typo_pct_agent = 50;
  int typo_pct_with_drafter = 25;
  int blind_fix_pct = 40;     // chance a repair without search fixes the name
  int max_blind_repairs = 6;  // then the stub declares success regardless
  int embedded_success_pct = 10;
};

/// Scripted tool-using agent. Reads the whole history each turn and decides
/// the next move from it, so it holds no state between calls.
class StubOrchestrator final : public ModelHandle {
 public:
  explicit StubOrchestrator(OrchestratorPolicy p = {}) : p_(p) {}

  ChatTurnResponse complete(const ChatTurnRequest& req) override {
    if (req.history.size() < 2) throw ValidationError("stub orchestrator needs system and user messages");
    const std::string& user = req.history[1].content;
    const std::string id = detail::field(user, "Theorem id: ");
    const std::string domain = detail::field(user, "Domain: ");
    const StatementShape& shape = shape_for(domain);
    const std::string name = detail::lean_name(id);

    std::vector<std::string> avail;
    for (const auto& s : req.tool_specs) avail.push_back(s.name);
    auto has = [&](std::string_view n) { return std::find(avail.begin(), avail.end(), n) != avail.end(); };

    if (avail.empty()) {
      const bool typo = detail::draw(id, "one-shot") % 100 < static_cast<std::uint64_t>(p_.typo_pct_one_shot);
      const std::string code = render_shape(shape, name, typo ? shape.typo : shape.ident);
      return reply(Message::assistant("Here is the statement.\n\n```lean\n" + code + "```\n"));
    }

    // Recover what happened so far.
    struct Step {
      std::string tool;
      json args;
      std::optional<ToolOutcome> outcome;
    };
    std::vector<Step> steps;
    for (const auto& m : req.history) {
      if (m.role == Role::Assistant) {
        for (const auto& c : m.tool_calls) steps.push_back({c.name, c.arguments, std::nullopt});
      } else if (m.role == Role::Tool && !steps.empty()) {
        const json j = json::parse(m.content, nullptr, false);
        if (!j.is_discarded()) steps.back().outcome = j.get<ToolOutcome>();
      }
    }
    const int turn = 1 + static_cast<int>(std::count_if(req.history.begin(), req.history.end(),
                                                         [](const Message& m) { return m.role == Role::Assistant; }));
    auto call = [&](std::string_view tool, json args) {
      return reply(Message::assistant("", {ToolCall{"call_" + std::to_string(turn), std::string(tool), std::move(args)}}));
    };
    auto done = [&] {
      if (detail::draw(id, "embedded") % 100 < static_cast<std::uint64_t>(p_.embedded_success_pct)) {
        return reply(Message::assistant("The statement is final. {\"status\": \"success\"}"));
      }
      return reply(Message::assistant("{\"status\":\"success\"}"));
    };
    auto count = [&](std::string_view tool) {
      return std::count_if(steps.begin(), steps.end(), [&](const Step& s) { return s.tool == tool; });
    };
    const std::string path = name + ".lean";
    auto write = [&](const std::string& ident) {
      return call(tools::kWriteFile, json{{"path", path}, {"content", render_shape(shape, name, ident)}});
    };

    if (has(tools::kTranslator) && count(tools::kTranslator) == 0) {
      return call(tools::kTranslator, json{{"statement", detail::field(user + "\n", "Statement:\n")}});
    }
    if (count(tools::kWriteFile) == 0) {
      const int pct = has(tools::kTranslator) ? p_.typo_pct_with_drafter : p_.typo_pct_agent;
      const bool typo = detail::draw(id, "agent") % 100 < static_cast<std::uint64_t>(pct);
      return write(typo ? shape.typo : shape.ident);
    }

    const Step& last = steps.back();
    std::string written;
    for (const auto& s : steps) {
      if (s.tool == tools::kWriteFile) written = s.args.value("content", "");
    }
    const bool has_typo = written.find(shape.typo) != std::string::npos;

    if (last.tool == tools::kResolve) {
      std::string best = shape.ident;
      if (last.outcome && last.outcome->ok) {
        const json p = json::parse(last.outcome->payload, nullptr, false);
        if (!p.is_discarded() && !p["candidates"].empty()) best = p["candidates"][0]["name"].get<std::string>();
      }
      return write(best);
    }

    if (has(tools::kRepl)) {
      if (last.tool == tools::kWriteFile) return call(tools::kRepl, json{{"path", path}});
      if (last.tool == tools::kRepl && last.outcome && last.outcome->ok) return done();
      if (last.tool == tools::kInspect) {
        return call(tools::kResolve, json{{"token", shape.typo.substr(shape.ns.size() + 1)},
                                          {"namespace_hints", json::array({shape.ns})}});
      }
      // Compile failed.
      if (has(tools::kInspect)) return call(tools::kInspect, json{{"name", shape.typo}});
      const auto repairs = count(tools::kWriteFile) - 1;
      if (repairs >= p_.max_blind_repairs) return done();
      const bool fixed = detail::draw(id, "blind", static_cast<std::uint64_t>(repairs)) % 100 <
                         static_cast<std::uint64_t>(p_.blind_fix_pct);
      return write(fixed ? shape.ident : shape.typo);
    }

    // No compiler: search tools are the only check.
    if (has(tools::kInspect) && count(tools::kInspect) == 0) {
      const std::string token = has_typo ? shape.typo : shape.ident;
      return call(tools::kInspect, json{{"name", token}});
    }
    if (last.tool == tools::kInspect && last.outcome) {
      const json p = json::parse(last.outcome->payload, nullptr, false);
      if (!p.is_discarded() && !p.value("exists", true)) {
        return call(tools::kResolve, json{{"token", shape.typo.substr(shape.ns.size() + 1)},
                                          {"namespace_hints", json::array({shape.ns})}});
      }
    }
    return done();
  }

 private:
  static ChatTurnResponse reply(Message m) {
    ChatTurnResponse r;
    r.message = std::move(m);
    r.usage = Usage{0, 0};
    return r;
  }

  OrchestratorPolicy p_;
};

/// Deterministic grader. A lenient judge passes a superset of what a strict
/// one passes, which mirrors the containment seen between real judges.
class StubJudge final : public ModelHandle {
 public:
  StubJudge(int pass_pct, int malformed_pct = 0) : pass_pct_(pass_pct), malformed_pct_(malformed_pct) {}

  ChatTurnResponse complete(const ChatTurnRequest& req) override {
    if (req.history.size() < 2) throw ValidationError("stub judge needs system and user messages");
    const std::string& user = req.history[1].content;
    const bool compile_pass = detail::field(user, "compile_pass: ") == "True";
    const auto code_at = user.find("Lean 4 code:\n");
    const std::string code = code_at == std::string::npos ? std::string() : user.substr(code_at);
    const std::uint64_t h = detail::draw(code, "judge");
    const bool first_attempt = req.history.size() == 2;

    json v;
    if (first_attempt && h % 100 < static_cast<std::uint64_t>(malformed_pct_)) {
      v = json{{"faithful", true}, {"grade", 10}, {"score", 10}, {"thought", thought("extra key")}};
    } else if (!compile_pass) {
      v = json{{"faithful", false}, {"grade", static_cast<int>(h % 4)}, {"thought", thought("does not compile")}};
    } else if (h % 100 < static_cast<std::uint64_t>(pass_pct_)) {
      v = json{{"faithful", true}, {"grade", 9 + static_cast<int>((h >> 8) % 2)}, {"thought", thought("matches")}};
    } else {
      v = json{{"faithful", false}, {"grade", 4 + static_cast<int>((h >> 8) % 5)}, {"thought", thought("mismatch")}};
    }
    ChatTurnResponse r;
    r.message = Message::assistant(v.dump());
    return r;
  }

 private:
  static std::string thought(const std::string& s) {
    return "### BEGIN THOUGHT\n" + s + "\n### END THOUGHT";
  }
  int pass_pct_;
  int malformed_pct_;
};

class StubDrafter final : public Drafter {
 public:
  ToolOutcome translate(const std::string& statement) override {
    if (statement.empty()) return ToolOutcome::failure("empty statement");
    return ToolOutcome::success("import Mathlib\n\n-- draft for: " + statement.substr(0, 60) +
                                "\ntheorem draft : True := by sorry\n");
  }
};

class StubSearch final : public SearchProvider {
 public:
  ToolOutcome search(const std::string& query) override {
    json results = json::array();
    results.push_back(json{{"title", "Mathlib documentation: " + query},
                           {"snippet", "Search results are not available offline."},
                           {"url", "https://leanprover-community.github.io/mathlib4_docs/"}});
    return ToolOutcome::success(json{{"results", results}}.dump());
  }
};

}  // namespace autoform::stub
