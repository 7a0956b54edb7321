#include <catch_amalgamated.hpp>

#include "autoform/agent_controller.hpp"
#include "autoform/stub_policy.hpp"
#include "support.hpp"

using namespace autoform;
using testing::TempDir;

namespace {

TheoremItem item(const std::string& id = "alg_1", Domain d = Domain::Algebra) {
  return TheoremItem{id, d, "Every nonconstant complex polynomial has a root.", ""};
}

ToolbeltBackends stub_backends() {
  auto index = std::make_shared<const SymbolTable>(SymbolTable::builtin());
  return {std::make_shared<StubChecker>(*index), index, std::make_shared<stub::StubDrafter>(),
          std::make_shared<stub::StubSearch>()};
}

Message tool_call(const std::string& id, const std::string& name, json args = json::object()) {
  return Message::assistant("", {ToolCall{id, name, std::move(args)}});
}

Message done() { return Message::assistant("{\"status\":\"success\"}"); }

const std::string kGood = "import Mathlib\n\ntheorem t (p : Polynomial ℂ) : 0 < Polynomial.natDegree p → ∃ z, p.IsRoot z := by sorry\n";
const std::string kTypo = "import Mathlib\n\ntheorem t (p : Polynomial ℂ) : ¬ Polynomial.isConstant p → ∃ z, p.IsRoot z := by sorry\n";

struct Harness {
  TempDir dir;
  Toolbelt tb;
  explicit Harness(const std::string& code, ToolbeltOptions o = {})
      : tb(ToolConfig::parse(code), Workspace(dir / "ws"), stub_backends(), std::move(o)) {}
};

}  // namespace

TEST_CASE("write, compile, declare: a minimal successful episode takes three steps") {
  Harness h("010");
  auto m = ScriptedModel::of_messages(
      {tool_call("a", "lean_write_file", {{"code", kGood}}), tool_call("b", "lean4_repl_runner"), done()});
  const auto r = run_episode(item(), ToolConfig::parse("010"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE(r.steps_used == 3);
  REQUIRE(r.final_code == kGood);
  REQUIRE(r.annotations.empty());
  REQUIRE(transcript_problems(r.transcript).empty());
}

TEST_CASE("writing alone then declaring succeeds in two steps without F") {
  Harness h("001");
  auto m = ScriptedModel::of_messages({tool_call("a", "lean_write_file", {{"code", kGood}}), done()});
  const auto r = run_episode(item(), ToolConfig::parse("001"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE(r.steps_used == 2);
}

TEST_CASE("an episode that never declares success fails at the budget") {
  Harness h("010");
  std::vector<Message> script;
  for (int i = 0; i < 30; ++i) script.push_back(tool_call("c" + std::to_string(i), "lean4_repl_runner"));
  auto m = ScriptedModel::of_messages(script);
  const auto r = run_episode(item(), ToolConfig::parse("010"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Failure);
  REQUIRE(r.steps_used == 24);
  REQUIRE(m->served() == 24);
  REQUIRE(r.annotations == std::vector<std::string>{std::string(annotation::kBudgetExhausted)});
  REQUIRE_FALSE(r.final_code);
  REQUIRE(transcript_problems(r.transcript).empty());
}

TEST_CASE("the worked resolution trace replays with nine steps and eight outcomes") {
  const std::string id = "jirilebl_ca_ca_17658";
  const std::string file = id + ".lean";
  ToolbeltOptions to;
  to.default_path = file;
  Harness h("011", to);
  auto m = ScriptedModel::of_messages({
      tool_call("1", "lean_write_file", {{"path", file}, {"content", kTypo}}),
      tool_call("2", "lean4_repl_runner", {{"path", file}}),
      tool_call("3", "lean_inspect_name", {{"name", "Polynomial.IsConstant"}}),
      tool_call("4", "lean_inspect_name", {{"name", "Polynomial.eval"}}),
      tool_call("5", "lean_inspect_name", {{"name", "Polynomial.isConstant"}}),
      tool_call("6", "lean_inspect_name", {{"name", "Polynomial.natDegree"}}),
      tool_call("7", "lean_write_file", {{"path", file}, {"content", kGood}}),
      tool_call("8", "lean4_repl_runner", {{"path", file}}),
      done(),
  });
  EpisodeOptions eo;
  eo.file_name = file;
  const auto r = run_episode(item(id, Domain::ComplexAnalysis), ToolConfig::parse("011"), *m, h.tb, eo);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE(r.steps_used == 9);
  REQUIRE(r.transcript.tool_outcomes.size() == 8);
  const auto& outs = r.transcript.tool_outcomes;
  REQUIRE_FALSE(outs[1].second.ok);
  REQUIRE(json::parse(outs[2].second.payload)["exists"] == false);
  REQUIRE(json::parse(outs[3].second.payload)["exists"] == true);
  REQUIRE(json::parse(outs[4].second.payload)["exists"] == false);
  REQUIRE(json::parse(outs[5].second.payload)["exists"] == true);
  REQUIRE(outs[7].second.ok);
  REQUIRE(r.final_code == kGood);
  REQUIRE(r.transcript.messages[1].content.find(file) != std::string::npos);
  REQUIRE(transcript_problems(r.transcript).empty());
}

TEST_CASE("calls to tools outside the configuration get error outcomes") {
  Harness h("010");
  auto m = ScriptedModel::of_messages({tool_call("a", "search_online", {{"query", "x"}}),
                                       tool_call("b", "lean_write_file", {{"code", kGood}}),
                                       tool_call("c", "lean4_repl_runner"), done()});
  const auto r = run_episode(item(), ToolConfig::parse("010"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE_FALSE(r.transcript.tool_outcomes[0].second.ok);
  REQUIRE(r.transcript.tool_outcomes[0].second.payload.find("not available") != std::string::npos);
}

TEST_CASE("embedded success is accepted with a conformance note") {
  Harness h("001");
  auto m = ScriptedModel::of_messages({tool_call("a", "lean_write_file", {{"code", kGood}}),
                                       Message::assistant("All set. {\"status\": \"success\"}")});
  const auto r = run_episode(item(), ToolConfig::parse("001"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE(r.annotations == std::vector<std::string>{std::string(annotation::kEmbeddedSuccess)});
  REQUIRE(detect_success("{\"status\":\"success\"}") == SuccessForm::Strict);
  REQUIRE(detect_success("{\"status\":\"success\",\"x\":1}") == SuccessForm::None);
  REQUIRE(detect_success("thinking") == SuccessForm::None);
}

TEST_CASE("prose without a declaration keeps the episode going") {
  Harness h("001");
  auto m = ScriptedModel::of_messages({Message::assistant("Let me think."),
                                       tool_call("a", "lean_write_file", {{"code", kGood}}), done()});
  const auto r = run_episode(item(), ToolConfig::parse("001"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE(r.steps_used == 3);
}

TEST_CASE("with F, success needs a passing compile") {
  SECTION("declared after a failing compile") {
    Harness h("010");
    auto m = ScriptedModel::of_messages({tool_call("a", "lean_write_file", {{"code", kTypo}}),
                                         tool_call("b", "lean4_repl_runner"), done()});
    const auto r = run_episode(item(), ToolConfig::parse("010"), *m, h.tb);
    REQUIRE(r.status == EpisodeStatus::Failure);
    REQUIRE(r.success_declared);
    REQUIRE(r.annotations == std::vector<std::string>{std::string(annotation::kUnverifiedSuccess)});
    REQUIRE(r.final_code == kTypo);
  }
  SECTION("declared without compiling") {
    Harness h("010");
    auto m = ScriptedModel::of_messages({tool_call("a", "lean_write_file", {{"code", kGood}}), done()});
    const auto r = run_episode(item(), ToolConfig::parse("010"), *m, h.tb);
    REQUIRE(r.status == EpisodeStatus::Failure);
    REQUIRE(r.annotations == std::vector<std::string>{std::string(annotation::kNoCompile)});
  }
  SECTION("declared after rewriting past a passing compile") {
    Harness h("010");
    auto m = ScriptedModel::of_messages({tool_call("a", "lean_write_file", {{"code", kGood}}),
                                         tool_call("b", "lean4_repl_runner"),
                                         tool_call("c", "lean_write_file", {{"code", kGood + "\n"}}), done()});
    const auto r = run_episode(item(), ToolConfig::parse("010"), *m, h.tb);
    REQUIRE(r.status == EpisodeStatus::Success);
    REQUIRE(r.annotations == std::vector<std::string>{std::string(annotation::kStaleCompile)});
  }
}

TEST_CASE("several calls in one reply are all answered") {
  Harness h("011");
  Message both = Message::assistant("", {ToolCall{"x", "lean_inspect_name", {{"name", "Complex.exp"}}},
                                         ToolCall{"y", "lean_resolve_name", {{"token", "expp"}}}});
  auto m = ScriptedModel::of_messages({both, tool_call("a", "lean_write_file", {{"code", kGood}}),
                                       tool_call("b", "lean4_repl_runner"), done()});
  const auto r = run_episode(item(), ToolConfig::parse("011"), *m, h.tb);
  REQUIRE(r.steps_used == 4);
  REQUIRE(r.transcript.tool_outcomes.size() == 4);
  REQUIRE(transcript_problems(r.transcript).empty());
}

TEST_CASE("gateway failures end the episode with an annotation") {
  struct Failing : ModelHandle {
    ChatTurnResponse complete(const ChatTurnRequest&) override { throw GatewayError("down"); }
  } m;
  Harness h("010");
  const auto r = run_episode(item(), ToolConfig::parse("010"), m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Failure);
  REQUIRE(r.steps_used == 0);
  REQUIRE(r.annotations[0] == std::string(annotation::kGatewayPrefix) + "down");
}

TEST_CASE("the baseline takes one call and the first fenced block") {
  Harness h("000");
  auto m = ScriptedModel::of_messages({Message::assistant("Sure.\n```lean\n" + kGood + "```\nDone.")});
  const auto r = run_episode(item(), ToolConfig::parse("000"), *m, h.tb);
  REQUIRE(r.status == EpisodeStatus::Success);
  REQUIRE(r.steps_used == 1);
  REQUIRE(r.final_code == kGood);
  auto none = ScriptedModel::of_messages({Message::assistant("I cannot.")});
  const auto r2 = one_shot(item(), *none);
  REQUIRE(r2.status == EpisodeStatus::Failure);
  REQUIRE_FALSE(r2.final_code);
  REQUIRE(r2.annotations == std::vector<std::string>{std::string(annotation::kNoCode)});
}

TEST_CASE("mismatched toolbelt or budget is a configuration error") {
  Harness h("010");
  auto m = ScriptedModel::of_messages({done()});
  REQUIRE_THROWS_AS(run_episode(item(), ToolConfig::parse("011"), *m, h.tb), ConfigError);
  EpisodeOptions o;
  o.t_max = 0;
  REQUIRE_THROWS_AS(run_episode(item(), ToolConfig::parse("010"), *m, h.tb, o), ConfigError);
}

TEST_CASE("the stub orchestrator is deterministic and conforms in every configuration") {
  for (const auto& c : all_configs()) {
    for (const auto& [id, d] : std::vector<std::pair<std::string, Domain>>{
             {"alg_7", Domain::Algebra}, {"real_3", Domain::RealAnalysis},
             {"cplx_2", Domain::ComplexAnalysis}, {"top_9", Domain::Topology}}) {
      std::optional<EpisodeTranscript> first;
      for (int rep = 0; rep < 2; ++rep) {
        Harness h(c.code());
        stub::StubOrchestrator m;
        const auto r = run_episode(item(id, d), c, m, h.tb);
        REQUIRE(transcript_problems(r.transcript).empty());
        REQUIRE(r.steps_used >= 1);
        REQUIRE(r.steps_used <= 24);
        if (!c.is_baseline()) {
          for (const auto& msg : r.transcript.messages) {
            for (const auto& call : msg.tool_calls) REQUIRE(h.tb.is_active(call.name));
          }
        }
        if (first) REQUIRE(*first == r.transcript);
        first = r.transcript;
      }
    }
  }
}
