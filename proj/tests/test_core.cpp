#include <catch_amalgamated.hpp>

#include <sstream>

#include "autoform/core.hpp"
#include "autoform/csv.hpp"
#include "autoform/hash.hpp"
#include "autoform/message.hpp"
#include "autoform/numeric.hpp"
#include "autoform/prompts.hpp"
#include "autoform/records.hpp"
#include "support.hpp"

using namespace autoform;

TEST_CASE("config codes round-trip in T,F,S order") {
  for (std::size_t i = 0; i < 8; ++i) {
    const auto c = ToolConfig::from_index(i);
    REQUIRE(c.code().size() == 3);
    REQUIRE(ToolConfig::parse(c.code()) == c);
    REQUIRE(c.index() == i);
  }
  REQUIRE(ToolConfig::parse("110").t);
  REQUIRE(ToolConfig::parse("110").f);
  REQUIRE_FALSE(ToolConfig::parse("110").s);
  REQUIRE(ToolConfig::parse("000").is_baseline());
  REQUIRE_THROWS_AS(ToolConfig::parse("12"), ValidationError);
  REQUIRE_THROWS_AS(ToolConfig::parse("0101"), ValidationError);
  REQUIRE_THROWS_AS(ToolConfig::parse("01x"), ValidationError);
}

TEST_CASE("domain labels parse only in canonical form") {
  for (auto d : kAllDomains) REQUIRE(parse_domain(to_string(d)) == d);
  REQUIRE_FALSE(parse_domain("Number Theory"));
}

TEST_CASE("sha256 matches a known digest") {
  REQUIRE(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  REQUIRE(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("tool block lists exactly the active entries") {
  const auto t = PromptTemplates::builtin();
  const std::string full = tool_block(ToolConfig::parse("111"), t);
  REQUIRE(full.rfind("AVAILABLE TOOLS\n", 0) == 0);
  std::size_t last = 0;
  for (const char* name : {"lean4_translator(statement)", "lean_write_file(code)", "lean4_repl_runner()",
                           "lean_inspect_name(name, imports?, include_print?)",
                           "lean_resolve_name(token, namespace_hints?, imports?, top_k?)", "search_online(query)"}) {
    const auto at = full.find(name);
    REQUIRE(at != std::string::npos);
    REQUIRE(at >= last);
    last = at;
  }
  const std::string b010 = tool_block(ToolConfig::parse("010"), t);
  REQUIRE(b010.find("lean_write_file(code)") != std::string::npos);
  REQUIRE(b010.find("lean4_repl_runner()") != std::string::npos);
  for (const char* absent : {"lean4_translator", "lean_inspect_name", "lean_resolve_name", "search_online"}) {
    REQUIRE(b010.find(absent) == std::string::npos);
  }
  REQUIRE(tool_block(ToolConfig{}, t).empty());
  REQUIRE(assemble_prompt(ToolConfig{}) == t.base_prompt + "\n");
}

TEST_CASE("every assembled prompt starts with the identical base prompt") {
  const auto t = PromptTemplates::builtin();
  for (const auto& a : all_configs()) {
    for (const auto& b : all_configs()) {
      const auto pa = assemble_prompt(a, t), pb = assemble_prompt(b, t);
      const std::string prefix = t.base_prompt + "\n";
      REQUIRE(pa.compare(0, prefix.size(), prefix) == 0);
      REQUIRE(pb.compare(0, prefix.size(), prefix) == 0);
      if (a == b) REQUIRE(pa == pb);
      else REQUIRE(pa.substr(prefix.size()) != pb.substr(prefix.size()));
    }
  }
}

TEST_CASE("base prompt carries the required instructions") {
  const auto& base = PromptTemplates::builtin().base_prompt;
  REQUIRE(base.rfind("You are an expert Lean4 translation agent.", 0) == 0);
  REQUIRE(base.find("import Mathlib at the very top") != std::string::npos);
  REQUIRE(base.find("↔ characterizations") != std::string::npos);
  REQUIRE(base.find("if lean4_repl_runner is available") != std::string::npos);
  REQUIRE(base.substr(base.size() - 24) == "{ \"status\": \"success\" }\n");
}

TEST_CASE("judge prompt keeps the strict output contract") {
  const auto& j = PromptTemplates::builtin().judge_prompt;
  REQUIRE(j.rfind("You are an expert in Lean 4, Mathlib, and mathematics. You are judging TRANSLATION-ONLY.", 0) == 0);
  REQUIRE(j.find("grade must be 0..3. faithful=false.") != std::string::npos);
  REQUIRE(j.find(R"("thought": "### BEGIN THOUGHT\n<short explanation focusing on statement-level comparison>\n### END THOUGHT")") !=
          std::string::npos);
  REQUIRE(j.find("Return ONLY valid JSON. No extra keys. No markdown outside JSON.") != std::string::npos);
}

TEST_CASE("shipped template directory equals the built-in templates") {
  const auto loaded = PromptTemplates::load(AUTOFORM_DEFAULT_TEMPLATE_DIR);
  REQUIRE(loaded == PromptTemplates::builtin());
}

TEST_CASE("templates round-trip through a directory and edits take effect") {
  testing::TempDir dir;
  auto t = PromptTemplates::builtin();
  t.save(dir.path());
  REQUIRE(PromptTemplates::load(dir.path()) == t);
  {
    std::ofstream(dir / "tools/search_online.txt") << "search_online(query)\n  Custom text.\n";
  }
  const auto edited = PromptTemplates::load(dir.path());
  REQUIRE(tool_block(ToolConfig::parse("001"), edited).find("Custom text.") != std::string::npos);
  fs::remove(dir / "judge_prompt.txt");
  REQUIRE_THROWS_AS(PromptTemplates::load(dir.path()), ConfigError);
}

TEST_CASE("render substitutes placeholders and rejects unknown ones") {
  REQUIRE(render("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
  REQUIRE_THROWS_AS(render("{{z}}", {}), ConfigError);
  REQUIRE_THROWS_AS(render("{{z", {{"z", "1"}}), ConfigError);
}

TEST_CASE("transcript integrity flags orphan and duplicate replies") {
  EpisodeTranscript t;
  t.messages = {Message::system("s"), Message::user("u"),
                Message::assistant("", {ToolCall{"c1", "lean_write_file", json::object()}}),
                Message::tool("c1", "{}")};
  t.steps = 1;
  REQUIRE(transcript_problems(t).empty());
  t.messages.push_back(Message::tool("c1", "{}"));
  REQUIRE_FALSE(transcript_problems(t).empty());
  t.messages.pop_back();
  t.messages.push_back(Message::tool("nope", "{}"));
  REQUIRE_FALSE(transcript_problems(t).empty());
  t.messages.pop_back();
  t.steps = 2;
  REQUIRE_FALSE(transcript_problems(t).empty());
}

TEST_CASE("assistant messages need content or calls with unique ids") {
  REQUIRE_THROWS_AS(validate_assistant_message(Message::assistant("")), ValidationError);
  REQUIRE_NOTHROW(validate_assistant_message(Message::assistant("x")));
  REQUIRE_THROWS_AS(validate_assistant_message(Message::assistant(
                        "", {ToolCall{"a", "t", json::object()}, ToolCall{"a", "t", json::object()}})),
                    ValidationError);
}

TEST_CASE("run records validate their invariants and round-trip through JSON") {
  auto r = testing::make_run("t1", "111");
  r.verdicts["p"] = testing::verdict("p", 10);
  r.faithful_primary = true;
  REQUIRE_NOTHROW(validate_record(r));
  REQUIRE(json(r).get<RunRecord>() == r);

  auto bad = r;
  bad.compile_pass = false;
  REQUIRE_THROWS_AS(validate_record(bad), ValidationError);
  bad = r;
  bad.faithful_consensus = true;
  bad.faithful_primary = false;
  REQUIRE_THROWS_AS(validate_record(bad), ValidationError);
  bad = r;
  bad.steps_used = 25;
  REQUIRE_THROWS_AS(validate_record(bad), ValidationError);
  bad = r;
  bad.verdicts["p"].grade = 11;
  REQUIRE_THROWS_AS(validate_record(bad), ValidationError);
}

TEST_CASE("fixed-point rendering rounds the exact value") {
  REQUIRE(format_fixed(Rational(323125, 10000), 1) == "32.3");
  REQUIRE(format_fixed(Rational(-11125, 1000), 1) == "-11.1");
  REQUIRE(format_fixed(Rational(125, 100), 1) == "1.3");
  REQUIRE(format_fixed(Rational(-1, 1000), 2) == "0.00");
  REQUIRE(format_fixed(Rational(5, 1), 0) == "5");
  REQUIRE(format_fixed(Rational(1, 20), 2) == "0.05");
  REQUIRE(format_signed(Rational(9375, 10000), 1) == "+0.9");
}

TEST_CASE("csv rows survive quoting") {
  std::ostringstream out;
  csv::write_row(out, {"a", "b,c", "say \"hi\"", "two\nlines"});
  std::istringstream in(out.str());
  const auto rows = csv::read_all(in);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0] == std::vector<std::string>{"a", "b,c", "say \"hi\"", "two\nlines"});
}
