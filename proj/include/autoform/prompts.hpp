#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "autoform/core.hpp"
#include "autoform/error.hpp"
#include "autoform/toolbelt.hpp"

namespace autoform {

namespace fs = std::filesystem;

namespace defaults {

inline constexpr std::string_view kBasePrompt = R"(You are an expert Lean4 translation agent.

Your task is to translate a natural-language mathematical statement into
faithful Lean4 syntax (NOT a proof).
The final result must:
- import Mathlib at the very top
- compile in Mathlib
- be semantically faithful to the original statement
- end with `:= by sorry`

You are NOT proving anything.
You are only producing a correctly typed, correct-meaning Lean statement.

GENERAL INSTRUCTIONS FOR CODE GENERATION

• The Lean file MUST start with:
  import Mathlib

• The Lean file MUST contain exactly ONE final translated statement
  representing the original natural-language meaning.

• The final statement MUST end with:
  := by sorry

• Do NOT write any proof code before `:= by sorry`
  (no `by`, `simp`, `have`, `calc`, etc. anywhere before the final `:= by sorry`).

• Do NOT invent new definitions, axioms, constants, or placeholder structures.

• Prefer robust formulations:
  use quantifiers, membership, and ↔ characterizations rather than fragile definitional equalities.

• Only finish when the last written version:
  (1) compiles in Mathlib (if lean4_repl_runner is available)
  (2) is semantically faithful to the original statement

When both are satisfied, return:
{ "status": "success" }
)";

inline constexpr std::string_view kToolBlockHeader = "AVAILABLE TOOLS\n";

inline const std::map<std::string, std::string, std::less<>>& tool_entries() {
  static const std::map<std::string, std::string, std::less<>> entries = {
      {"lean4_translator",
       "lean4_translator(statement)\n"
       "  Draft a Lean 4 statement using the fine-tuned Herald translator (you may edit or ignore).\n"},
      {"lean_write_file",
       "lean_write_file(code)\n"
       "  Write the full Lean file to the workspace (imports + exactly one final statement).\n"},
      {"lean4_repl_runner",
       "lean4_repl_runner()\n"
       "  Compile the current Lean file and return compiler feedback.\n"},
      {"lean_inspect_name",
       "lean_inspect_name(name, imports?, include_print?)\n"
       "  Query Mathlib about an identifier via #check/#print.\n"},
      {"lean_resolve_name",
       "lean_resolve_name(token, namespace_hints?, imports?, top_k?)\n"
       "  Suggest likely Mathlib identifiers for an unknown or ambiguous token.\n"},
      {"search_online",
       "search_online(query)\n"
       "  Run a web search and return results for the query.\n"},
  };
  return entries;
}

inline constexpr std::string_view kUserMessage = R"(Translate the following natural-language statement into a Lean 4 theorem declaration.

Theorem id: {{id}}
Domain: {{domain}}
Workspace file: {{file}}

Statement:
{{statement}}
)";

inline constexpr std::string_view kOneShotUserMessage = R"(Translate the following natural-language statement into a Lean 4 theorem declaration.

Theorem id: {{id}}
Domain: {{domain}}

Statement:
{{statement}}

Reply with the complete Lean file in a single fenced ```lean code block.
)";

inline constexpr std::string_view kJudgePrompt = R"(You are an expert in Lean 4, Mathlib, and mathematics. You are judging TRANSLATION-ONLY.

Input: (1) a natural-language statement, (2) a Lean 4 code snippet, (3) compile_pass boolean.
Your job: decide whether the Lean code, AS A STATEMENT, matches the meaning of the natural-language statement.

Key policy (NOT PICKY):
- If compile_pass = False: the translation is NOT faithful. grade must be 0..3. faithful=false.
- If compile_pass = True: ignore the proof/body entirely (including `by sorry`). Proof completeness is NOT part of the evaluation.
- A translation is faithful if the Lean statement expresses the same mathematical claim as the NL statement.

Auxiliary definitions policy (lenient but not allowing cheating):
- Auxiliary defs/lemmas are allowed if they are reasonable encodings/abbreviations and do not change the meaning.
- However, if the code introduces a clearly vacuous placeholder for a nontrivial concept (e.g. `def X := True`, `:= none`, `:= 0` for something meant to be meaningful), and that placeholder is essential to making the final theorem appear to match, then the translation is NOT faithful.

How to judge meaning (focus):
- Compare the MAIN theorem/definition statement(s) to the NL statement.
- Check quantifiers (forall/exists), logical structure (->/<->/and/or), and key hypotheses.
- Check main objects/domains: Nat/Int/Real, rings/groups, ZMod n, matrices, etc.
- Small implementation details are OK if the meaning is preserved.

Scoring guide (integer 0..10):
- 0: unrelated.
- 1-3: compile_pass is False OR statement is clearly wrong.
- 4-6: compiles, but meaning is materially different / missing key hypotheses / wrong domain;
       might be "in the ballpark".

- 7-8: compiles, mostly matches, but has a noticeable mismatch (e.g. strengthened/weakened in an important way).
- 9: compiles, very close; only tiny mismatch.
- 10: compiles and meaning matches.

Output contract (STRICT):
Return a single JSON object with exactly these fields:
{
  "faithful": true or false,
  "grade": 0..10,
  "thought": "### BEGIN THOUGHT\n<short explanation focusing on statement-level comparison>\n### END THOUGHT"
}
Return ONLY valid JSON. No extra keys. No markdown outside JSON.
)";

inline constexpr std::string_view kJudgeUserMessage = R"(Natural-language statement:
{{statement}}

Lean 4 code:
{{code}}

compile_pass: {{compile_pass}}
)";

}  // namespace defaults

/// Every prompt text the harness sends. Loadable from a directory so the
/// exact wording can be audited and edited without rebuilding:
///   base_prompt.txt, tool_block_header.txt, tools/<tool>.txt,
///   user_message.txt, one_shot_user_message.txt,
///   judge_prompt.txt, judge_user_message.txt
struct PromptTemplates {
  std::string base_prompt;
  std::string tool_block_header;
  std::map<std::string, std::string, std::less<>> tool_entries;
  std::string user_message;
  std::string one_shot_user_message;
  std::string judge_prompt;
  std::string judge_user_message;

  static PromptTemplates builtin() {
    PromptTemplates t;
    t.base_prompt = defaults::kBasePrompt;
    t.tool_block_header = defaults::kToolBlockHeader;
    t.tool_entries = defaults::tool_entries();
    t.user_message = defaults::kUserMessage;
    t.one_shot_user_message = defaults::kOneShotUserMessage;
    t.judge_prompt = defaults::kJudgePrompt;
    t.judge_user_message = defaults::kJudgeUserMessage;
    return t;
  }

  static PromptTemplates load(const fs::path& dir) {
    auto slurp = [&](const fs::path& rel) {
      std::ifstream in(dir / rel, std::ios::binary);
      if (!in) throw ConfigError("missing prompt template " + (dir / rel).string());
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    PromptTemplates t;
    t.base_prompt = slurp("base_prompt.txt");
    t.tool_block_header = slurp("tool_block_header.txt");
    for (const auto& name : tools::all_names()) {
      t.tool_entries[name] = slurp(fs::path("tools") / (name + ".txt"));
    }
    t.user_message = slurp("user_message.txt");
    t.one_shot_user_message = slurp("one_shot_user_message.txt");
    t.judge_prompt = slurp("judge_prompt.txt");
    t.judge_user_message = slurp("judge_user_message.txt");
    return t;
  }

  /// Writes the templates in the layout `load` expects.
  void save(const fs::path& dir) const {
    fs::create_directories(dir / "tools");
    auto put = [&](const fs::path& rel, const std::string& text) {
      std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
      out << text;
    };
    put("base_prompt.txt", base_prompt);
    put("tool_block_header.txt", tool_block_header);
    for (const auto& [name, text] : tool_entries) put(fs::path("tools") / (name + ".txt"), text);
    put("user_message.txt", user_message);
    put("one_shot_user_message.txt", one_shot_user_message);
    put("judge_prompt.txt", judge_prompt);
    put("judge_user_message.txt", judge_user_message);
  }

  friend bool operator==(const PromptTemplates&, const PromptTemplates&) = default;
};

/// Replaces each `{{key}}` with its value. Unknown placeholders are an error.
inline std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    const auto close = tmpl.find("}}", open);
    if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in template");
    out.append(tmpl.substr(i, open - i));
    const std::string key(tmpl.substr(open + 2, close - open - 2));
    auto it = vars.find(key);
    if (it == vars.end()) throw ConfigError("template placeholder {{" + key + "}} has no value");
    out.append(it->second);
    i = close + 2;
  }
  return out;
}

/// The capability block for a configuration: the header followed by the
/// entries of the active tools. Empty for the 000 baseline.
inline std::string tool_block(const ToolConfig& config, const PromptTemplates& t) {
  const auto names = active_tool_names(config);
  if (names.empty()) return {};
  std::string out = t.tool_block_header;
  for (const auto& n : names) {
    auto it = t.tool_entries.find(n);
    if (it == t.tool_entries.end()) throw ConfigError("no prompt entry for tool " + n);
    out += "\n" + it->second;
  }
  return out;
}

/// Base prompt, a blank line, then the tool block. Only the part after the
/// base prompt varies between configurations.
inline std::string assemble_prompt(const ToolConfig& config,
                                   const PromptTemplates& t = PromptTemplates::builtin()) {
  return t.base_prompt + "\n" + tool_block(config, t);
}

}  // namespace autoform
