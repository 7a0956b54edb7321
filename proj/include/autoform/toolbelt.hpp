#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "autoform/compiler.hpp"
#include "autoform/core.hpp"
#include "autoform/error.hpp"
#include "autoform/message.hpp"
#include "autoform/services.hpp"
#include "autoform/symbol_index.hpp"
#include "autoform/tool_types.hpp"
#include "autoform/workspace.hpp"

namespace autoform {

namespace tools {
inline constexpr std::string_view kTranslator = "lean4_translator";
inline constexpr std::string_view kWriteFile = "lean_write_file";
inline constexpr std::string_view kRepl = "lean4_repl_runner";
inline constexpr std::string_view kInspect = "lean_inspect_name";
inline constexpr std::string_view kResolve = "lean_resolve_name";
inline constexpr std::string_view kSearch = "search_online";

inline const std::vector<std::string>& all_names() {
  static const std::vector<std::string> names = {std::string(kTranslator), std::string(kWriteFile),
                                                 std::string(kRepl),       std::string(kInspect),
                                                 std::string(kResolve),    std::string(kSearch)};
  return names;
}
}  // namespace tools

/// Tools exposed under a configuration, in prompt order. T adds the drafter,
/// F the compiler, S the three symbol/search tools; file writing comes with
/// every agent configuration and is absent only from the 000 baseline.
inline std::vector<std::string> active_tool_names(const ToolConfig& c) {
  std::vector<std::string> out;
  if (c.is_baseline()) return out;
  if (c.t) out.emplace_back(tools::kTranslator);
  out.emplace_back(tools::kWriteFile);
  if (c.f) out.emplace_back(tools::kRepl);
  if (c.s) {
    out.emplace_back(tools::kInspect);
    out.emplace_back(tools::kResolve);
    out.emplace_back(tools::kSearch);
  }
  return out;
}

inline ToolSpec tool_spec(std::string_view name) {
  if (name == tools::kTranslator) {
    return {std::string(name),
            "Draft a Lean 4 statement using the fine-tuned Herald translator (you may edit or ignore).",
            {{"statement", "string", "Natural-language statement to translate.", true}}};
  }
  if (name == tools::kWriteFile) {
    return {std::string(name),
            "Write the full Lean file to the workspace (imports + exactly one final statement).",
            {{"path", "string", "Workspace-relative file path; defaults to the episode file.", false},
             {"content", "string", "Complete Lean source. `code` is accepted as an alias.", true}}};
  }
  if (name == tools::kRepl) {
    return {std::string(name), "Compile the current Lean file and return compiler feedback.",
            {{"path", "string", "Workspace-relative file to compile; defaults to the episode file.", false},
             {"code", "string", "Inline Lean 4 code to compile instead of a file.", false}}};
  }
  if (name == tools::kInspect) {
    return {std::string(name), "Query Mathlib about an identifier via #check/#print.",
            {{"name", "string", "Fully qualified identifier.", true},
             {"imports", "array", "Modules to import; defaults to Mathlib.", false},
             {"include_print", "boolean", "Also return the definition via #print.", false}}};
  }
  if (name == tools::kResolve) {
    return {std::string(name), "Suggest likely Mathlib identifiers for an unknown or ambiguous token.",
            {{"token", "string", "Unknown or misspelled identifier.", true},
             {"namespace_hints", "array", "Namespaces to prefer.", false},
             {"imports", "array", "Modules to import; defaults to Mathlib.", false},
             {"top_k", "integer", "Maximum number of candidates.", false}}};
  }
  if (name == tools::kSearch) {
    return {std::string(name), "Run a web search and return results for the query.",
            {{"query", "string", "Search query.", true}}};
  }
  throw ValidationError("unknown tool '" + std::string(name) + "'");
}

inline std::vector<ToolSpec> tool_specs(const ToolConfig& c) {
  std::vector<ToolSpec> out;
  for (const auto& n : active_tool_names(c)) out.push_back(tool_spec(n));
  return out;
}

// ---------------------------------------------------------------------------
// Individual tools. Precondition violations throw ValidationError; the
// Toolbelt turns those into error outcomes for the model.

inline ToolOutcome lean_write_file(const Workspace& ws, const std::string& path,
                                   const std::string& content) {
  const std::size_t bytes = ws.write(path, content);
  return ToolOutcome::success(json{{"path", path}, {"bytes", bytes}}.dump());
}

inline CompilerReport lean_repl_run(const Workspace& ws, Compiler& compiler,
                                    const std::string& path) {
  if (!ws.exists(path)) throw ValidationError("file '" + path + "' does not exist");
  return compiler.compile(ws.read(path));
}

inline bool plausible_identifier(std::string_view s) {
  static const std::regex re(R"(^@?[^\s#"(){}\[\],;:@]+$)");
  return !s.empty() && s.size() < 512 && std::regex_match(s.begin(), s.end(), re);
}

inline std::string probe_header(const std::vector<std::string>& imports) {
  std::string out;
  if (imports.empty()) {
    out = "import Mathlib\n";
  } else {
    for (const auto& m : imports) {
      if (!plausible_identifier(m) || m.front() == '@') {
        throw ValidationError("'" + m + "' is not a module name");
      }
      out += "import " + m + "\n";
    }
  }
  return out + "\n";
}

/// Runs a probe file with #check (and optionally #print) through the
/// compiler. Payload: {"name","exists","type","definition"?,"snapshot_id"}.
inline ToolOutcome lean_inspect_name(Compiler& compiler, const std::string& name,
                                     const std::vector<std::string>& imports = {},
                                     bool include_print = false) {
  if (!plausible_identifier(name)) {
    throw ValidationError("'" + name + "' is not a plausible identifier");
  }
  const std::string bare = name.front() == '@' ? name.substr(1) : name;
  std::string src = probe_header(imports);
  const int header_lines = static_cast<int>(std::count(src.begin(), src.end(), '\n'));
  const int check_line = header_lines + 1;
  const int print_line = header_lines + 2;
  src += "#check @" + bare + "\n";
  if (include_print) src += "#print " + bare + "\n";

  const CompilerReport r = compiler.compile(src);
  json payload{{"name", bare}, {"exists", !r.has_errors()}, {"snapshot_id", r.snapshot_id}};
  std::string type, definition;
  for (const auto& m : r.messages) {
    if (m.severity != Severity::Info || !m.pos) continue;
    if (m.pos->line == check_line) {
      const auto sep = m.message.find(" : ");
      type = sep == std::string::npos ? m.message : m.message.substr(sep + 3);
    } else if (m.pos->line == print_line) {
      definition = m.message;
    }
  }
  payload["type"] = type;
  if (include_print) payload["definition"] = definition;
  // A missing symbol is an answer, not a tool failure.
  std::vector<Diagnostic> diags;
  for (const auto& m : r.messages) {
    if (m.severity != Severity::Info) diags.push_back(m);
  }
  return ToolOutcome::success(payload.dump(), std::move(diags));
}

inline std::vector<ResolveCandidate> lean_resolve_name(const SymbolTable& index,
                                                       const std::string& token,
                                                       const std::vector<std::string>& hints,
                                                       std::size_t top_k) {
  return rank_symbols(index, token, hints, top_k);
}

inline ToolOutcome herald_translate(Drafter& drafter, const std::string& statement) {
  if (statement.empty()) throw ValidationError("statement must be non-empty");
  return drafter.translate(statement);
}

inline ToolOutcome search_online(SearchProvider& provider, const std::string& query) {
  if (query.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ValidationError("query must be non-empty");
  }
  return provider.search(query);
}

struct ToolbeltBackends {
  std::shared_ptr<Compiler> compiler;
  std::shared_ptr<const SymbolTable> index;
  std::shared_ptr<Drafter> drafter;
  std::shared_ptr<SearchProvider> search;
};

struct ToolbeltOptions {
  std::string default_path = "Main.lean";
  std::size_t default_top_k = 5;
};

/// The tool registry one episode talks to. Exposes exactly the tools of its
/// configuration and never throws for model mistakes: inactive tools,
/// malformed arguments and precondition failures come back as error outcomes.
/// Configuration problems and replay misses do propagate.
class Toolbelt {
 public:
  Toolbelt(ToolConfig config, Workspace workspace, ToolbeltBackends backends,
           ToolbeltOptions options = {})
      : config_(config),
        ws_(std::move(workspace)),
        be_(std::move(backends)),
        opts_(std::move(options)),
        active_(active_tool_names(config)) {
    for (const auto& n : active_) {
      if (n == tools::kRepl && !be_.compiler) throw ConfigError("F active but no compiler backend");
      if (n == tools::kInspect && !be_.compiler) throw ConfigError("S active but no compiler backend");
      if (n == tools::kResolve && !be_.index) throw ConfigError("S active but no symbol index");
      if (n == tools::kTranslator && !be_.drafter) throw ConfigError("T active but no drafter");
      if (n == tools::kSearch && !be_.search) throw ConfigError("S active but no search provider");
    }
  }

  const ToolConfig& config() const { return config_; }
  const Workspace& workspace() const { return ws_; }
  const std::vector<std::string>& active() const { return active_; }
  std::vector<ToolSpec> specs() const { return tool_specs(config_); }

  bool is_active(std::string_view name) const {
    return std::find(active_.begin(), active_.end(), name) != active_.end();
  }

  const std::optional<std::string>& last_written() const { return last_written_; }
  const std::optional<CompilerReport>& last_compile() const { return last_compile_; }
  bool written_since_last_compile() const { return dirty_; }

  ToolOutcome execute(const ToolCall& call) {
    if (!is_active(call.name)) {
      return ToolOutcome::failure("tool '" + call.name +
                                  "' is not available in this configuration");
    }
    try {
      return dispatch(call);
    } catch (const json::exception& e) {
      return ToolOutcome::failure("malformed arguments for " + call.name + ": " + e.what());
    } catch (const ValidationError& e) {
      return ToolOutcome::failure(e.what());
    } catch (const StorageError& e) {
      return ToolOutcome::failure(e.what());
    }
  }

 private:
  static std::string str_arg(const json& args, const char* key) {
    if (!args.contains(key)) throw ValidationError(std::string("missing argument '") + key + "'");
    if (!args[key].is_string()) throw ValidationError(std::string("argument '") + key + "' must be a string");
    return args[key].get<std::string>();
  }

  static std::vector<std::string> list_arg(const json& args, const char* key) {
    if (!args.contains(key) || args[key].is_null()) return {};
    if (args[key].is_string()) return {args[key].get<std::string>()};
    return args[key].get<std::vector<std::string>>();
  }

  ToolOutcome dispatch(const ToolCall& call) {
    const json& a = call.arguments;
    if (!a.is_object()) throw ValidationError("arguments must be a JSON object");

    if (call.name == tools::kWriteFile) {
      const std::string path = a.contains("path") ? str_arg(a, "path") : opts_.default_path;
      const std::string content = a.contains("content") ? str_arg(a, "content") : str_arg(a, "code");
      ToolOutcome o = lean_write_file(ws_, path, content);
      last_written_ = content;
      last_written_path_ = path;
      dirty_ = true;
      return o;
    }
    if (call.name == tools::kRepl) {
      CompilerReport r;
      if (a.contains("path") || !a.contains("code")) {
        const std::string path =
            a.contains("path") ? str_arg(a, "path") : last_written_path_.value_or(opts_.default_path);
        r = lean_repl_run(ws_, *be_.compiler, path);
        dirty_ = false;
      } else {
        r = be_.compiler->compile(str_arg(a, "code"));
      }
      last_compile_ = r;
      return to_outcome(r);
    }
    if (call.name == tools::kInspect) {
      const bool include_print = a.contains("include_print") && a["include_print"].get<bool>();
      return lean_inspect_name(*be_.compiler, str_arg(a, "name"), list_arg(a, "imports"),
                               include_print);
    }
    if (call.name == tools::kResolve) {
      std::size_t top_k = opts_.default_top_k;
      if (a.contains("top_k")) {
        const auto k = a["top_k"].get<long long>();
        if (k < 1) throw ValidationError("top_k must be a positive integer");
        top_k = static_cast<std::size_t>(k);
      }
      auto cands = lean_resolve_name(*be_.index, str_arg(a, "token"), list_arg(a, "namespace_hints"),
                                     top_k);
      json arr = json::array();
      for (const auto& c : cands) {
        arr.push_back(json{{"name", c.name}, {"type", c.type}, {"score", c.score}});
      }
      return ToolOutcome::success(json{{"candidates", arr}}.dump());
    }
    if (call.name == tools::kTranslator) {
      return herald_translate(*be_.drafter, str_arg(a, "statement"));
    }
    if (call.name == tools::kSearch) {
      return search_online(*be_.search, str_arg(a, "query"));
    }
    return ToolOutcome::failure("unknown tool '" + call.name + "'");
  }

  ToolConfig config_;
  Workspace ws_;
  ToolbeltBackends be_;
  ToolbeltOptions opts_;
  std::vector<std::string> active_;
  std::optional<std::string> last_written_;
  std::optional<std::string> last_written_path_;
  std::optional<CompilerReport> last_compile_;
  bool dirty_ = false;
};

}  // namespace autoform
