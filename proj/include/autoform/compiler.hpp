#pragma once

#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "autoform/error.hpp"
#include "autoform/hash.hpp"
#include "autoform/symbol_index.hpp"
#include "autoform/tool_types.hpp"

namespace autoform {

/// One full elaboration of a source file against a pinned library snapshot.
/// Implementations throw ConfigError when the toolchain itself is unusable;
/// a file that does not elaborate is a normal report with success=false.
class Compiler {
 public:
  virtual ~Compiler() = default;
  virtual CompilerReport compile(std::string_view source) = 0;
  virtual std::string snapshot_id() const = 0;
};

namespace detail {

// Blank out comments, keeping newlines so positions survive.
inline std::string strip_lean_comments(std::string_view src) {
  std::string out(src);
  std::size_t i = 0;
  int block_depth = 0;
  while (i < out.size()) {
    if (block_depth > 0) {
      if (out.compare(i, 2, "-/") == 0) {
        out[i] = out[i + 1] = ' ';
        --block_depth;
        i += 2;
      } else if (out.compare(i, 2, "/-") == 0) {
        out[i] = out[i + 1] = ' ';
        ++block_depth;
        i += 2;
      } else {
        if (out[i] != '\n') out[i] = ' ';
        ++i;
      }
    } else if (out.compare(i, 2, "/-") == 0) {
      out[i] = out[i + 1] = ' ';
      ++block_depth;
      i += 2;
    } else if (out.compare(i, 2, "--") == 0) {
      while (i < out.size() && out[i] != '\n') out[i++] = ' ';
    } else {
      ++i;
    }
  }
  return out;
}

inline bool is_ident_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '\'' || c == '.' || c >= 0x80;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Token {
  std::string text;
  int line;    // 1-based
  int column;  // 0-based, as Lean reports
};

inline std::vector<Token> identifier_tokens(std::string_view text) {
  std::vector<Token> out;
  int line = 1, col = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '\n') {
      ++line;
      col = 0;
      ++i;
      continue;
    }
    if (c == '"') {  // skip string literals
      ++i;
      ++col;
      while (i < text.size() && text[i] != '"') {
        if (text[i] == '\n') {
          ++line;
          col = 0;
        } else {
          ++col;
        }
        ++i;
      }
      ++i;
      ++col;
      continue;
    }
    if (is_ident_char(c) && c != '.' && c != '\'') {
      const std::size_t start = i;
      const int start_col = col;
      while (i < text.size() && is_ident_char(static_cast<unsigned char>(text[i]))) {
        ++i;
        ++col;
      }
      std::string tok(text.substr(start, i - start));
      while (!tok.empty() && tok.back() == '.') tok.pop_back();
      out.push_back({std::move(tok), line, start_col});
      continue;
    }
    ++i;
    ++col;
  }
  return out;
}

}  // namespace detail

/// Miniature validator for desk-scale runs. Rules:
///   1. the first non-blank line is `import Mathlib`;
///   2. a statement file holds exactly one `theorem`/`lemma` and ends with
///      `:= by sorry` (files carrying #check/#print directives are probes and
///      are exempt);
///   3. every qualified reference `Upper.name` is in the symbol table.
/// #check and #print directives answer from the table as info messages.
class StubChecker final : public Compiler {
 public:
  explicit StubChecker(SymbolTable table, std::string snapshot = "stub-mathlib-0")
      : table_(std::move(table)), snapshot_(std::move(snapshot)) {}

  std::string snapshot_id() const override { return snapshot_; }
  const SymbolTable& table() const { return table_; }

  CompilerReport compile(std::string_view source) override {
    const auto started = std::chrono::steady_clock::now();
    CompilerReport r;
    r.snapshot_id = snapshot_;
    const std::string text = detail::strip_lean_comments(source);
    auto err = [&](std::string msg, int line, int col) {
      r.messages.push_back({Severity::Error, std::move(msg), SourcePos{line, col}});
    };

    // Split into lines once.
    std::vector<std::string_view> lines;
    {
      std::size_t start = 0;
      while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        lines.emplace_back(text.data() + start, nl - start);
        start = nl + 1;
      }
    }

    // Rule 1.
    int first = -1;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (!detail::trim(lines[i]).empty()) {
        first = static_cast<int>(i);
        break;
      }
    }
    if (first < 0) {
      err("empty file: expected `import Mathlib` followed by one theorem", 1, 0);
      return finish(std::move(r), started);
    }
    if (detail::trim(lines[first]) != "import Mathlib") {
      err("file must start with `import Mathlib`", first + 1, 0);
    }

    // Directives.
    bool probe = false;
    std::string body;  // text with directive lines and imports blanked
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string_view t = detail::trim(lines[i]);
      const bool is_check = t.rfind("#check", 0) == 0;
      const bool is_print = t.rfind("#print", 0) == 0;
      if (is_check || is_print) {
        probe = true;
        std::string_view name = detail::trim(t.substr(6));
        if (!name.empty() && name.front() == '@') name.remove_prefix(1);
        const int line = static_cast<int>(i) + 1;
        if (const SymbolInfo* info = table_.find(name)) {
          std::string msg;
          if (is_check) {
            msg = std::string(name) + " : " + info->type;
          } else {
            msg = info->definition.empty() ? std::string(name) + " : " + info->type
                                           : info->definition;
          }
          r.messages.push_back({Severity::Info, std::move(msg), SourcePos{line, 0}});
        } else {
          err(std::string(is_check ? "unknown identifier '" : "unknown constant '") +
                  std::string(name) + "'",
              line, 7);
        }
        body.append(lines[i].size(), ' ');
      } else if (t.rfind("import ", 0) == 0) {
        body.append(lines[i].size(), ' ');
      } else {
        body.append(lines[i]);
      }
      body.push_back('\n');
    }

    // Rule 2.
    const auto tokens = detail::identifier_tokens(body);
    std::vector<std::size_t> decls;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (tokens[k].text == "theorem" || tokens[k].text == "lemma") decls.push_back(k);
    }
    if (!probe) {
      if (decls.empty()) {
        err("expected exactly one theorem declaration, found none", first + 1, 0);
      } else if (decls.size() > 1) {
        const auto& extra = tokens[decls[1]];
        err("expected exactly one theorem declaration, found " + std::to_string(decls.size()),
            extra.line, extra.column);
      }
      std::string_view trimmed = detail::trim(text);
      constexpr std::string_view kTail = ":= by sorry";
      if (trimmed.size() < kTail.size() ||
          trimmed.substr(trimmed.size() - kTail.size()) != kTail) {
        err("the statement must end with `:= by sorry`", static_cast<int>(lines.size()), 0);
      }
    }

    // Rule 3.
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      const auto& tok = tokens[k];
      if (k > 0 && (tokens[k - 1].text == "theorem" || tokens[k - 1].text == "lemma")) continue;
      if (tok.text.find('.') == std::string::npos) continue;
      const unsigned char head = static_cast<unsigned char>(tok.text.front());
      if (!(head >= 'A' && head <= 'Z')) continue;
      if (!table_.contains(tok.text)) {
        err("unknown identifier '" + tok.text + "'", tok.line, tok.column);
      }
    }

    if (!r.has_errors() && !decls.empty()) {
      const auto& d = tokens[decls.front()];
      r.messages.push_back(
          {Severity::Warning, "declaration uses 'sorry'", SourcePos{d.line, d.column}});
    }
    return finish(std::move(r), started);
  }

 private:
  static CompilerReport finish(CompilerReport r, std::chrono::steady_clock::time_point started) {
    r.success = !r.has_errors();
    r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    return r;
  }

  SymbolTable table_;
  std::string snapshot_;
};

/// Memoizes reports by (content hash, snapshot id). A cached report is only
/// reused when both match.
class CachingCompiler final : public Compiler {
 public:
  explicit CachingCompiler(std::shared_ptr<Compiler> inner) : inner_(std::move(inner)) {}

  std::string snapshot_id() const override { return inner_->snapshot_id(); }

  CompilerReport compile(std::string_view source) override {
    const auto key = std::make_pair(sha256_hex(source), inner_->snapshot_id());
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    CompilerReport r = inner_->compile(source);
    // Timeouts say nothing about the content; do not pin them.
    if (!r.timed_out) {
      std::lock_guard lock(mu_);
      cache_.emplace(key, r);
    }
    return r;
  }

  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }

 private:
  std::shared_ptr<Compiler> inner_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, CompilerReport> cache_;
  std::size_t hits_ = 0;
};

/// A fixed set of compiler sessions; each serves one request at a time.
class CompilerPool final : public Compiler {
 public:
  explicit CompilerPool(std::vector<std::unique_ptr<Compiler>> sessions)
      : sessions_(std::move(sessions)) {
    if (sessions_.empty()) throw ConfigError("compiler pool needs at least one session");
    for (const auto& s : sessions_) {
      if (s->snapshot_id() != sessions_.front()->snapshot_id()) {
        throw ConfigError("compiler sessions disagree on the library snapshot");
      }
    }
    for (std::size_t i = 0; i < sessions_.size(); ++i) free_.push_back(i);
  }

  std::size_t size() const { return sessions_.size(); }
  std::string snapshot_id() const override { return sessions_.front()->snapshot_id(); }

  CompilerReport compile(std::string_view source) override {
    std::size_t slot;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return !free_.empty(); });
      slot = free_.back();
      free_.pop_back();
    }
    struct Release {
      CompilerPool* pool;
      std::size_t slot;
      ~Release() {
        {
          std::lock_guard lock(pool->mu_);
          pool->free_.push_back(slot);
        }
        pool->cv_.notify_one();
      }
    } release{this, slot};
    return sessions_[slot]->compile(source);
  }

 private:
  std::vector<std::unique_ptr<Compiler>> sessions_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::size_t> free_;
};

}  // namespace autoform
