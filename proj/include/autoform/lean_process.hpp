#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "autoform/compiler.hpp"
#include "autoform/error.hpp"
#include "autoform/hash.hpp"
#include "autoform/subprocess.hpp"

namespace autoform {

namespace fs = std::filesystem;

struct LeanProcessOptions {
  fs::path project_dir;  // a Lake project with the pinned library as dependency
  std::vector<std::string> command = {"lake", "env", "lean"};
  std::string snapshot_id;  // e.g. "mathlib@<rev>"; required
  std::chrono::milliseconds timeout{120'000};
};

/// Parses `file:line:col: severity: message` blocks. Lines that do not open a
/// new diagnostic continue the previous message.
inline std::vector<Diagnostic> parse_lean_output(const std::string& output) {
  static const std::regex head(R"(^.*?:(\d+):(\d+): (error|warning|info|information): ?(.*)$)");
  std::vector<Diagnostic> out;
  std::istringstream in(output);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, head)) {
      out.push_back({parse_severity(m[3].str()), m[4].str(),
                     SourcePos{std::stoi(m[1].str()), std::stoi(m[2].str())}});
    } else if (!out.empty()) {
      out.back().message += "\n" + line;
    } else if (!line.empty()) {
      out.push_back({Severity::Error, line, std::nullopt});
    }
  }
  return out;
}

/// Live backend: elaborates each request with the pinned toolchain in a
/// fresh process. Content goes to a scratch file inside the project.
class LeanProcessCompiler final : public Compiler {
 public:
  explicit LeanProcessCompiler(LeanProcessOptions opts) : opts_(std::move(opts)) {
    if (opts_.snapshot_id.empty()) throw ConfigError("live compiler needs a snapshot id");
    if (!fs::is_directory(opts_.project_dir)) {
      throw ConfigError("lean project directory " + opts_.project_dir.string() + " not found");
    }
    scratch_ = opts_.project_dir / ".autoform_scratch";
    fs::create_directories(scratch_);
  }

  std::string snapshot_id() const override { return opts_.snapshot_id; }

  CompilerReport compile(std::string_view source) override {
    const fs::path file = scratch_ / ("probe_" + std::to_string(::getpid()) + "_" +
                                      std::to_string(counter_++) + ".lean");
    {
      std::ofstream out(file, std::ios::binary | std::ios::trunc);
      if (!out) throw ConfigError("cannot write scratch file " + file.string());
      out.write(source.data(), static_cast<std::streamsize>(source.size()));
    }
    std::vector<std::string> argv = opts_.command;
    argv.push_back(file.string());
    ProcessResult pr;
    try {
      pr = run_process(argv, opts_.project_dir, opts_.timeout);
    } catch (...) {
      std::error_code ec;
      fs::remove(file, ec);
      throw;
    }
    std::error_code ec;
    fs::remove(file, ec);

    CompilerReport r;
    r.snapshot_id = opts_.snapshot_id;
    r.elapsed_ms = pr.elapsed_ms;
    if (pr.timed_out) {
      r.timed_out = true;
      r.messages.push_back({Severity::Error,
                            "compilation timed out after " +
                                std::to_string(opts_.timeout.count() / 1000) + " s",
                            std::nullopt});
      r.success = false;
      return r;
    }
    if (pr.exit_code == 127 && pr.output.find("not found") != std::string::npos) {
      throw ConfigError("toolchain command failed: " + pr.output);
    }
    r.messages = parse_lean_output(pr.output);
    // An empty file elaborates without error in Lean, but is never a statement.
    if (detail::trim(source).empty()) {
      r.messages.push_back({Severity::Error, "empty file", SourcePos{1, 0}});
    }
    r.success = pr.exit_code == 0 && !r.has_errors();
    if (!r.success && !r.has_errors()) {
      r.messages.push_back({Severity::Error,
                            "compiler exited with status " + std::to_string(pr.exit_code),
                            std::nullopt});
    }
    return r;
  }

 private:
  LeanProcessOptions opts_;
  fs::path scratch_;
  std::atomic<std::uint64_t> counter_{0};
};

}  // namespace autoform
