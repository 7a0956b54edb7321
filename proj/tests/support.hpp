#pragma once

#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "autoform/analytics.hpp"
#include "autoform/benchmark_store.hpp"
#include "autoform/factorial.hpp"
#include "autoform/records.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace autoform;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "autoform") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// Faithful (consensus) counts out of 400 per configuration, from the
// reference factorial table, indexed by config code.
inline const std::map<std::string, int>& reference_faithful_counts() {
  static const std::map<std::string, int> m = {{"000", 79},  {"100", 98},  {"001", 132}, {"101", 144},
                                               {"110", 235}, {"111", 242}, {"010", 245}, {"011", 248}};
  return m;
}

inline const std::map<std::string, int>& reference_compile_counts() {
  static const std::map<std::string, int> m = {{"000", 105}, {"100", 121}, {"001", 182}, {"101", 200},
                                               {"110", 374}, {"111", 358}, {"010", 366}, {"011", 349}};
  return m;
}

/// n rows; in column c the first counts[c] rows are 1. Column means equal
/// counts/n exactly.
inline OutcomeTable table_from_counts(const std::map<std::string, int>& faithful, int n,
                                      const std::map<std::string, int>& compile = {}) {
  OutcomeTable t;
  for (int i = 0; i < n; ++i) {
    CellRow out{}, comp{};
    for (const auto& [code, k] : faithful) {
      const auto c = ToolConfig::parse(code);
      out[c.index()] = i < k ? 1 : 0;
      const int kc = compile.count(code) ? compile.at(code) : k;
      comp[c.index()] = i < kc ? 1 : 0;
    }
    t.add_row("t" + std::to_string(i), kAllDomains[static_cast<std::size_t>(i) % 4], out, comp);
  }
  return t;
}

inline OutcomeTable random_table(std::mt19937_64& rng, int n, double p = 0.5) {
  std::bernoulli_distribution b(p);
  OutcomeTable t;
  for (int i = 0; i < n; ++i) {
    CellRow out{}, comp{};
    for (std::size_t c = 0; c < 8; ++c) {
      out[c] = b(rng);
      comp[c] = out[c] ? 1 : static_cast<std::int8_t>(b(rng));
    }
    t.add_row("r" + std::to_string(i), kAllDomains[static_cast<std::size_t>(i) % 4], out, comp);
  }
  return t;
}

// Brute-force oracle: effects written as signed sums over every cell, in
// percentage points, with no use of the library's estimators.
inline double sign(bool level) { return level ? 1.0 : -1.0; }

inline double oracle_main(const OutcomeTable& t, Factor x) {
  double s = 0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) s += sign(ToolConfig::from_index(c).level(x)) * t.outcomes[i][c];
  }
  return 100.0 * s / (4.0 * static_cast<double>(t.rows()));
}

inline double oracle_simple(const OutcomeTable& t, Factor x, Factor y, bool level) {
  double s = 0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) {
      const auto cfg = ToolConfig::from_index(c);
      if (cfg.level(y) != level) continue;
      s += sign(cfg.level(x)) * t.outcomes[i][c];
    }
  }
  return 100.0 * s / (2.0 * static_cast<double>(t.rows()));
}

inline double oracle_interaction(const OutcomeTable& t, Factor x, Factor y) {
  double s = 0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) {
      const auto cfg = ToolConfig::from_index(c);
      s += sign(cfg.level(x)) * sign(cfg.level(y)) * t.outcomes[i][c];
    }
  }
  return 100.0 * s / (2.0 * static_cast<double>(t.rows()));
}

inline RunRecord make_run(const std::string& id, const std::string& code, Domain d = Domain::Algebra,
                          int steps = 1, bool compiled = true, bool primary = false, bool consensus = false) {
  RunRecord r;
  r.theorem_id = id;
  r.domain = d;
  r.config = ToolConfig::parse(code);
  r.orchestrator_id = "orch";
  r.step_budget = 24;
  r.steps_used = steps;
  r.status = EpisodeStatus::Success;
  r.final_code = "import Mathlib\n\ntheorem x : True := by sorry\n";
  r.compile_pass = compiled;
  r.faithful_primary = primary;
  r.faithful_consensus = consensus;
  return r;
}

inline JudgeVerdict verdict(const std::string& judge, int grade) {
  return JudgeVerdict{judge, grade >= 9, grade, "### BEGIN THOUGHT\nok\n### END THOUGHT"};
}

}  // namespace testing
