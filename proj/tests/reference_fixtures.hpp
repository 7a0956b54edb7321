#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "support.hpp"

// Synthetic stores and transcripts shaped to match reference summary tables,
// so the analytics can be checked against the reported numbers.
namespace testing {

struct DomainSpec {
  Domain domain;
  int compiled;
  int faithful;
  int steps_sum;
  int median_lo;  // the two central step counts; equal for an integer median
  int median_hi;
  const char* conditional;  // reported to two places
};

// Per-domain results of the full-tool configuration, 100 theorems each.
inline const std::array<DomainSpec, 4>& reference_domain_specs() {
  static const std::array<DomainSpec, 4> specs = {{
      {Domain::ComplexAnalysis, 95, 82, 688, 5, 5, "0.86"},
      {Domain::RealAnalysis, 89, 49, 984, 7, 8, "0.55"},
      {Domain::Algebra, 87, 56, 983, 6, 7, "0.64"},
      {Domain::Topology, 87, 61, 920, 6, 6, "0.70"},
  }};
  return specs;
}

/// 100 step counts in [1, 24] with the given sum and central pair.
inline std::vector<int> steps_with(int sum, int lo, int hi) {
  std::vector<int> s(100);
  for (int i = 0; i < 50; ++i) s[static_cast<std::size_t>(i)] = lo;
  for (int i = 50; i < 100; ++i) s[static_cast<std::size_t>(i)] = hi;
  int excess = sum - 50 * (lo + hi);
  for (std::size_t i = 99; excess > 0 && i > 50; --i) {
    const int add = std::min(excess, 24 - s[i]);
    s[i] += add;
    excess -= add;
  }
  for (std::size_t i = 0; excess < 0 && i < 49; ++i) {
    const int sub = std::min(-excess, s[i] - 1);
    s[i] -= sub;
    excess += sub;
  }
  return s;
}

/// 400 runs of config 111. The first `faithful` runs of each domain pass
/// both judges, the first `compiled` compile.
inline std::vector<RunRecord> reference_domain_runs() {
  std::vector<RunRecord> runs;
  for (const auto& spec : reference_domain_specs()) {
    const auto steps = steps_with(spec.steps_sum, spec.median_lo, spec.median_hi);
    for (int i = 0; i < 100; ++i) {
      const bool compiled = i < spec.compiled;
      const bool faithful = i < spec.faithful;
      auto r = make_run(std::string(to_string(spec.domain)) + "_" + std::to_string(i), "111", spec.domain,
                        steps[static_cast<std::size_t>(i)], compiled, faithful, faithful);
      r.verdicts["primary"] = verdict("primary", faithful ? 10 : compiled ? 6 : 0);
      runs.push_back(r);
    }
  }
  return runs;
}

struct DomainDeltaSpec {
  Domain domain;
  int low;   // faithful per 100 in each F=0 config
  int high;  // faithful per 100 in each F=1 config
  const char* delta;
};

inline const std::array<DomainDeltaSpec, 4>& reference_domain_deltas() {
  static const std::array<DomainDeltaSpec, 4> specs = {{
      {Domain::ComplexAnalysis, 28, 81, "0.53"},
      {Domain::RealAnalysis, 23, 53, "0.30"},
      {Domain::Algebra, 37, 57, "0.20"},
      {Domain::Topology, 38, 57, "0.19"},
  }};
  return specs;
}

/// 400 theorems by 8 configs where every config at the same F level has the
/// same per-domain faithful count.
inline OutcomeTable reference_domain_delta_table() {
  OutcomeTable t;
  for (const auto& spec : reference_domain_deltas()) {
    for (int i = 0; i < 100; ++i) {
      CellRow out{}, comp{};
      for (const auto& c : all_configs()) {
        out[c.index()] = i < (c.f ? spec.high : spec.low) ? 1 : 0;
        comp[c.index()] = out[c.index()];
      }
      t.add_row(std::string(to_string(spec.domain)) + "_" + std::to_string(i), spec.domain, out, comp);
    }
  }
  return t;
}

struct UsageSpec {
  const char* config;
  int translator;
  int repl;
  int s_total;
};

inline const std::array<UsageSpec, 4>& reference_usage() {
  static const std::array<UsageSpec, 4> specs = {{
      {"010", 0, 1496, 0},
      {"011", 0, 1050, 1726},
      {"110", 257, 1374, 0},
      {"111", 112, 1008, 1913},
  }};
  return specs;
}

/// 96 transcripts per config whose assistant tool calls total the given
/// counts; S calls rotate over inspect, resolve and search.
inline std::map<ToolConfig, std::vector<EpisodeTranscript>> reference_usage_transcripts() {
  std::map<ToolConfig, std::vector<EpisodeTranscript>> out;
  constexpr int kPerConfig = 96;
  for (const auto& spec : reference_usage()) {
    const auto cfg = ToolConfig::parse(spec.config);
    std::vector<EpisodeTranscript> ts(kPerConfig);
    for (auto& t : ts) t.messages = {Message::system("s"), Message::user("u")};
    int call_no = 0;
    auto add = [&](int count, auto name_of) {
      for (int k = 0; k < count; ++k) {
        auto& t = ts[static_cast<std::size_t>(k % kPerConfig)];
        const std::string id = "c" + std::to_string(call_no++);
        t.messages.push_back(Message::assistant("", {ToolCall{id, name_of(k), json::object()}}));
        t.messages.push_back(Message::tool(id, "{}"));
        ++t.steps;
      }
    };
    add(spec.translator, [](int) { return std::string("lean4_translator"); });
    add(spec.repl, [](int) { return std::string("lean4_repl_runner"); });
    add(spec.s_total, [](int k) {
      static const std::array<std::string, 3> names = {"lean_inspect_name", "lean_resolve_name", "search_online"};
      return names[static_cast<std::size_t>(k % 3)];
    });
    out[cfg] = std::move(ts);
  }
  return out;
}

struct JudgeCountSpec {
  const char* system;
  int lenient;  // judge whose labels are a superset
  int strict;   // the primary judge; rates are consensus over its passes
  int consensus;
};

// Faithful counts out of 400 per system under each judge and both.
inline const std::vector<JudgeCountSpec>& reference_judge_counts() {
  static const std::vector<JudgeCountSpec> rows = {
      {"Herald", 52, 43, 43},         {"GPT-5.2", 90, 81, 79},      {"Sonnet 4.5", 145, 116, 114},
      {"Gemini-2.5-Pro", 122, 112, 112}, {"100", 112, 98, 98},     {"001", 160, 134, 132},
      {"101", 174, 146, 144},         {"110", 282, 241, 235},       {"111", 291, 248, 242},
      {"010", 304, 250, 245},         {"011", 291, 251, 248},       {"Sonnet agent", 315, 271, 262},
      {"Gemini agent", 307, 263, 262},
  };
  return rows;
}

}  // namespace testing
