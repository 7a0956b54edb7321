#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "autoform/factorial.hpp"
#include "autoform/message.hpp"
#include "autoform/toolbelt.hpp"

namespace autoform {

struct CurvePoint {
  int budget = 0;
  Rational rate;  // fraction in [0,1]
};

/// Fraction of runs that are positive under `metric` and finished within
/// each budget. The denominator is always the full run count.
inline std::vector<CurvePoint> efficiency_curve(const std::vector<RunRecord>& runs,
                                                const std::vector<int>& budgets,
                                                Metric metric = Metric::FaithfulConsensus) {
  std::vector<CurvePoint> out;
  for (int b : budgets) {
    std::int64_t hits = 0;
    for (const auto& r : runs) hits += metric_value(r, metric) && r.steps_used <= b;
    out.push_back({b, runs.empty() ? Rational(0) : Rational(hits, static_cast<std::int64_t>(runs.size()))});
  }
  return out;
}

inline std::vector<int> budget_range(int lo, int hi) {
  std::vector<int> v;
  for (int b = lo; b <= hi; ++b) v.push_back(b);
  return v;
}

/// Midpoint of the two central values for even counts.
inline Rational median(std::vector<int> xs) {
  if (xs.empty()) throw ValidationError("median of empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n % 2) return Rational(xs[n / 2]);
  return Rational(xs[n / 2 - 1] + xs[n / 2], 2);
}

struct DomainRow {
  Domain domain{};
  std::int64_t runs = 0;
  std::int64_t compiled = 0;
  std::int64_t faithful = 0;
  Rational compile_rate;
  Rational faithful_rate;
  std::optional<Rational> conditional;  // faithful / compiled; empty when nothing compiled
  Rational mean_steps;
  Rational median_steps;
  bool empty = true;
};

inline std::array<DomainRow, 4> domain_breakdown(const std::vector<RunRecord>& runs,
                                                 Metric metric = Metric::FaithfulPrimary) {
  std::array<DomainRow, 4> rows;
  std::array<std::vector<int>, 4> steps;
  for (auto d : kAllDomains) rows[domain_index(d)].domain = d;
  for (const auto& r : runs) {
    auto& row = rows[domain_index(r.domain)];
    ++row.runs;
    row.compiled += r.compile_pass;
    row.faithful += metric_value(r, metric);
    steps[domain_index(r.domain)].push_back(r.steps_used);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    auto& row = rows[i];
    if (row.runs == 0) continue;
    row.empty = false;
    row.compile_rate = Rational(row.compiled, row.runs);
    row.faithful_rate = Rational(row.faithful, row.runs);
    if (row.compiled) row.conditional = Rational(row.faithful, row.compiled);
    std::int64_t total = 0;
    for (int s : steps[i]) total += s;
    row.mean_steps = Rational(total, row.runs);
    row.median_steps = median(steps[i]);
  }
  return rows;
}

/// Rows of one domain, same columns.
inline OutcomeTable domain_slice(const OutcomeTable& t, Domain d) {
  OutcomeTable out;
  out.metric = t.metric;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    if (t.domains[i] == d) out.add_row(t.theorems[i], d, t.outcomes[i], t.compile[i]);
  }
  return out;
}

struct DomainEffectRow {
  Domain domain{};
  std::optional<std::pair<Factor, bool>> conditioned_on;
  Rational low;   // fraction in [0,1], averaged uniformly over the free configs
  Rational high;
  Rational delta;
  bool empty = false;
};

/// Per-domain low/high averages of one factor, optionally with a second
/// factor held fixed.
inline std::vector<DomainEffectRow> domain_effects(
    const OutcomeTable& t, Factor x, std::optional<std::pair<Factor, bool>> cond = std::nullopt) {
  std::vector<DomainEffectRow> out;
  for (auto d : kAllDomains) {
    DomainEffectRow row;
    row.domain = d;
    row.conditioned_on = cond;
    const OutcomeTable slice = domain_slice(t, d);
    if (slice.complete_rows().empty()) {
      row.empty = true;
      out.push_back(row);
      continue;
    }
    const ColumnMeans m = column_means(slice);
    if (cond) {
      row.low = detail::conditional_mean(m, {{x, false}, *cond}) / 100;
      row.high = detail::conditional_mean(m, {{x, true}, *cond}) / 100;
    } else {
      row.low = detail::conditional_mean(m, {{x, false}}) / 100;
      row.high = detail::conditional_mean(m, {{x, true}}) / 100;
    }
    row.delta = row.high - row.low;
    out.push_back(row);
  }
  return out;
}

/// Unweighted mean of the per-domain deltas, in fraction units.
inline Rational average_delta(const std::vector<DomainEffectRow>& rows) {
  Rational sum = 0;
  int k = 0;
  for (const auto& r : rows) {
    if (r.empty) continue;
    sum += r.delta;
    ++k;
  }
  if (!k) throw ValidationError("no non-empty domains");
  return sum / k;
}

struct UsageRow {
  ToolConfig config;
  std::int64_t transcripts = 0;
  std::int64_t translator = 0;
  std::int64_t repl = 0;
  std::int64_t write_file = 0;
  std::int64_t inspect = 0;
  std::int64_t resolve = 0;
  std::int64_t search = 0;
  std::int64_t other = 0;
  std::set<std::string> unknown_names;

  std::int64_t s_total() const { return search + inspect + resolve; }
};

using UsageSummary = std::map<ToolConfig, UsageRow>;

inline void count_calls(UsageRow& row, const EpisodeTranscript& t) {
  ++row.transcripts;
  for (const auto& m : t.messages) {
    if (m.role != Role::Assistant) continue;
    for (const auto& c : m.tool_calls) {
      if (c.name == tools::kTranslator) ++row.translator;
      else if (c.name == tools::kRepl) ++row.repl;
      else if (c.name == tools::kWriteFile) ++row.write_file;
      else if (c.name == tools::kInspect) ++row.inspect;
      else if (c.name == tools::kResolve) ++row.resolve;
      else if (c.name == tools::kSearch) ++row.search;
      else {
        ++row.other;
        row.unknown_names.insert(c.name);
      }
    }
  }
}

inline UsageSummary usage_summary(const std::map<ToolConfig, std::vector<EpisodeTranscript>>& by_config) {
  UsageSummary out;
  for (const auto& [cfg, ts] : by_config) {
    UsageRow row;
    row.config = cfg;
    for (const auto& t : ts) count_calls(row, t);
    out[cfg] = std::move(row);
  }
  return out;
}

/// (a - b) / a, empty when a is zero.
inline std::optional<Rational> reduction(std::int64_t a, std::int64_t b) {
  if (a == 0) return std::nullopt;
  return Rational(a - b, a);
}

}  // namespace autoform
