#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "autoform/core.hpp"
#include "autoform/hash.hpp"
#include "autoform/numeric.hpp"
#include "autoform/records.hpp"

namespace autoform {

enum class Metric { FaithfulConsensus, FaithfulPrimary, Compile };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::FaithfulConsensus: return "faithful_consensus";
    case Metric::FaithfulPrimary: return "faithful_primary";
    case Metric::Compile: return "compile";
  }
  return "?";
}

inline std::optional<Metric> parse_metric(std::string_view s) {
  if (s == "faithful_consensus" || s == "consensus") return Metric::FaithfulConsensus;
  if (s == "faithful_primary" || s == "primary") return Metric::FaithfulPrimary;
  if (s == "compile") return Metric::Compile;
  return std::nullopt;
}

inline bool metric_value(const RunRecord& r, Metric m) {
  switch (m) {
    case Metric::FaithfulConsensus: return r.faithful_consensus;
    case Metric::FaithfulPrimary: return r.faithful_primary;
    case Metric::Compile: return r.compile_pass;
  }
  return false;
}

inline constexpr std::int8_t kMissing = -1;
using CellRow = std::array<std::int8_t, 8>;  // indexed by ToolConfig::index()

/// Theorems by the 8 configurations. Cells hold 0, 1 or kMissing.
struct OutcomeTable {
  Metric metric = Metric::FaithfulConsensus;
  std::vector<std::string> theorems;
  std::vector<Domain> domains;
  std::vector<CellRow> outcomes;
  std::vector<CellRow> compile;

  std::size_t rows() const { return theorems.size(); }

  std::vector<std::pair<std::string, ToolConfig>> missing_cells() const {
    std::vector<std::pair<std::string, ToolConfig>> out;
    for (std::size_t i = 0; i < rows(); ++i) {
      for (const auto& c : all_configs()) {
        if (outcomes[i][c.index()] == kMissing) out.emplace_back(theorems[i], c);
      }
    }
    return out;
  }

  std::size_t missing_count() const { return missing_cells().size(); }

  bool column_present(const ToolConfig& c) const {
    return std::any_of(outcomes.begin(), outcomes.end(),
                       [&](const CellRow& r) { return r[c.index()] != kMissing; });
  }

  bool row_complete(std::size_t i) const {
    return std::none_of(outcomes[i].begin(), outcomes[i].end(),
                        [](std::int8_t v) { return v == kMissing; });
  }

  /// Rows with all eight cells present; estimators use only these.
  std::vector<std::size_t> complete_rows() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < rows(); ++i) {
      if (row_complete(i)) idx.push_back(i);
    }
    return idx;
  }

  void add_row(std::string theorem, Domain d, const CellRow& out, const CellRow& comp) {
    theorems.push_back(std::move(theorem));
    domains.push_back(d);
    outcomes.push_back(out);
    compile.push_back(comp);
  }
};

inline CellRow empty_row() {
  CellRow r;
  r.fill(kMissing);
  return r;
}

/// Rows are the theorems seen in any run, sorted by id.
inline OutcomeTable build_outcome_table(const std::vector<RunRecord>& runs, Metric metric) {
  std::map<std::string, std::size_t> row_of;
  for (const auto& r : runs) row_of.emplace(r.theorem_id, 0);
  OutcomeTable t;
  t.metric = metric;
  for (auto& [id, idx] : row_of) {
    idx = t.theorems.size();
    t.add_row(id, Domain::RealAnalysis, empty_row(), empty_row());
  }
  for (const auto& r : runs) {
    const std::size_t i = row_of.at(r.theorem_id);
    auto& cell = t.outcomes[i][r.config.index()];
    if (cell != kMissing) {
      throw ValidationError("duplicate cell (" + r.theorem_id + ", " + r.config.code() + ")");
    }
    cell = metric_value(r, metric) ? 1 : 0;
    t.compile[i][r.config.index()] = r.compile_pass ? 1 : 0;
    t.domains[i] = r.domain;
  }
  return t;
}

/// Per-configuration means in percentage points. A percent-only summary
/// (e.g. a summary table) is representable but carries no rows.
struct ColumnMeans {
  std::array<std::optional<Rational>, 8> pct;

  const Rational& at(const ToolConfig& c) const {
    const auto& v = pct[c.index()];
    if (!v) throw ValidationError("missing column " + c.code());
    return *v;
  }

  static ColumnMeans from_percentages(const std::map<std::string, Rational>& by_code) {
    ColumnMeans m;
    for (const auto& [code, v] : by_code) m.pct[ToolConfig::parse(code).index()] = v;
    return m;
  }
};

/// Complete-case column means of the chosen matrix (outcomes by default).
inline ColumnMeans column_means(const OutcomeTable& t, bool compile_matrix = false) {
  const auto rows = t.complete_rows();
  ColumnMeans m;
  if (rows.empty()) return m;
  const auto& mat = compile_matrix ? t.compile : t.outcomes;
  for (const auto& c : all_configs()) {
    std::int64_t sum = 0;
    bool ok = true;
    for (auto i : rows) {
      if (mat[i][c.index()] == kMissing) {
        ok = false;
        break;
      }
      sum += mat[i][c.index()];
    }
    if (ok) m.pct[c.index()] = percent(sum, static_cast<std::int64_t>(rows.size()));
  }
  return m;
}

/// Raw per-config rates over all present cells, without complete-case
/// filtering. Used for the descriptive table.
inline std::array<std::optional<std::pair<std::int64_t, std::int64_t>>, 8> column_counts(
    const OutcomeTable& t, bool compile_matrix = false) {
  std::array<std::optional<std::pair<std::int64_t, std::int64_t>>, 8> out;
  const auto& mat = compile_matrix ? t.compile : t.outcomes;
  for (const auto& c : all_configs()) {
    std::int64_t hits = 0, n = 0;
    for (const auto& row : mat) {
      if (row[c.index()] == kMissing) continue;
      ++n;
      hits += row[c.index()];
    }
    if (n) out[c.index()] = std::make_pair(hits, n);
  }
  return out;
}

namespace detail {

/// Uniform mean of the column means over configs matching every fixed level.
inline Rational conditional_mean(const ColumnMeans& m,
                                 std::initializer_list<std::pair<Factor, bool>> fixed) {
  Rational sum = 0;
  int k = 0;
  for (const auto& c : all_configs()) {
    bool match = true;
    for (const auto& [f, lvl] : fixed) match = match && c.level(f) == lvl;
    if (!match) continue;
    sum += m.at(c);
    ++k;
  }
  return sum / k;
}

}  // namespace detail

/// Mean at the high level minus mean at the low level, each averaged
/// uniformly over the other two factors.
inline Rational main_effect(const ColumnMeans& m, Factor x) {
  return detail::conditional_mean(m, {{x, true}}) - detail::conditional_mean(m, {{x, false}});
}

/// Effect of x with y held at `level`, averaged over the third factor.
inline Rational simple_effect(const ColumnMeans& m, Factor x, Factor y, bool level) {
  if (x == y) throw ValidationError("simple effect needs two distinct factors");
  return detail::conditional_mean(m, {{x, true}, {y, level}}) -
         detail::conditional_mean(m, {{x, false}, {y, level}});
}

/// Difference in differences: the simple effect of x at y=1 minus at y=0.
/// Symmetric in x and y.
inline Rational interaction(const ColumnMeans& m, Factor x, Factor y) {
  return simple_effect(m, x, y, true) - simple_effect(m, x, y, false);
}

/// Mean of config c minus mean of the 000 baseline.
inline Rational gain_vs_baseline(const ColumnMeans& m, const ToolConfig& c) {
  return m.at(c) - m.at(ToolConfig{});
}

inline Rational main_effect(const OutcomeTable& t, Factor x) { return main_effect(column_means(t), x); }
inline Rational simple_effect(const OutcomeTable& t, Factor x, Factor y, bool level) {
  return simple_effect(column_means(t), x, y, level);
}
inline Rational interaction(const OutcomeTable& t, Factor x, Factor y) {
  return interaction(column_means(t), x, y);
}

struct FactorPair {
  Factor a;
  Factor b;
  std::string label() const {
    return std::string(1, factor_letter(a)) + "x" + std::string(1, factor_letter(b));
  }
};

/// The three pairs as the analysis reports them.
inline constexpr std::array<FactorPair, 3> kReportedPairs = {
    FactorPair{Factor::F, Factor::S}, FactorPair{Factor::F, Factor::T},
    FactorPair{Factor::S, Factor::T}};

struct EffectEstimate {
  std::string label;
  Rational point;
  double ci_low = 0;
  double ci_high = 0;
  int resamples = 0;  // 0 means no interval was computed
};

/// Type-7 sample quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& xs, double p) {
  if (xs.empty()) throw ValidationError("quantile of empty sample");
  const double h = (static_cast<double>(xs.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

/// Seed of resample b, derived from the master seed so resamples can be
/// computed in any order or in parallel.
inline std::uint64_t resample_seed(std::uint64_t master, std::uint64_t b) {
  return splitmix64(master ^ splitmix64(b));
}

struct BootstrapOptions {
  int resamples = 10000;
  std::uint64_t seed = 0;
  double level = 0.95;
};

/// Percentile bootstrap over theorem rows: each resample draws complete rows
/// with replacement, keeping a theorem's eight outcomes together.
inline EffectEstimate bootstrap_ci(const OutcomeTable& t, Factor x, const BootstrapOptions& opts = {}) {
  if (opts.resamples < 1) throw ValidationError("resamples must be at least 1");
  const auto rows = t.complete_rows();
  if (rows.empty()) throw ValidationError("no complete theorem rows to resample");
  const auto means = column_means(t);
  for (const auto& c : all_configs()) (void)means.at(c);

  // Each row contributes sum_c sign_x(c) * y_c; the effect is 100*sum/(4n).
  std::vector<int> contrast;
  contrast.reserve(rows.size());
  for (auto i : rows) {
    int s = 0;
    for (const auto& c : all_configs()) s += (c.level(x) ? 1 : -1) * t.outcomes[i][c.index()];
    contrast.push_back(s);
  }
  const auto n = static_cast<std::int64_t>(rows.size());
  std::vector<double> draws(static_cast<std::size_t>(opts.resamples));
  for (int b = 0; b < opts.resamples; ++b) {
    std::mt19937_64 rng(resample_seed(opts.seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
    std::int64_t sum = 0;
    for (std::int64_t k = 0; k < n; ++k) sum += contrast[static_cast<std::size_t>(pick(rng))];
    draws[static_cast<std::size_t>(b)] = 100.0 * static_cast<double>(sum) / (4.0 * static_cast<double>(n));
  }
  std::sort(draws.begin(), draws.end());
  const double alpha = 1 - opts.level;
  EffectEstimate e;
  e.label = std::string(1, factor_letter(x));
  e.point = main_effect(t, x);
  e.ci_low = quantile_sorted(draws, alpha / 2);
  e.ci_high = quantile_sorted(draws, 1 - alpha / 2);
  e.resamples = opts.resamples;
  return e;
}

/// Percent-only summaries carry no rows and cannot be resampled.
inline EffectEstimate bootstrap_ci(const ColumnMeans&, Factor, const BootstrapOptions& = {}) {
  throw ValidationError("percent-only summaries cannot be bootstrapped; per-theorem rows required");
}

}  // namespace autoform
