#include <catch_amalgamated.hpp>

#include <random>

#include "autoform/analytics.hpp"
#include "reference_fixtures.hpp"
#include "support.hpp"

using namespace autoform;

TEST_CASE("efficiency curve over a planted three-run store") {
  const std::vector<RunRecord> runs = {testing::make_run("a", "111", Domain::Algebra, 4, true, true, true),
                                       testing::make_run("b", "111", Domain::Algebra, 8, true, true, true),
                                       testing::make_run("c", "111", Domain::Algebra, 9, true, true, true)};
  const auto curve = efficiency_curve(runs, {3, 4, 8, 9, 24});
  REQUIRE(curve[0].rate == Rational(0));
  REQUIRE(curve[1].rate == Rational(1, 3));
  REQUIRE(curve[2].rate == Rational(2, 3));
  REQUIRE(curve[3].rate == Rational(1));
  REQUIRE(curve[4].rate == Rational(1));
}

TEST_CASE("efficiency curve never decreases and ends at the overall rate") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<RunRecord> runs;
    std::int64_t positive = 0;
    for (int i = 0; i < 50; ++i) {
      const bool ok = rng() % 2;
      positive += ok;
      runs.push_back(testing::make_run("t" + std::to_string(i), "011", Domain::Topology,
                                       1 + static_cast<int>(rng() % 24), true, ok, ok));
    }
    const auto curve = efficiency_curve(runs, budget_range(1, 24));
    for (std::size_t i = 1; i < curve.size(); ++i) REQUIRE(curve[i - 1].rate <= curve[i].rate);
    REQUIRE(curve.back().rate == Rational(positive, 50));
  }
  REQUIRE(efficiency_curve({}, {1})[0].rate == Rational(0));
}

TEST_CASE("median uses the midpoint of the central pair") {
  REQUIRE(median({3, 1, 2}) == Rational(2));
  REQUIRE(median({4, 1, 3, 2}) == Rational(5, 2));
  REQUIRE(median({7, 8}) == Rational(15, 2));
  REQUIRE_THROWS_AS(median({}), ValidationError);
}

TEST_CASE("domain breakdown counts rates and step statistics") {
  std::vector<RunRecord> runs = {
      testing::make_run("a", "111", Domain::Algebra, 2, true, true, true),
      testing::make_run("b", "111", Domain::Algebra, 5, true, false, false),
      testing::make_run("c", "111", Domain::Algebra, 9, false, false, false),
      testing::make_run("d", "111", Domain::Topology, 3, false, false, false),
  };
  const auto rows = domain_breakdown(runs);
  const auto& alg = rows[domain_index(Domain::Algebra)];
  REQUIRE(alg.runs == 3);
  REQUIRE(alg.compile_rate == Rational(2, 3));
  REQUIRE(alg.faithful_rate == Rational(1, 3));
  REQUIRE(*alg.conditional == Rational(1, 2));
  REQUIRE(alg.mean_steps == Rational(16, 3));
  REQUIRE(alg.median_steps == Rational(5));
  REQUIRE_FALSE(rows[domain_index(Domain::Topology)].conditional);
  REQUIRE(rows[domain_index(Domain::ComplexAnalysis)].empty);
}

TEST_CASE("reference per-domain store reproduces the domain table") {
  const auto runs = testing::reference_domain_runs();
  const auto rows = domain_breakdown(runs, Metric::FaithfulPrimary);
  for (const auto& spec : testing::reference_domain_specs()) {
    const auto& row = rows[domain_index(spec.domain)];
    REQUIRE(row.compiled == spec.compiled);
    REQUIRE(row.faithful == spec.faithful);
    REQUIRE(format_fixed(*row.conditional, 2) == spec.conditional);
    REQUIRE(row.mean_steps == Rational(spec.steps_sum, 100));
    REQUIRE(row.median_steps == Rational(spec.median_lo + spec.median_hi, 2));
  }
}

TEST_CASE("domain effects reproduce the per-domain F deltas") {
  const auto t = testing::reference_domain_delta_table();
  const auto rows = domain_effects(t, Factor::F);
  for (const auto& spec : testing::reference_domain_deltas()) {
    const auto& row = rows[domain_index(spec.domain)];
    REQUIRE(row.low == Rational(spec.low, 100));
    REQUIRE(row.high == Rational(spec.high, 100));
    REQUIRE(format_fixed(row.delta, 2) == spec.delta);
  }
  const auto cond = domain_effects(t, Factor::S, std::make_pair(Factor::F, false));
  for (const auto& r : cond) REQUIRE(r.delta == Rational(0));
  REQUIRE(average_delta(rows) == Rational(53 + 30 + 20 + 19, 400));
}

TEST_CASE("usage summary counts calls per tool") {
  const auto sum = usage_summary(testing::reference_usage_transcripts());
  for (const auto& spec : testing::reference_usage()) {
    const auto& row = sum.at(ToolConfig::parse(spec.config));
    REQUIRE(row.transcripts == 96);
    REQUIRE(row.translator == spec.translator);
    REQUIRE(row.repl == spec.repl);
    REQUIRE(row.s_total() == spec.s_total);
    REQUIRE(row.other == 0);
  }
  REQUIRE(format_fixed(*reduction(1496, 1050) * 100, 2) == "29.81");
  REQUIRE(format_fixed(*reduction(1374, 1008) * 100, 2) == "26.64");
  REQUIRE_FALSE(reduction(0, 5));

  UsageRow odd;
  EpisodeTranscript t;
  t.messages = {Message::assistant("", {ToolCall{"x", "mystery_tool", json::object()}})};
  count_calls(odd, t);
  REQUIRE(odd.other == 1);
  REQUIRE(odd.unknown_names.count("mystery_tool"));
}
