#include <catch_amalgamated.hpp>

#include <random>

#include "autoform/factorial.hpp"
#include "support.hpp"

using namespace autoform;

namespace {

constexpr std::array<Factor, 3> kFactors = {Factor::T, Factor::F, Factor::S};

double approx(const Rational& r) { return to_double(r); }

}  // namespace

TEST_CASE("estimators agree with the signed-sum oracle on random tables") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = testing::random_table(rng, 1 + static_cast<int>(rng() % 60), 0.3 + 0.4 * (trial % 2));
    for (auto x : kFactors) {
      REQUIRE(approx(main_effect(t, x)) == Catch::Approx(testing::oracle_main(t, x)).margin(1e-9));
      for (auto y : kFactors) {
        if (x == y) continue;
        for (bool lvl : {false, true}) {
          REQUIRE(approx(simple_effect(t, x, y, lvl)) ==
                  Catch::Approx(testing::oracle_simple(t, x, y, lvl)).margin(1e-9));
        }
        REQUIRE(approx(interaction(t, x, y)) == Catch::Approx(testing::oracle_interaction(t, x, y)).margin(1e-9));
        REQUIRE(interaction(t, x, y) == interaction(t, y, x));
      }
    }
  }
}

TEST_CASE("main effect is the mean of its two simple effects") {
  std::mt19937_64 rng(12);
  const auto t = testing::random_table(rng, 40);
  for (auto x : kFactors) {
    for (auto y : kFactors) {
      if (x == y) continue;
      REQUIRE(main_effect(t, x) == (simple_effect(t, x, y, false) + simple_effect(t, x, y, true)) / 2);
    }
  }
}

TEST_CASE("effects are invariant to row order") {
  std::mt19937_64 rng(13);
  auto t = testing::random_table(rng, 30);
  const auto before = main_effect(t, Factor::F);
  const auto inter = interaction(t, Factor::F, Factor::S);
  OutcomeTable shuffled;
  std::vector<std::size_t> order(t.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (auto i : order) shuffled.add_row(t.theorems[i], t.domains[i], t.outcomes[i], t.compile[i]);
  REQUIRE(main_effect(shuffled, Factor::F) == before);
  REQUIRE(interaction(shuffled, Factor::F, Factor::S) == inter);
}

TEST_CASE("reference column means give the expected effects exactly") {
  const auto t = testing::table_from_counts(testing::reference_faithful_counts(), 400);
  REQUIRE(main_effect(t, Factor::F) == Rational(323125, 10000));
  REQUIRE(main_effect(t, Factor::S) == Rational(68125, 10000));
  REQUIRE(main_effect(t, Factor::T) == Rational(9375, 10000));
  REQUIRE(simple_effect(t, Factor::S, Factor::F, false) == Rational(12375, 1000));
  REQUIRE(simple_effect(t, Factor::S, Factor::F, true) == Rational(125, 100));
  REQUIRE(interaction(t, Factor::F, Factor::S) == Rational(-11125, 1000));
  REQUIRE(interaction(t, Factor::F, Factor::T) == Rational(-5875, 1000));
  REQUIRE(interaction(t, Factor::S, Factor::T) == Rational(-375, 1000));
  const auto m = column_means(t);
  REQUIRE(gain_vs_baseline(m, ToolConfig::parse("011")) == Rational(4225, 100));
}

TEST_CASE("runs become a table with one cell per theorem and config") {
  std::vector<RunRecord> runs;
  for (const auto& c : all_configs()) {
    runs.push_back(testing::make_run("b", c.code(), Domain::Topology, 1, true, true, c.f));
    runs.push_back(testing::make_run("a", c.code(), Domain::Algebra, 1, c.f, false, false));
  }
  const auto t = build_outcome_table(runs, Metric::FaithfulConsensus);
  REQUIRE(t.theorems == std::vector<std::string>{"a", "b"});
  REQUIRE(t.domains[1] == Domain::Topology);
  REQUIRE(t.missing_count() == 0);
  REQUIRE(main_effect(t, Factor::F) == Rational(50));
  REQUIRE(main_effect(build_outcome_table(runs, Metric::Compile), Factor::F) == Rational(50));

  runs.push_back(testing::make_run("a", "010"));
  REQUIRE_THROWS_WITH(build_outcome_table(runs, Metric::FaithfulConsensus),
                      Catch::Matchers::ContainsSubstring("duplicate cell (a, 010)"));
}

TEST_CASE("missing cells are excluded row-wise and a missing column is an error") {
  std::vector<RunRecord> runs;
  for (const auto& c : all_configs()) {
    runs.push_back(testing::make_run("a", c.code()));
    if (c.code() != "110") runs.push_back(testing::make_run("b", c.code()));
  }
  const auto t = build_outcome_table(runs, Metric::Compile);
  REQUIRE(t.missing_count() == 1);
  REQUIRE(t.complete_rows() == std::vector<std::size_t>{0});
  REQUIRE(t.missing_cells()[0].first == "b");

  std::vector<RunRecord> no_col;
  for (const auto& r : runs) {
    if (r.config.code() != "101") no_col.push_back(r);
  }
  const auto t2 = build_outcome_table(no_col, Metric::Compile);
  REQUIRE_FALSE(t2.column_present(ToolConfig::parse("101")));
  REQUIRE_THROWS_AS(main_effect(t2, Factor::T), ValidationError);
}

TEST_CASE("bootstrap is deterministic per seed") {
  std::mt19937_64 rng(14);
  const auto t = testing::random_table(rng, 100);
  BootstrapOptions o;
  o.resamples = 500;
  o.seed = 99;
  const auto a = bootstrap_ci(t, Factor::F, o);
  const auto b = bootstrap_ci(t, Factor::F, o);
  REQUIRE(a.ci_low == b.ci_low);
  REQUIRE(a.ci_high == b.ci_high);
  REQUIRE(a.ci_low <= approx(a.point));
  REQUIRE(approx(a.point) <= a.ci_high);
  o.seed = 100;
  const auto c = bootstrap_ci(t, Factor::F, o);
  REQUIRE((c.ci_low != a.ci_low || c.ci_high != a.ci_high));
}

TEST_CASE("constant columns give a zero-width interval") {
  const auto t = testing::table_from_counts({{"000", 0}, {"100", 0}, {"010", 10}, {"110", 10},
                                             {"001", 0}, {"101", 0}, {"011", 10}, {"111", 10}},
                                            10);
  BootstrapOptions o;
  o.resamples = 200;
  const auto e = bootstrap_ci(t, Factor::F, o);
  REQUIRE(e.ci_low == 100.0);
  REQUIRE(e.ci_high == 100.0);
  const auto z = bootstrap_ci(t, Factor::S, o);
  REQUIRE(z.ci_low == 0.0);
  REQUIRE(z.ci_high == 0.0);
}

TEST_CASE("percent-only summaries cannot be bootstrapped") {
  const auto m = ColumnMeans::from_percentages({{"000", Rational(1975, 100)}});
  REQUIRE_THROWS_AS(bootstrap_ci(m, Factor::F), ValidationError);
  REQUIRE_THROWS_AS(bootstrap_ci(OutcomeTable{}, Factor::F), ValidationError);
}

TEST_CASE("type-7 quantiles interpolate") {
  const std::vector<double> xs = {1, 2, 3, 4};
  REQUIRE(quantile_sorted(xs, 0) == 1);
  REQUIRE(quantile_sorted(xs, 1) == 4);
  REQUIRE(quantile_sorted(xs, 0.5) == Catch::Approx(2.5));
  REQUIRE(quantile_sorted(xs, 0.25) == Catch::Approx(1.75));
}

TEST_CASE("metric names round-trip") {
  for (auto m : {Metric::Compile, Metric::FaithfulPrimary, Metric::FaithfulConsensus}) {
    REQUIRE(parse_metric(to_string(m)) == m);
  }
  REQUIRE_FALSE(parse_metric("accuracy"));
}
