#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "autoform/experiment.hpp"
#include "autoform/report.hpp"
#include "support.hpp"

using namespace autoform;
using testing::TempDir;

namespace {

Corpus small_corpus(int n) {
  std::ostringstream text;
  const char* stems[] = {"alg", "real", "cplx", "top"};
  const char* labels[] = {"Algebra", "Real Analysis", "Complex Analysis", "Topology"};
  for (int i = 0; i < n; ++i) {
    text << json{{"id", std::string(stems[i % 4]) + "_" + std::to_string(i)},
                 {"domain", labels[i % 4]},
                 {"statement", "Statement number " + std::to_string(i) + " about the domain."}}
                .dump()
         << "\n";
  }
  std::istringstream in(text.str());
  return parse_corpus(in, "mem");
}

ExperimentConfig base_config(const TempDir& dir) {
  ExperimentConfig c;
  c.store = (dir / "store").string();
  c.workspace_root = (dir / "ws").string();
  c.fixtures_dir = (dir / "fixtures").string();
  c.parallelism = 3;
  c.bootstrap_resamples = 200;
  return c;
}

void run_all_configs(ExperimentConfig c, const Corpus& corpus, RunStore& store) {
  for (const auto& cfg : all_configs()) {
    c.config_code = cfg.code();
    auto be = make_backends(c);
    run_experiment(c, corpus, be, store);
  }
}

std::vector<RunRecord> untimed(std::vector<RunRecord> runs) {
  for (auto& r : runs) r.wall_time_ms = 0;
  return runs;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("stub experiment across all configurations yields a complete report") {
  TempDir dir;
  const auto corpus = small_corpus(8);
  auto c = base_config(dir);
  RunStore store(c.store);
  run_all_configs(c, corpus, store);
  REQUIRE(store.query_runs().size() == 64);
  for (const auto& r : store.query_runs()) REQUIRE(transcript_problems(store.load_transcript(r.transcript_ref)).empty());

  auto be = make_backends(c);
  const auto cov = judge_experiment(c, corpus, be, store, {});
  REQUIRE(cov.total == 64);
  REQUIRE(cov.judged + cov.judge_invalid == 64);
  for (const auto& r : store.query_runs()) REQUIRE_NOTHROW(validate_record(r));

  ReportOptions ro;
  ro.resamples = 200;
  const auto data = compute_report(store, ro);
  REQUIRE(data.table.missing_count() == 0);
  REQUIRE(data.missing_columns.empty());
  REQUIRE(data.effects.size() == 3 + 4 + 3);
  emit_report(data, dir / "report");
  for (const char* f : {"manifest.json", "factorial_table.csv", "effects.csv", "judges.csv", "efficiency_curve.csv",
                        "domain_breakdown.csv", "usage.csv", "efficiency_curve.svg", "factorial_rates.svg"}) {
    REQUIRE(fs::exists(dir / "report" / f));
  }
  const json manifest = json::parse(slurp(dir / "report" / "manifest.json"));
  REQUIRE(manifest["missing_cells"] == 0);
  for (const auto& f : manifest["files"]) {
    REQUIRE(sha256_hex(slurp(dir / "report" / f["file"].get<std::string>())) == f["sha256"]);
  }

  // Same store, same options: byte-identical bundle.
  emit_report(compute_report(store, ro), dir / "report2");
  for (const auto& f : manifest["files"]) {
    const auto name = f["file"].get<std::string>();
    REQUIRE(slurp(dir / "report" / name) == slurp(dir / "report2" / name));
  }
  REQUIRE(slurp(dir / "report" / "manifest.json") == slurp(dir / "report2" / "manifest.json"));
}

TEST_CASE("system prompts differ across configurations only inside the tool block") {
  TempDir dir;
  const auto corpus = small_corpus(4);
  auto c = base_config(dir);
  RunStore store(c.store);
  run_all_configs(c, corpus, store);
  const std::string base = PromptTemplates::builtin().base_prompt + "\n";
  for (const auto& r : store.query_runs()) {
    const auto t = store.load_transcript(r.transcript_ref);
    const std::string& sys = t.messages.at(0).content;
    REQUIRE(sys.compare(0, base.size(), base) == 0);
    REQUIRE(sys.substr(base.size()) == tool_block(r.config, PromptTemplates::builtin()));
  }
}

TEST_CASE("an interrupted run resumes to the same store") {
  TempDir dir;
  const auto corpus = small_corpus(12);
  auto c = base_config(dir);
  c.config_code = "011";

  c.store = (dir / "straight").string();
  RunStore straight(c.store);
  {
    auto be = make_backends(c);
    const auto s = run_experiment(c, corpus, be, straight);
    REQUIRE_FALSE(s.interrupted);
    REQUIRE(s.progress.executed == 12);
  }

  c.store = (dir / "resumed").string();
  c.workspace_root = (dir / "ws2").string();
  RunStore resumed(c.store);
  std::atomic<bool> stop{false};
  {
    auto be = make_backends(c);
    const auto s = run_experiment(c, corpus, be, resumed, &stop, [&](const RunProgress& p) {
      if (p.executed >= 5) stop = true;
    });
    REQUIRE(s.interrupted);
    REQUIRE(s.progress.executed < 12);
  }
  {
    auto be = make_backends(c);
    const auto s = run_experiment(c, corpus, be, resumed);
    REQUIRE_FALSE(s.interrupted);
    REQUIRE(s.progress.skipped + s.progress.executed == 12);
    REQUIRE(s.progress.skipped >= 5);
  }
  REQUIRE(untimed(resumed.query_runs()) == untimed(straight.query_runs()));
}

TEST_CASE("recorded fixtures replay offline and misses fail closed") {
  TempDir dir;
  const auto corpus = small_corpus(6);
  auto c = base_config(dir);
  c.config_code = "111";

  c.record_fixtures = true;
  c.store = (dir / "recorded").string();
  RunStore recorded(c.store);
  {
    auto be = make_backends(c);
    run_experiment(c, corpus, be, recorded);
    judge_experiment(c, corpus, be, recorded, {});
  }

  c.record_fixtures = false;
  c.backend = "replay";
  c.store = (dir / "replayed").string();
  c.workspace_root = (dir / "ws2").string();
  RunStore replayed(c.store);
  auto net = std::make_shared<CountingTransport>();
  {
    auto be = make_backends(c, net);
    run_experiment(c, corpus, be, replayed);
    judge_experiment(c, corpus, be, replayed, {});
  }
  REQUIRE(net->calls() == 0);
  REQUIRE(untimed(replayed.query_runs()) == untimed(recorded.query_runs()));

  c.store = (dir / "other").string();
  c.config_code = "010";
  RunStore other(c.store);
  auto be = make_backends(c, net);
  REQUIRE_THROWS_AS(run_experiment(c, corpus, be, other), FixtureMiss);
  REQUIRE(net->calls() == 0);
}

TEST_CASE("a missing configuration is reported cell by cell") {
  TempDir dir;
  const auto corpus = small_corpus(8);
  auto c = base_config(dir);
  RunStore store(c.store);
  for (const auto& cfg : all_configs()) {
    if (cfg.code() == "101") continue;
    c.config_code = cfg.code();
    auto be = make_backends(c);
    run_experiment(c, corpus, be, store);
  }
  ReportOptions ro;
  ro.resamples = 0;
  ro.metric = Metric::Compile;
  const auto d = compute_report(store, ro);
  REQUIRE(d.table.missing_count() == 8);
  REQUIRE(d.missing_columns == std::vector<std::string>{"101"});
  REQUIRE(d.effects.empty());
  REQUIRE_FALSE(d.warnings.empty());
  const auto files = render_report_files(d);
  std::istringstream in(files.at("missing_cells.csv"));
  REQUIRE(csv::read_all(in).size() == 9);
}

TEST_CASE("judging is idempotent and resumable") {
  TempDir dir;
  const auto corpus = small_corpus(8);
  auto c = base_config(dir);
  c.config_code = "010";
  RunStore store(c.store);
  auto be = make_backends(c);
  run_experiment(c, corpus, be, store);
  const auto first = judge_experiment(c, corpus, be, store, {});
  REQUIRE(first.newly_judged == 8);
  const auto snapshot = store.query_runs();
  const auto again = judge_experiment(c, corpus, be, store, {});
  REQUIRE(again.newly_judged == 0);
  REQUIRE(store.query_runs() == snapshot);
  for (const auto& r : snapshot) {
    if (!r.compile_pass) {
      for (const auto& [id, v] : r.verdicts) REQUIRE(v.grade <= 3);
    }
  }
}

TEST_CASE("experiment files parse strictly") {
  TempDir dir;
  ExperimentConfig c;
  c.config_code = "101";
  c.primary_judge.stub_pass_pct = 33;
  std::ofstream(dir / "exp.json") << json(c).dump(2);
  const auto back = load_experiment_config(dir / "exp.json");
  REQUIRE(back.config_code == "101");
  REQUIRE(back.primary_judge.stub_pass_pct == 33);
  REQUIRE(json(back) == json(c));

  std::ofstream(dir / "bad.json") << R"({"config":"111","typo_key":1})";
  REQUIRE_THROWS_AS(load_experiment_config(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "bad2.json") << R"({"t_max":"many"})";
  REQUIRE_THROWS_AS(load_experiment_config(dir / "bad2.json"), ConfigError);
  REQUIRE_THROWS_AS(load_experiment_config(dir / "absent.json"), ConfigError);

  c.backend = "cloud";
  REQUIRE_THROWS_AS(validate_config(c), ConfigError);
  c.backend = "live";
  REQUIRE_THROWS_AS(make_backends(c), ConfigError);
}

TEST_CASE("report refuses to guess between orchestrators") {
  TempDir dir;
  RunStore store(dir / "s");
  EpisodeTranscript t;
  t.messages = {Message::system("s"), Message::user("u"), Message::assistant("x")};
  t.steps = 1;
  auto a = testing::make_run("a", "111");
  auto b = testing::make_run("a", "111");
  b.orchestrator_id = "other";
  store.store_run(a, t);
  store.store_run(b, t);
  REQUIRE_THROWS_AS(compute_report(store, ReportOptions{}), UsageError);
  ReportOptions ro;
  ro.orchestrator_id = "other";
  ro.resamples = 0;
  REQUIRE(compute_report(store, ro).table.rows() == 1);
}
