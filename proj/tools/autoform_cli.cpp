#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

#include "autoform/experiment.hpp"
#include "autoform/http_live.hpp"
#include "autoform/report.hpp"

using namespace autoform;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitFixtureMiss = 4;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

// Values given on the command line; unset fields keep the file's values.
struct Overrides {
  std::string experiment_file;
  std::optional<std::string> corpus, store, config, orchestrator, backend, fixtures, workspaces, primary, secondary;
  std::optional<int> t_max, parallelism, resamples;
  std::optional<std::uint64_t> seed;
  bool record = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-e,--experiment", o.experiment_file, "Experiment JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--store", o.store, "Run store directory");
  cmd->add_option("--corpus", o.corpus, "Corpus JSONL file");
}

void add_backend(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--backend", o.backend, "live, replay or stub")
      ->check(CLI::IsMember({"live", "replay", "stub"}));
  cmd->add_option("--fixtures", o.fixtures, "Fixture directory for replay and recording");
  cmd->add_flag("--record", o.record, "Record every backend response as a fixture");
  cmd->add_option("--parallelism", o.parallelism, "Concurrent episodes (0: one per compiler session)")
      ->check(CLI::NonNegativeNumber);
}

// Relative paths inside an experiment file are taken from the file's directory.
void anchor_paths(ExperimentConfig& c, const fs::path& base) {
  for (std::string* p : {&c.corpus, &c.store, &c.fixtures_dir, &c.workspace_root, &c.symbol_index, &c.templates_dir,
                         &c.response_log, &c.lean.project_dir}) {
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c;
  if (!o.experiment_file.empty()) {
    c = load_experiment_config(o.experiment_file);
    anchor_paths(c, fs::absolute(o.experiment_file).parent_path());
  }
  if (o.corpus) c.corpus = *o.corpus;
  if (o.store) c.store = *o.store;
  if (o.config) c.config_code = *o.config;
  if (o.orchestrator) c.orchestrator_id = *o.orchestrator;
  if (o.backend) c.backend = *o.backend;
  if (o.fixtures) c.fixtures_dir = *o.fixtures;
  if (o.workspaces) c.workspace_root = *o.workspaces;
  if (o.primary) c.primary_judge.id = *o.primary;
  if (o.secondary) c.secondary_judge.id = *o.secondary;
  if (o.t_max) c.t_max = *o.t_max;
  if (o.parallelism) c.parallelism = *o.parallelism;
  if (o.resamples) c.bootstrap_resamples = *o.resamples;
  if (o.seed) c.seed = *o.seed;
  if (o.record) c.record_fixtures = true;
  validate_config(c);
  return c;
}

Corpus require_corpus(const ExperimentConfig& c) {
  if (c.corpus.empty()) throw UsageError("a corpus is required (--corpus or the experiment file)");
  return load_corpus(c.corpus);
}

Backends backends_for(const ExperimentConfig& c) {
  std::shared_ptr<HttpTransport> transport;
  if (c.backend == "live") transport = std::make_shared<HttplibTransport>();
  return make_backends(c, transport);
}

std::vector<ToolConfig> configs_from(const std::string& spec) {
  if (spec == "all") {
    const auto all = all_configs();
    return std::vector<ToolConfig>(all.begin(), all.end());
  }
  std::vector<ToolConfig> out;
  std::stringstream ss(spec);
  for (std::string code; std::getline(ss, code, ',');) {
    try {
      out.push_back(ToolConfig::parse(code));
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("no configuration given");
  return out;
}

std::string domain_counters(const RunProgress& p) {
  std::ostringstream out;
  for (auto d : kAllDomains) {
    const auto i = domain_index(d);
    out << " " << to_string(d) << " " << p.done[i] << "/" << p.total[i];
  }
  return out.str();
}

int cmd_run(const Overrides& o, const std::string& configs) {
  ExperimentConfig c = resolve(o);
  const auto corpus = require_corpus(c);
  RunStore store(c.store);
  bool interrupted = false;
  for (const auto& cfg : configs_from(configs.empty() ? c.config_code : configs)) {
    c.config_code = cfg.code();
    auto be = backends_for(c);
    std::cerr << "config " << cfg.code() << ": " << corpus.items.size() << " theorems, orchestrator "
              << c.orchestrator_id << ", t_max " << c.t_max << "\n";
    std::size_t last = 0;
    const auto sum = run_experiment(c, corpus, be, store, &g_stop, [&](const RunProgress& p) {
      const std::size_t done = p.skipped + p.executed;
      if (done - last >= 10 || done == corpus.items.size()) {
        last = done;
        std::cerr << "  " << done << "/" << corpus.items.size() << domain_counters(p) << "\n";
      }
    });
    std::cout << c.experiment_id << " " << cfg.code() << " executed=" << sum.progress.executed
              << " skipped=" << sum.progress.skipped << " succeeded=" << sum.progress.succeeded
              << (sum.interrupted ? " interrupted" : "") << "\n";
    if (sum.interrupted) {
      interrupted = true;
      break;
    }
  }
  return interrupted ? kExitFailure : kExitOk;
}

int cmd_judge(const Overrides& o, const std::string& configs, bool rejudge) {
  const ExperimentConfig c = resolve(o);
  const auto corpus = require_corpus(c);
  RunStore store(c.store);
  auto be = backends_for(c);
  std::vector<std::optional<ToolConfig>> selection;
  if (configs.empty()) {
    selection.push_back(std::nullopt);
  } else {
    for (const auto& cfg : configs_from(configs)) selection.push_back(cfg);
  }
  JudgeCoverage all;
  for (const auto& cfg : selection) {
    RunFilter f;
    f.config = cfg;
    const auto cov = judge_experiment(c, corpus, be, store, f, rejudge, &g_stop);
    all.total += cov.total;
    all.judged += cov.judged;
    all.judge_invalid += cov.judge_invalid;
    all.newly_judged += cov.newly_judged;
    if (cov.interrupted) {
      all.interrupted = true;
      break;
    }
  }
  std::cout << "judged " << all.judged << "/" << all.total << " (new " << all.newly_judged << ")";
  if (all.judge_invalid) std::cout << "; judge-invalid " << all.judge_invalid;
  if (all.interrupted) std::cout << "; interrupted";
  std::cout << "\n";
  return all.interrupted ? kExitFailure : kExitOk;
}

ReportOptions report_options(const ExperimentConfig& c, const std::string& metric, const std::string& orchestrator) {
  ReportOptions ro;
  ro.experiment_id = c.experiment_id;
  ro.orchestrator_id = orchestrator;
  ro.primary_judge = c.primary_judge.id;
  ro.secondary_judge = c.secondary_judge.id;
  ro.resamples = c.bootstrap_resamples;
  ro.seed = c.seed;
  ro.max_budget = c.t_max;
  if (!metric.empty()) {
    const auto m = parse_metric(metric);
    if (!m) throw UsageError("unknown metric '" + metric + "'");
    ro.metric = *m;
  }
  return ro;
}

void print_csv_table(const std::string& title, const std::string& csv_body, std::size_t keep_cols = 0) {
  std::istringstream in(csv_body);
  auto rows = csv::read_all(in);
  if (rows.empty()) return;
  if (keep_cols) {
    for (auto& r : rows) {
      if (r.size() > keep_cols) r.resize(keep_cols);
    }
  }
  const auto header = rows.front();
  rows.erase(rows.begin());
  std::cout << "\n" << title << "\n" << text_table(header, rows);
}

int cmd_analyze(const Overrides& o, const std::string& metric, const std::string& orchestrator,
                const std::string& out_dir, bool print) {
  const ExperimentConfig c = resolve(o);
  RunStore store(c.store);
  const auto data = compute_report(store, report_options(c, metric, orchestrator));
  const fs::path out = out_dir.empty() ? fs::path(c.store) / "report" : fs::path(out_dir);
  const json manifest = emit_report(data, out);
  if (print) {
    const auto files = render_report_files(data);
    std::cout << "orchestrator " << data.orchestrator_id << ", metric " << to_string(data.opts.metric) << ", "
              << data.table.complete_rows().size() << " complete theorem rows\n";
    print_csv_table("Factorial table", files.at("factorial_table.csv"));
    if (!data.effects.empty()) print_csv_table("Effects (percentage points)", files.at("effects.csv"));
    print_csv_table("Judges", files.at("judges.csv"), 7);
  }
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "\nreport written to " << out.string() << " (missing cells " << manifest.at("missing_cells")
            << ")\n";
  return kExitOk;
}

int cmd_export_audit(const Overrides& o, std::size_t sample, const std::string& out_path) {
  const ExperimentConfig c = resolve(o);
  const auto corpus = require_corpus(c);
  RunStore store(c.store);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + out_path);
  export_audit_sheet(store.query_runs(), corpus, c.primary_judge.id, sample, c.seed, out);
  std::cout << "audit sheet written to " << out_path << "\n";
  return kExitOk;
}

int cmd_audit_agreement(const Overrides& o, const std::string& sheet_path) {
  const ExperimentConfig c = resolve(o);
  RunStore store(c.store);
  std::ifstream in(sheet_path);
  if (!in) throw ConfigError("cannot open " + sheet_path);
  const auto st = audit_agreement(in, store.query_runs(), c.primary_judge.id);
  std::cout << "compared " << st.compared << "\n"
            << "exact " << st.exact << " (" << format_fixed(st.exact_pct(), 1) << "%)\n"
            << "within one, both faithful " << st.within_one_faithful << " ("
            << format_fixed(st.within_one_pct(), 1) << "%)\n"
            << "crossing the threshold " << st.threshold_crossing << " (" << format_fixed(st.crossing_pct(), 1)
            << "%)\n"
            << "binary agreement " << format_fixed(st.binary_agreement_pct(), 1) << "%\n";
  for (const auto& k : st.unknown_keys) std::cerr << "warning: unknown run key " << k << "\n";
  return kExitOk;
}

int cmd_prompt(const Overrides& o, const std::string& config) {
  const ExperimentConfig c = resolve(o);
  const auto templates = c.templates_dir.empty() ? PromptTemplates::builtin() : PromptTemplates::load(c.templates_dir);
  std::cout << assemble_prompt(configs_from(config).at(0), templates);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factorial harness for tool-augmented autoformalization agents"};
  app.require_subcommand(1);
  Overrides o;

  std::string configs, metric, orchestrator_pick, out_dir, audit_out = "audit_sheet.csv", sheet;
  bool rejudge = false, quiet = false;
  std::size_t sample = 138;

  auto* run = app.add_subcommand("run", "Run episodes for one or more configurations (resumable)");
  add_common(run, o);
  add_backend(run, o);
  run->add_option("-c,--config", configs, "Config code(s): 011, 000,111 or all");
  run->add_option("--orchestrator", o.orchestrator, "Orchestrator id recorded with each run");
  run->add_option("--t-max", o.t_max, "Step budget")->check(CLI::PositiveNumber);
  run->add_option("--workspaces", o.workspaces, "Workspace root");

  auto* judge = app.add_subcommand("judge", "Compile-gate and judge stored runs with both judges");
  add_common(judge, o);
  add_backend(judge, o);
  judge->add_option("-c,--config", configs, "Restrict to config code(s)");
  judge->add_option("--primary", o.primary, "Primary judge id");
  judge->add_option("--secondary", o.secondary, "Secondary judge id");
  judge->add_flag("--rejudge", rejudge, "Replace existing verdicts");

  auto* analyze = app.add_subcommand("analyze", "Print factorial tables and write the report bundle");
  auto* report = app.add_subcommand("report", "Write the report bundle only");
  for (auto* cmd : {analyze, report}) {
    add_common(cmd, o);
    cmd->add_option("--metric", metric, "faithful_consensus, faithful_primary or compile");
    cmd->add_option("--orchestrator", orchestrator_pick, "Orchestrator to analyse when several are stored");
    cmd->add_option("--resamples", o.resamples, "Bootstrap resamples (0 disables intervals)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", o.seed, "Bootstrap seed");
    cmd->add_option("-o,--out", out_dir, "Output directory (default: <store>/report)");
  }

  auto* audit = app.add_subcommand("export-audit", "Export a blinded sample of faithful runs for expert review");
  add_common(audit, o);
  audit->add_option("-n,--sample", sample, "Sample size")->check(CLI::PositiveNumber);
  audit->add_option("--seed", o.seed, "Sampling seed");
  audit->add_option("-o,--out", audit_out, "Sheet path");

  auto* agree = app.add_subcommand("audit-agreement", "Compare a filled audit sheet with the primary judge");
  add_common(agree, o);
  agree->add_option("sheet", sheet, "Filled audit sheet")->required()->check(CLI::ExistingFile);

  auto* prompt = app.add_subcommand("prompt", "Print the assembled system prompt for a configuration");
  add_common(prompt, o);
  prompt->add_option("-c,--config", configs, "Config code")->required();

  for (auto* cmd : {analyze, report}) cmd->add_flag("-q,--quiet", quiet, "Suppress printed tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*run) return cmd_run(o, configs);
    if (*judge) return cmd_judge(o, configs, rejudge);
    if (*analyze) return cmd_analyze(o, metric, orchestrator_pick, out_dir, !quiet);
    if (*report) return cmd_analyze(o, metric, orchestrator_pick, out_dir, false);
    if (*audit) return cmd_export_audit(o, sample, audit_out);
    if (*agree) return cmd_audit_agreement(o, sheet);
    if (*prompt) return cmd_prompt(o, configs);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FixtureMiss& e) {
    std::cerr << "fixture miss: " << e.what() << "\n";
    return kExitFixtureMiss;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
