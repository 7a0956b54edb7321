#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "autoform/agent_controller.hpp"
#include "autoform/benchmark_store.hpp"
#include "autoform/compiler.hpp"
#include "autoform/fixtures.hpp"
#include "autoform/lean_process.hpp"
#include "autoform/model_gateway.hpp"
#include "autoform/services.hpp"
#include "autoform/stub_policy.hpp"
#include "autoform/symbol_index.hpp"
#include "autoform/verdict.hpp"

namespace autoform {

enum class BackendMode { Live, Replay, Stub };

inline std::optional<BackendMode> parse_backend(std::string_view s) {
  if (s == "live") return BackendMode::Live;
  if (s == "replay") return BackendMode::Replay;
  if (s == "stub") return BackendMode::Stub;
  return std::nullopt;
}

struct ModelSpec {
  std::string id;             // recorded in transcripts, verdicts and fixture keys
  std::string base_url;       // live mode
  std::string provider_model; // defaults to id
  std::string api_key_env;    // environment variable holding the credential
  int timeout_s = 180;
  json decoding = json::object();
  int stub_pass_pct = 60;     // stub judges only
  int stub_malformed_pct = 0;

  static ModelSpec named(std::string id, int pass_pct = 60, int malformed_pct = 0) {
    ModelSpec m;
    m.id = std::move(id);
    m.stub_pass_pct = pass_pct;
    m.stub_malformed_pct = malformed_pct;
    return m;
  }
};

struct LeanSettings {
  std::string project_dir;  // empty selects the built-in stub checker
  std::vector<std::string> command = {"lake", "env", "lean"};
  std::string snapshot_id = "mathlib";
  int timeout_s = 120;
};

/// Everything needed to reconstruct an experiment. Stored as one JSON file;
/// CLI flags override individual fields.
struct ExperimentConfig {
  std::string experiment_id = "experiment";
  std::string corpus;
  std::string store = "store";
  std::string config_code = "111";
  std::string orchestrator_id = "orchestrator";
  int t_max = kDefaultStepBudget;
  std::string backend = "stub";
  std::string fixtures_dir = "fixtures";
  bool record_fixtures = false;
  std::string workspace_root = "workspaces";
  int parallelism = 0;  // 0: one worker per compiler session
  int compiler_sessions = 1;
  std::uint64_t seed = 0;
  ModelSpec orchestrator = ModelSpec::named("orchestrator");
  ModelSpec primary_judge = ModelSpec::named("primary", 55, 2);
  ModelSpec secondary_judge = ModelSpec::named("secondary", 60, 0);
  int judge_attempts = 3;
  std::string drafter_url;
  std::string search_url;
  std::string search_api_key_env;
  std::string symbol_index;  // JSONL; empty uses the built-in table
  std::string templates_dir;
  std::string response_log;
  LeanSettings lean;
  int bootstrap_resamples = 10000;

  int workers() const { return parallelism > 0 ? parallelism : std::max(1, compiler_sessions); }
};

inline void to_json(json& j, const ModelSpec& m) {
  j = json{{"id", m.id},
           {"base_url", m.base_url},
           {"provider_model", m.provider_model},
           {"api_key_env", m.api_key_env},
           {"timeout_s", m.timeout_s},
           {"decoding", m.decoding},
           {"stub_pass_pct", m.stub_pass_pct},
           {"stub_malformed_pct", m.stub_malformed_pct}};
}

inline void from_json(const json& j, ModelSpec& m) {
  m.id = j.value("id", m.id);
  m.base_url = j.value("base_url", m.base_url);
  m.provider_model = j.value("provider_model", m.provider_model);
  m.api_key_env = j.value("api_key_env", m.api_key_env);
  m.timeout_s = j.value("timeout_s", m.timeout_s);
  m.decoding = j.value("decoding", m.decoding);
  m.stub_pass_pct = j.value("stub_pass_pct", m.stub_pass_pct);
  m.stub_malformed_pct = j.value("stub_malformed_pct", m.stub_malformed_pct);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"experiment_id", c.experiment_id},
           {"corpus", c.corpus},
           {"store", c.store},
           {"config", c.config_code},
           {"orchestrator_id", c.orchestrator_id},
           {"t_max", c.t_max},
           {"backend", c.backend},
           {"fixtures_dir", c.fixtures_dir},
           {"record_fixtures", c.record_fixtures},
           {"workspace_root", c.workspace_root},
           {"parallelism", c.parallelism},
           {"compiler_sessions", c.compiler_sessions},
           {"seed", c.seed},
           {"models", json{{"orchestrator", c.orchestrator},
                           {"primary_judge", c.primary_judge},
                           {"secondary_judge", c.secondary_judge}}},
           {"judge_attempts", c.judge_attempts},
           {"drafter_url", c.drafter_url},
           {"search_url", c.search_url},
           {"search_api_key_env", c.search_api_key_env},
           {"symbol_index", c.symbol_index},
           {"templates_dir", c.templates_dir},
           {"response_log", c.response_log},
           {"lean", json{{"project_dir", c.lean.project_dir},
                         {"command", c.lean.command},
                         {"snapshot_id", c.lean.snapshot_id},
                         {"timeout_s", c.lean.timeout_s}}},
           {"bootstrap_resamples", c.bootstrap_resamples}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
  static const std::set<std::string> known = {
      "experiment_id", "corpus", "store", "config", "orchestrator_id", "t_max", "backend",
      "fixtures_dir", "record_fixtures", "workspace_root", "parallelism", "compiler_sessions",
      "seed", "models", "judge_attempts", "drafter_url", "search_url", "search_api_key_env",
      "symbol_index", "templates_dir", "response_log", "lean", "bootstrap_resamples"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown experiment setting '" + k + "'");
  }
  c.experiment_id = j.value("experiment_id", c.experiment_id);
  c.corpus = j.value("corpus", c.corpus);
  c.store = j.value("store", c.store);
  c.config_code = j.value("config", c.config_code);
  c.orchestrator_id = j.value("orchestrator_id", c.orchestrator_id);
  c.t_max = j.value("t_max", c.t_max);
  c.backend = j.value("backend", c.backend);
  c.fixtures_dir = j.value("fixtures_dir", c.fixtures_dir);
  c.record_fixtures = j.value("record_fixtures", c.record_fixtures);
  c.workspace_root = j.value("workspace_root", c.workspace_root);
  c.parallelism = j.value("parallelism", c.parallelism);
  c.compiler_sessions = j.value("compiler_sessions", c.compiler_sessions);
  c.seed = j.value("seed", c.seed);
  if (j.contains("models")) {
    const auto& m = j["models"];
    if (m.contains("orchestrator")) m["orchestrator"].get_to(c.orchestrator);
    if (m.contains("primary_judge")) m["primary_judge"].get_to(c.primary_judge);
    if (m.contains("secondary_judge")) m["secondary_judge"].get_to(c.secondary_judge);
  }
  c.judge_attempts = j.value("judge_attempts", c.judge_attempts);
  c.drafter_url = j.value("drafter_url", c.drafter_url);
  c.search_url = j.value("search_url", c.search_url);
  c.search_api_key_env = j.value("search_api_key_env", c.search_api_key_env);
  c.symbol_index = j.value("symbol_index", c.symbol_index);
  c.templates_dir = j.value("templates_dir", c.templates_dir);
  c.response_log = j.value("response_log", c.response_log);
  if (j.contains("lean")) {
    const auto& l = j["lean"];
    c.lean.project_dir = l.value("project_dir", c.lean.project_dir);
    c.lean.command = l.value("command", c.lean.command);
    c.lean.snapshot_id = l.value("snapshot_id", c.lean.snapshot_id);
    c.lean.timeout_s = l.value("timeout_s", c.lean.timeout_s);
  }
  c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
}

/// Checks the settings that would otherwise fail deep inside a run.
inline void validate_config(const ExperimentConfig& c) {
  try {
    (void)ToolConfig::parse(c.config_code);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (c.t_max < 1) throw ConfigError("t_max must be at least 1");
  if (!parse_backend(c.backend)) throw ConfigError("backend must be live, replay or stub");
  if (c.compiler_sessions < 1) throw ConfigError("compiler_sessions must be at least 1");
  if (c.parallelism < 0) throw ConfigError("parallelism must not be negative");
  if (c.judge_attempts < 1) throw ConfigError("judge_attempts must be at least 1");
  if (c.orchestrator_id.empty()) throw ConfigError("orchestrator_id must not be empty");
  if (c.primary_judge.id == c.secondary_judge.id) throw ConfigError("the two judges need distinct ids");
}

inline ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment file " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("experiment file " + path.string() + " is not a JSON object");
  ExperimentConfig c;
  try {
    j.get_to(c);
  } catch (const json::exception& e) {
    throw ConfigError("experiment file " + path.string() + ": " + e.what());
  }
  return c;
}

struct Backends {
  std::shared_ptr<ModelHandle> orchestrator;
  std::shared_ptr<ModelHandle> primary_judge;
  std::shared_ptr<ModelHandle> secondary_judge;
  std::shared_ptr<Compiler> compiler;
  std::shared_ptr<const SymbolTable> index;
  std::shared_ptr<Drafter> drafter;
  std::shared_ptr<SearchProvider> search;
  std::shared_ptr<FixtureStore> fixtures;
  PromptTemplates templates = PromptTemplates::builtin();
};

inline std::shared_ptr<Compiler> make_compiler(const ExperimentConfig& c, std::shared_ptr<const SymbolTable> index) {
  std::vector<std::unique_ptr<Compiler>> sessions;
  for (int i = 0; i < c.compiler_sessions; ++i) {
    if (c.lean.project_dir.empty()) {
      sessions.push_back(std::make_unique<StubChecker>(*index));
    } else {
      LeanProcessOptions o;
      o.project_dir = c.lean.project_dir;
      o.command = c.lean.command;
      o.snapshot_id = c.lean.snapshot_id;
      o.timeout = std::chrono::seconds(c.lean.timeout_s);
      sessions.push_back(std::make_unique<LeanProcessCompiler>(o));
    }
  }
  return std::make_shared<CachingCompiler>(std::make_shared<CompilerPool>(std::move(sessions)));
}

inline std::string env_or_throw(const std::string& var, const std::string& what) {
  if (var.empty()) return {};
  const char* v = std::getenv(var.c_str());
  if (!v || !*v) throw ConfigError(what + ": environment variable " + var + " is not set");
  return v;
}

/// Builds the model, compiler and service backends for a mode. Live mode
/// needs an HTTP transport; keeping it injectable lets tests count or fake
/// network traffic.
inline Backends make_backends(const ExperimentConfig& c, std::shared_ptr<HttpTransport> transport = nullptr) {
  validate_config(c);
  Backends be;
  if (!c.templates_dir.empty()) be.templates = PromptTemplates::load(c.templates_dir);
  be.index = std::make_shared<const SymbolTable>(
      c.symbol_index.empty() ? SymbolTable::builtin() : SymbolTable::load(c.symbol_index));
  be.compiler = make_compiler(c, be.index);

  const BackendMode mode = *parse_backend(c.backend);
  if (mode == BackendMode::Stub) {
    be.orchestrator = std::make_shared<stub::StubOrchestrator>();
    be.primary_judge = std::make_shared<stub::StubJudge>(c.primary_judge.stub_pass_pct, c.primary_judge.stub_malformed_pct);
    be.secondary_judge = std::make_shared<stub::StubJudge>(c.secondary_judge.stub_pass_pct, c.secondary_judge.stub_malformed_pct);
    be.drafter = std::make_shared<stub::StubDrafter>();
    be.search = std::make_shared<stub::StubSearch>();
    // Recording stub traffic yields replay fixtures without any network.
    if (c.record_fixtures) {
      be.fixtures = std::make_shared<FixtureStore>(c.fixtures_dir);
      be.orchestrator = std::make_shared<RecordingModel>(be.orchestrator, be.fixtures);
      be.primary_judge = std::make_shared<RecordingModel>(be.primary_judge, be.fixtures);
      be.secondary_judge = std::make_shared<RecordingModel>(be.secondary_judge, be.fixtures);
      be.drafter = std::make_shared<RecordingDrafter>(be.drafter, be.fixtures);
      be.search = std::make_shared<RecordingSearch>(be.search, be.fixtures);
    }
    return be;
  }

  be.fixtures = std::make_shared<FixtureStore>(c.fixtures_dir);
  if (mode == BackendMode::Replay) {
    be.orchestrator = std::make_shared<ReplayModel>(be.fixtures);
    be.primary_judge = be.orchestrator;
    be.secondary_judge = be.orchestrator;
    be.drafter = std::make_shared<ReplayDrafter>(be.fixtures);
    be.search = std::make_shared<ReplaySearch>(be.fixtures);
    return be;
  }

  if (!transport) throw ConfigError("live mode needs an HTTP transport");
  auto log = c.response_log.empty() ? nullptr : std::make_shared<ResponseLog>(c.response_log);
  auto live_model = [&](const ModelSpec& m) -> std::shared_ptr<ModelHandle> {
    if (m.base_url.empty()) throw ConfigError("model '" + m.id + "' has no base_url for live mode");
    ProviderConfig pc{m.base_url, env_or_throw(m.api_key_env, "model '" + m.id + "'"),
                      m.provider_model.empty() ? m.id : m.provider_model,
                      std::chrono::seconds(m.timeout_s)};
    std::shared_ptr<ModelHandle> h = std::make_shared<Gateway>(
        std::make_shared<OpenAiCompatModel>(transport, pc), GatewayOptions{}, nullptr,
        log ? Gateway::Logger([log](const ChatTurnRequest& q, const ChatTurnResponse& r) { log->append(q, r); })
            : Gateway::Logger{});
    if (c.record_fixtures) h = std::make_shared<RecordingModel>(h, be.fixtures);
    return h;
  };
  be.orchestrator = live_model(c.orchestrator);
  be.primary_judge = live_model(c.primary_judge);
  be.secondary_judge = live_model(c.secondary_judge);
  if (!c.drafter_url.empty()) {
    be.drafter = std::make_shared<HttpDrafter>(transport, c.drafter_url);
    if (c.record_fixtures) be.drafter = std::make_shared<RecordingDrafter>(be.drafter, be.fixtures);
  }
  if (!c.search_url.empty()) {
    be.search = std::make_shared<HttpSearch>(transport, c.search_url,
                                             env_or_throw(c.search_api_key_env, "search provider"));
    if (c.record_fixtures) be.search = std::make_shared<RecordingSearch>(be.search, be.fixtures);
  }
  return be;
}

struct RunProgress {
  std::array<std::size_t, 4> done{};
  std::array<std::size_t, 4> total{};
  std::size_t skipped = 0;
  std::size_t executed = 0;
  std::size_t succeeded = 0;
};

struct RunSummary {
  RunProgress progress;
  bool interrupted = false;
};

namespace detail {

/// Runs `work(i)` for i in [0, n) on `workers` threads. Stops handing out new
/// items once `stop` is set or any item throws; in-flight items finish. The
/// first exception is rethrown after all threads join.
inline bool parallel_for(std::size_t n, int workers, const std::atomic<bool>* stop,
                         const std::function<void(std::size_t)>& work) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto loop = [&] {
    for (;;) {
      if (failed || (stop && *stop)) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        work(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const int k = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  for (int w = 1; w < k; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
  return next.load() < n;  // true when work was left undone
}

}  // namespace detail

inline fs::path episode_workspace(const ExperimentConfig& c, const TheoremItem& item, const ToolConfig& cfg) {
  return fs::path(c.workspace_root) / c.orchestrator_id / (stub::detail::lean_name(item.id) + "_" + cfg.code());
}

/// Runs one episode per theorem not already stored for this configuration
/// and orchestrator. Rerunning picks up where an interrupted run stopped.
inline RunSummary run_experiment(const ExperimentConfig& c, const Corpus& corpus, Backends& be,
                                 RunStore& store, const std::atomic<bool>* stop = nullptr,
                                 const std::function<void(const RunProgress&)>& on_progress = {}) {
  const ToolConfig cfg = ToolConfig::parse(c.config_code);
  RunSummary sum;
  std::vector<const TheoremItem*> pending;
  for (const auto& item : corpus.items) {
    ++sum.progress.total[domain_index(item.domain)];
    if (store.contains(RunRecord::run_key(item.id, cfg, c.orchestrator_id))) {
      ++sum.progress.skipped;
      ++sum.progress.done[domain_index(item.domain)];
    } else {
      pending.push_back(&item);
    }
  }
  std::mutex mu;
  sum.interrupted = detail::parallel_for(pending.size(), c.workers(), stop, [&](std::size_t i) {
    const TheoremItem& item = *pending[i];
    const fs::path dir = episode_workspace(c, item, cfg);
    fs::remove_all(dir);
    Toolbelt tb(cfg, Workspace(dir), ToolbeltBackends{be.compiler, be.index, be.drafter, be.search},
                ToolbeltOptions{stub::detail::lean_name(item.id) + ".lean", 5});
    EpisodeOptions eo;
    eo.t_max = c.t_max;
    eo.model_id = c.orchestrator.id;
    eo.decoding = c.orchestrator.decoding;
    eo.templates = be.templates;
    eo.file_name = stub::detail::lean_name(item.id) + ".lean";
    const auto started = std::chrono::steady_clock::now();
    EpisodeResult res = run_episode(item, cfg, *be.orchestrator, tb, eo);

    RunRecord r;
    r.theorem_id = item.id;
    r.domain = item.domain;
    r.config = cfg;
    r.orchestrator_id = c.orchestrator_id;
    r.step_budget = c.t_max;
    r.steps_used = res.steps_used;
    r.status = res.status;
    r.final_code = res.final_code;
    r.annotations = res.annotations;
    r.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started).count();
    store.store_run(r, res.transcript);

    std::lock_guard lock(mu);
    ++sum.progress.executed;
    ++sum.progress.done[domain_index(item.domain)];
    sum.progress.succeeded += res.status == EpisodeStatus::Success;
    if (on_progress) on_progress(sum.progress);
  });
  return sum;
}

struct JudgeCoverage {
  std::size_t total = 0;
  std::size_t judged = 0;        // runs carrying both verdicts
  std::size_t judge_invalid = 0; // runs where a judge exhausted its retries
  std::size_t newly_judged = 0;
  bool interrupted = false;
};

/// Compile-gates and judges every selected run lacking a verdict from either
/// judge, then recomputes its metric flags.
inline JudgeCoverage judge_experiment(const ExperimentConfig& c, const Corpus& corpus, Backends& be,
                                      RunStore& store, const RunFilter& filter, bool rejudge = false,
                                      const std::atomic<bool>* stop = nullptr,
                                      const std::function<void(std::size_t, std::size_t)>& on_progress = {}) {
  const std::string p = c.primary_judge.id, s = c.secondary_judge.id;
  std::vector<RunRecord> runs = store.query_runs(filter);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const bool missing = !r.verdicts.count(p) || !r.verdicts.count(s);
    const bool flagged = r.judge_invalid.count(p) || r.judge_invalid.count(s);
    if (rejudge || (missing && !flagged)) todo.push_back(i);
  }
  std::mutex mu;
  std::size_t fresh = 0;
  const bool interrupted = detail::parallel_for(todo.size(), c.workers(), stop, [&](std::size_t k) {
    RunRecord r = runs[todo[k]];
    const TheoremItem* item = corpus.find(r.theorem_id);
    if (!item) throw ValidationError("run " + r.key() + " names a theorem missing from the corpus");
    if (rejudge) {
      r.verdicts.clear();
      r.judge_invalid.clear();
    }
    r.compile_pass = compile_gate(r.final_code, *be.compiler);
    auto run_judge = [&](const ModelSpec& m, ModelHandle& h) {
      if (r.verdicts.count(m.id)) {
        if (!r.compile_pass && (r.verdicts.at(m.id).faithful || r.verdicts.at(m.id).grade > kCompileFailMaxGrade)) {
          r.verdicts.erase(m.id);
        } else {
          return;
        }
      }
      JudgeOptions jo{m.id, m.id, m.decoding, c.judge_attempts, be.templates};
      JudgeOutcome o = judge(item->statement_text, r.final_code.value_or(""), r.compile_pass, h, jo);
      if (o.verdict) {
        r.verdicts[m.id] = *o.verdict;
        r.judge_invalid.erase(m.id);
      } else {
        r.judge_invalid.insert(m.id);
      }
    };
    run_judge(c.primary_judge, *be.primary_judge);
    run_judge(c.secondary_judge, *be.secondary_judge);
    apply_metrics(r, p, s);
    store.replace_record(r);
    std::lock_guard lock(mu);
    ++fresh;
    if (on_progress) on_progress(fresh, todo.size());
  });

  JudgeCoverage cov;
  cov.interrupted = interrupted;
  cov.newly_judged = fresh;
  for (const auto& r : store.query_runs(filter)) {
    ++cov.total;
    cov.judged += r.verdicts.count(p) && r.verdicts.count(s);
    cov.judge_invalid += r.judge_invalid.count(p) || r.judge_invalid.count(s);
  }
  return cov;
}

}  // namespace autoform
