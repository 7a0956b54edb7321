#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "autoform/analytics.hpp"
#include "autoform/benchmark_store.hpp"
#include "autoform/csv.hpp"
#include "autoform/factorial.hpp"
#include "autoform/hash.hpp"
#include "autoform/verdict.hpp"

namespace autoform {

struct ReportOptions {
  std::string experiment_id = "experiment";
  std::string orchestrator_id;  // system analysed factorially; empty picks the only one
  std::string primary_judge = "primary";
  std::string secondary_judge = "secondary";
  Metric metric = Metric::FaithfulConsensus;
  Metric domain_metric = Metric::FaithfulPrimary;
  int resamples = 10000;
  std::uint64_t seed = 0;
  int max_budget = kDefaultStepBudget;
};

struct EffectRow {
  std::string kind;  // main, simple, interaction
  std::string label;
  Rational point;
  std::optional<EffectEstimate> ci;
};

/// Everything a report shows, computed from store contents only.
struct ReportData {
  ReportOptions opts;
  std::string store_hash;
  std::string orchestrator_id;
  OutcomeTable table;
  std::vector<std::string> missing_columns;
  std::vector<std::string> warnings;
  std::vector<EffectRow> effects;
  std::map<std::string, ConsensusSummary> consensus;  // by system label
  ContainmentReport containment;
  std::map<ToolConfig, std::vector<CurvePoint>> curves;
  std::map<ToolConfig, std::array<DomainRow, 4>> domains;
  std::vector<std::pair<std::string, std::vector<DomainEffectRow>>> domain_effects;
  UsageSummary usage;

  bool effects_available() const { return missing_columns.empty() && !table.complete_rows().empty(); }
};

inline ReportData compute_report(RunStore& store, const ReportOptions& opts) {
  ReportData d;
  d.opts = opts;
  d.store_hash = store.content_hash();
  const auto all = store.query_runs({});

  std::set<std::string> orchestrators;
  for (const auto& r : all) orchestrators.insert(r.orchestrator_id);
  d.orchestrator_id = opts.orchestrator_id;
  if (d.orchestrator_id.empty()) {
    if (orchestrators.size() > 1) {
      throw UsageError("store holds several orchestrators; choose one for the factorial analysis");
    }
    if (!orchestrators.empty()) d.orchestrator_id = *orchestrators.begin();
  }
  RunFilter f;
  f.orchestrator_id = d.orchestrator_id;
  const auto runs = store.query_runs(f);

  d.table = build_outcome_table(runs, opts.metric);
  for (const auto& c : all_configs()) {
    if (!d.table.column_present(c)) d.missing_columns.push_back(c.code());
  }
  if (!d.missing_columns.empty()) {
    std::string m = "missing configurations:";
    for (const auto& c : d.missing_columns) m += " " + c;
    d.warnings.push_back(m + "; effects not computed");
  }
  const auto missing = d.table.missing_count();
  if (missing) {
    d.warnings.push_back(std::to_string(missing) + " missing cells; effects use the " +
                         std::to_string(d.table.complete_rows().size()) + " complete theorems");
  }
  if (d.effects_available()) {
    const ColumnMeans m = column_means(d.table);
    for (auto x : {Factor::F, Factor::S, Factor::T}) {
      BootstrapOptions bo{opts.resamples, opts.seed, 0.95};
      d.effects.push_back({"main", std::string(1, factor_letter(x)), main_effect(m, x),
                           opts.resamples > 0 ? std::optional(bootstrap_ci(d.table, x, bo)) : std::nullopt});
    }
    for (auto x : {Factor::S, Factor::T}) {
      for (bool lvl : {false, true}) {
        d.effects.push_back({"simple", std::string(1, factor_letter(x)) + "|F=" + (lvl ? "1" : "0"),
                             simple_effect(m, x, Factor::F, lvl), std::nullopt});
      }
    }
    for (const auto& p : kReportedPairs) {
      d.effects.push_back({"interaction", p.label(), interaction(m, p.a, p.b), std::nullopt});
    }
  }

  std::map<std::string, std::vector<RunRecord>> by_system;
  for (const auto& r : all) by_system[system_label(r)].push_back(r);
  for (const auto& [sys, rs] : by_system) {
    d.consensus[sys] = consensus_summary(rs, opts.primary_judge, opts.secondary_judge);
  }
  d.containment = containment_report(all, opts.primary_judge, opts.secondary_judge);

  std::map<ToolConfig, std::vector<RunRecord>> by_config;
  for (const auto& r : runs) by_config[r.config].push_back(r);
  const auto budgets = budget_range(0, opts.max_budget);
  std::map<ToolConfig, std::vector<EpisodeTranscript>> transcripts;
  for (const auto& [cfg, rs] : by_config) {
    d.curves[cfg] = efficiency_curve(rs, budgets, opts.metric);
    d.domains[cfg] = domain_breakdown(rs, opts.domain_metric);
    auto& ts = transcripts[cfg];
    for (const auto& r : rs) ts.push_back(store.load_transcript(r.transcript_ref));
  }
  d.usage = usage_summary(transcripts);
  for (const auto& [cfg, row] : d.usage) {
    if (row.other) d.warnings.push_back("config " + cfg.code() + ": unknown tool names in transcripts");
  }

  if (d.effects_available()) {
    d.domain_effects.emplace_back("F", domain_effects(d.table, Factor::F));
    d.domain_effects.emplace_back("S|F=0", domain_effects(d.table, Factor::S, std::pair{Factor::F, false}));
    d.domain_effects.emplace_back("S|F=1", domain_effects(d.table, Factor::S, std::pair{Factor::F, true}));
  }
  return d;
}

namespace detail {

inline std::string pct(const Rational& r) { return format_fixed(r, 2); }
inline std::string frac_as_pct(const Rational& r) { return format_fixed(r * 100, 2); }
inline std::string opt_pct(const std::optional<Rational>& r) { return r ? pct(*r) : "NA"; }

inline std::string csv_text(const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  csv::write_row(out, header);
  for (const auto& r : rows) csv::write_row(out, r);
  return out.str();
}

inline std::string svg_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline constexpr std::array<const char*, 8> kPalette = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                                        "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

inline std::string svg_open(int w, int h, const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << svg_escape(title)
    << "</text>\n";
  return s.str();
}

inline std::string curve_svg(const std::map<ToolConfig, std::vector<CurvePoint>>& curves, int max_budget) {
  const int W = 640, H = 400, L = 50, R = 110, T = 30, B = 40;
  const double pw = W - L - R, ph = H - T - B;
  std::ostringstream s;
  s << svg_open(W, H, "Cumulative rate by step budget");
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int p = 0; p <= 100; p += 20) {
    const double y = T + ph * (1 - p / 100.0);
    s << "<text x=\"" << L - 6 << "\" y=\"" << format_fixed(y + 4, 1) << "\" text-anchor=\"end\">" << p << "%</text>\n";
  }
  for (int b = 0; b <= max_budget; b += std::max(1, max_budget / 6)) {
    const double x = L + pw * b / std::max(1, max_budget);
    s << "<text x=\"" << format_fixed(x, 1) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\">" << b << "</text>\n";
  }
  s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">step budget</text>\n";
  int k = 0;
  for (const auto& [cfg, pts] : curves) {
    const char* col = kPalette[cfg.index()];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : pts) {
      const double x = L + pw * p.budget / std::max(1, max_budget);
      const double y = T + ph * (1 - to_double(p.rate));
      s << format_fixed(x, 1) << ',' << format_fixed(y, 1) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 * (k + 1) << "\" fill=\"" << col << "\">" << cfg.code()
      << "</text>\n";
    ++k;
  }
  s << "</svg>\n";
  return s.str();
}

inline std::string bars_svg(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
                            double max_value, const std::string& unit) {
  const int W = 640, H = 360, L = 50, R = 20, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  std::ostringstream s;
  s << svg_open(W, H, title);
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  const double slot = bars.empty() ? pw : pw / static_cast<double>(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double v = max_value > 0 ? bars[i].second / max_value : 0;
    const double h = ph * std::clamp(v, 0.0, 1.0);
    const double x = L + slot * static_cast<double>(i) + slot * 0.15;
    s << "<rect x=\"" << format_fixed(x, 1) << "\" y=\"" << format_fixed(H - B - h, 1) << "\" width=\""
      << format_fixed(slot * 0.7, 1) << "\" height=\"" << format_fixed(h, 1) << "\" fill=\""
      << kPalette[i % kPalette.size()] << "\"/>\n";
    s << "<text x=\"" << format_fixed(x + slot * 0.35, 1) << "\" y=\"" << H - B + 14
      << "\" text-anchor=\"middle\">" << svg_escape(bars[i].first) << "</text>\n";
    s << "<text x=\"" << format_fixed(x + slot * 0.35, 1) << "\" y=\"" << format_fixed(H - B - h - 4, 1)
      << "\" text-anchor=\"middle\">" << format_fixed(bars[i].second, 1) << unit << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace detail

/// name -> file content for every artifact of the bundle except the manifest.
inline std::map<std::string, std::string> render_report_files(const ReportData& d) {
  using detail::csv_text;
  using detail::pct;
  std::map<std::string, std::string> files;

  {
    const auto faith = column_counts(d.table);
    const auto comp = column_counts(d.table, true);
    std::optional<Rational> base;
    if (faith[0]) base = percent(faith[0]->first, faith[0]->second);
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : all_configs()) {
      const auto& fc = faith[c.index()];
      const auto& cc = comp[c.index()];
      std::int64_t missing = 0;
      for (const auto& row : d.table.outcomes) missing += row[c.index()] == kMissing;
      if (!fc) {
        rows.push_back({c.code(), c.t ? "1" : "0", c.f ? "1" : "0", c.s ? "1" : "0", "0", "NA", "NA", "NA",
                        "NA", "NA", std::to_string(missing)});
        continue;
      }
      const Rational fp = percent(fc->first, fc->second);
      rows.push_back({c.code(), c.t ? "1" : "0", c.f ? "1" : "0", c.s ? "1" : "0", std::to_string(fc->second),
                      std::to_string(cc->first), pct(percent(cc->first, cc->second)), std::to_string(fc->first),
                      pct(fp), base ? format_signed(fp - *base, 2) : "NA", std::to_string(missing)});
    }
    files["factorial_table.csv"] = csv_text({"config", "T", "F", "S", "n", "compile_count", "compile_pct",
                                             "faithful_count", "faithful_pct", "gain_vs_000", "missing_cells"},
                                            rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : d.effects) {
      rows.push_back({e.kind, e.label, format_signed(e.point, 4), e.ci ? format_fixed(e.ci->ci_low, 4) : "",
                      e.ci ? format_fixed(e.ci->ci_high, 4) : "", e.ci ? std::to_string(e.ci->resamples) : "",
                      e.ci ? "percentile" : ""});
    }
    files["effects.csv"] =
        csv_text({"kind", "effect", "point_pp", "ci_low_pp", "ci_high_pp", "resamples", "ci_method"}, rows);
  }
  {
    std::map<std::string, const SystemContainment*> cont;
    for (const auto& s : d.containment.systems) cont[s.system] = &s;
    std::vector<std::vector<std::string>> rows;
    for (const auto& [sys, s] : d.consensus) {
      const auto* c = cont.count(sys) ? cont.at(sys) : nullptr;
      rows.push_back({sys, std::to_string(s.pass_primary), std::to_string(s.pass_secondary),
                      std::to_string(s.pass_consensus),
                      s.consensus_rate ? pct(*s.consensus_rate * 100) : "undefined",
                      c ? std::to_string(c->primary_only) : "0", c ? std::to_string(c->secondary_only) : "0",
                      std::to_string(s.judged), std::to_string(s.judge_invalid), std::to_string(s.excluded.size())});
    }
    files["judges.csv"] = csv_text({"system", "pass_primary", "pass_secondary", "pass_consensus",
                                    "consensus_rate_pct", "primary_only", "secondary_only", "judged",
                                    "judge_invalid", "excluded"},
                                   rows);
    std::vector<std::vector<std::string>> drows;
    for (auto dm : kAllDomains) {
      drows.push_back({std::string(display_name(dm)),
                       std::to_string(d.containment.disagreements_by_domain[domain_index(dm)])});
    }
    files["disagreement_by_domain.csv"] = csv_text({"domain", "disagreements"}, drows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [cfg, pts] : d.curves) {
      for (const auto& p : pts) rows.push_back({cfg.code(), std::to_string(p.budget), detail::frac_as_pct(p.rate)});
    }
    files["efficiency_curve.csv"] = csv_text({"config", "budget", "rate_pct"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [cfg, dr] : d.domains) {
      for (const auto& r : dr) {
        if (r.empty) {
          rows.push_back({cfg.code(), std::string(display_name(r.domain)), "0", "", "", "", "", "", "empty"});
          continue;
        }
        rows.push_back({cfg.code(), std::string(display_name(r.domain)), std::to_string(r.runs),
                        format_fixed(r.compile_rate, 2), format_fixed(r.faithful_rate, 2),
                        r.conditional ? format_fixed(*r.conditional, 2) : "NA", format_fixed(r.mean_steps, 2),
                        format_fixed(r.median_steps, 1), ""});
      }
    }
    files["domain_breakdown.csv"] = csv_text(
        {"config", "domain", "runs", "compile", "faithful", "conditional", "mean_steps", "median_steps", "flag"},
        rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [label, effs] : d.domain_effects) {
      for (const auto& r : effs) {
        if (r.empty) {
          rows.push_back({label, std::string(display_name(r.domain)), "", "", "", "empty"});
        } else {
          rows.push_back({label, std::string(display_name(r.domain)), format_fixed(r.low, 3),
                          format_fixed(r.high, 3), format_signed(r.delta, 3), ""});
        }
      }
      if (std::any_of(effs.begin(), effs.end(), [](const DomainEffectRow& r) { return !r.empty; })) {
        rows.push_back({label, "Average", "", "", format_signed(average_delta(effs), 3), ""});
      }
    }
    files["domain_effects.csv"] = csv_text({"effect", "domain", "low", "high", "delta", "flag"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [cfg, u] : d.usage) {
      rows.push_back({cfg.code(), std::to_string(u.transcripts), std::to_string(u.translator),
                      std::to_string(u.repl), std::to_string(u.write_file), std::to_string(u.inspect),
                      std::to_string(u.resolve), std::to_string(u.search), std::to_string(u.s_total()),
                      std::to_string(u.other)});
    }
    files["usage.csv"] = csv_text({"config", "transcripts", "translator", "repl", "write_file", "inspect",
                                   "resolve", "search", "s_total", "other"},
                                  rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [id, cfg] : d.table.missing_cells()) rows.push_back({id, cfg.code()});
    files["missing_cells.csv"] = csv_text({"theorem_id", "config"}, rows);
  }

  files["efficiency_curve.svg"] = detail::curve_svg(d.curves, d.opts.max_budget);
  {
    std::vector<std::pair<std::string, double>> bars;
    const auto faith = column_counts(d.table);
    for (const auto& c : all_configs()) {
      if (faith[c.index()]) bars.emplace_back(c.code(), to_double(percent(faith[c.index()]->first, faith[c.index()]->second)));
    }
    files["factorial_rates.svg"] = detail::bars_svg("Rate by configuration", bars, 100.0, "%");
  }
  {
    std::vector<std::pair<std::string, double>> bars;
    double mx = 1;
    for (auto dm : kAllDomains) {
      const double v = static_cast<double>(d.containment.disagreements_by_domain[domain_index(dm)]);
      mx = std::max(mx, v);
      bars.emplace_back(std::string(display_name(dm)), v);
    }
    files["disagreement_by_domain.svg"] = detail::bars_svg("Judge disagreements by domain", bars, mx, "");
  }
  return files;
}

inline json report_manifest(const ReportData& d, const std::map<std::string, std::string>& files) {
  json listed = json::array();
  for (const auto& [name, content] : files) {
    listed.push_back(json{{"file", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }
  return json{{"experiment_id", d.opts.experiment_id},
              {"store_runs_sha256", d.store_hash},
              {"orchestrator_id", d.orchestrator_id},
              {"metric", to_string(d.opts.metric)},
              {"domain_metric", to_string(d.opts.domain_metric)},
              {"judges", json{{"primary", d.opts.primary_judge}, {"secondary", d.opts.secondary_judge}}},
              {"bootstrap", json{{"resamples", d.opts.resamples}, {"seed", d.opts.seed}, {"method", "percentile"}}},
              {"theorems", d.table.rows()},
              {"missing_cells", d.table.missing_count()},
              {"missing_configs", d.missing_columns},
              {"warnings", d.warnings},
              {"files", listed}};
}

/// Writes the bundle. No timestamps or host details go in, so the same
/// store and options always give byte-identical files.
inline json emit_report(const ReportData& d, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto files = render_report_files(d);
  for (const auto& [name, content] : files) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + (out_dir / name).string());
    out << content;
  }
  const json manifest = report_manifest(d, files);
  std::ofstream(out_dir / "manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << '\n';
  return manifest;
}

/// Column-aligned plain-text table for terminal output.
inline std::string text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  std::vector<std::size_t> w(header.size(), 0);
  for (std::size_t i = 0; i < header.size(); ++i) w[i] = width(header[i]);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], width(r[i]));
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      out << cell;
      if (i + 1 < w.size()) out << std::string(w[i] - width(cell) + 2, ' ');
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto x : w) total += x + 2;
  out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

}  // namespace autoform
