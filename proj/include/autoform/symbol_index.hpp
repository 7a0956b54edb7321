#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoform/error.hpp"

namespace autoform {

using json = nlohmann::json;

struct SymbolInfo {
  std::string type;
  std::string definition;  // what a print directive shows; may be empty
};

/// Library symbols known to the stub checker and ranked by the resolver.
class SymbolTable {
 public:
  SymbolTable() = default;

  void add(std::string name, std::string type, std::string definition = {}) {
    symbols_[std::move(name)] = SymbolInfo{std::move(type), std::move(definition)};
  }

  const SymbolInfo* find(std::string_view name) const {
    auto it = symbols_.find(std::string(name));
    return it == symbols_.end() ? nullptr : &it->second;
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }
  bool empty() const { return symbols_.empty(); }
  std::size_t size() const { return symbols_.size(); }
  const std::map<std::string, SymbolInfo>& entries() const { return symbols_; }

  /// One JSON object per line: {"name": ..., "type": ..., "definition": ...}.
  static SymbolTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open symbol index " + path.string());
    SymbolTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        json j = json::parse(line);
        t.add(j.at("name").get<std::string>(), j.at("type").get<std::string>(),
              j.value("definition", std::string{}));
      } catch (const json::exception& e) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return t;
  }

  /// A small slice of Mathlib, enough for desk-scale runs across the four
  /// benchmark domains.
  static SymbolTable builtin() {
    SymbolTable t;
    // Algebra
    t.add("Polynomial.natDegree", "{R : Type u} → [inst : Semiring R] → Polynomial R → ℕ",
          "def Polynomial.natDegree : Polynomial R → ℕ := fun p => WithBot.unbot' 0 p.degree");
    t.add("Polynomial.degree", "{R : Type u} → [inst : Semiring R] → Polynomial R → WithBot ℕ");
    t.add("Polynomial.eval", "{R : Type u} → [inst : Semiring R] → R → Polynomial R → R",
          "def Polynomial.eval : R → Polynomial R → R := fun x p => Polynomial.eval₂ (RingHom.id R) x p");
    t.add("Polynomial.roots", "{R : Type u} → [inst : CommRing R] → [inst : IsDomain R] → Polynomial R → Multiset R");
    t.add("Polynomial.Monic", "{R : Type u} → [inst : Semiring R] → Polynomial R → Prop");
    t.add("Polynomial.IsRoot", "{R : Type u} → [inst : Semiring R] → Polynomial R → R → Prop");
    t.add("Polynomial.C", "{R : Type u} → [inst : Semiring R] → R →+* Polynomial R");
    t.add("Polynomial.X", "{R : Type u} → [inst : Semiring R] → Polynomial R");
    t.add("Subgroup.Normal", "{G : Type u} → [inst : Group G] → Subgroup G → Prop");
    t.add("Subgroup.index", "{G : Type u} → [inst : Group G] → Subgroup G → ℕ");
    t.add("MonoidHom.ker", "{G : Type u} → {M : Type v} → [inst : Group G] → [inst : MulOneClass M] → (G →* M) → Subgroup G");
    t.add("Ideal.IsPrime", "{α : Type u} → [inst : Semiring α] → Ideal α → Prop");
    t.add("Ideal.IsMaximal", "{α : Type u} → [inst : Semiring α] → Ideal α → Prop");
    t.add("Ideal.span", "{α : Type u} → [inst : Semiring α] → Set α → Ideal α");
    t.add("Nat.Prime", "ℕ → Prop");
    t.add("orderOf", "{G : Type u} → [inst : Monoid G] → G → ℕ");
    // Real analysis
    t.add("Real.sqrt", "ℝ → ℝ");
    t.add("Real.exp", "ℝ → ℝ");
    t.add("Real.log", "ℝ → ℝ");
    t.add("Real.cos", "ℝ → ℝ");
    t.add("Real.sin", "ℝ → ℝ");
    t.add("Real.pi", "ℝ");
    t.add("Filter.Tendsto", "{α : Type u} → {β : Type v} → (α → β) → Filter α → Filter β → Prop");
    t.add("Filter.atTop", "{α : Type u} → [inst : Preorder α] → Filter α");
    t.add("Set.Icc", "{α : Type u} → [inst : Preorder α] → α → α → Set α");
    t.add("Set.Ioo", "{α : Type u} → [inst : Preorder α] → α → α → Set α");
    t.add("Finset.sum", "{β : Type u} → {α : Type v} → [inst : AddCommMonoid β] → Finset α → (α → β) → β");
    t.add("Finset.range", "ℕ → Finset ℕ");
    t.add("HasDerivAt", "{𝕜 : Type u} → [inst : NontriviallyNormedField 𝕜] → {F : Type v} → (𝕜 → F) → F → 𝕜 → Prop");
    t.add("ContinuousOn", "{α : Type u} → {β : Type v} → [inst : TopologicalSpace α] → [inst : TopologicalSpace β] → (α → β) → Set α → Prop");
    t.add("MeasureTheory.integral", "{α : Type u} → {G : Type v} → [inst : MeasurableSpace α] → MeasureTheory.Measure α → (α → G) → G");
    // Complex analysis
    t.add("Complex.abs", "ℂ → ℝ");
    t.add("Complex.exp", "ℂ → ℂ");
    t.add("Complex.I", "ℂ");
    t.add("Complex.re", "ℂ → ℝ");
    t.add("Complex.im", "ℂ → ℝ");
    t.add("Complex.log", "ℂ → ℂ");
    t.add("DifferentiableOn", "(𝕜 : Type u) → [inst : NontriviallyNormedField 𝕜] → {E : Type v} → {F : Type w} → (E → F) → Set E → Prop");
    t.add("AnalyticAt", "(𝕜 : Type u) → [inst : NontriviallyNormedField 𝕜] → {E : Type v} → {F : Type w} → (E → F) → E → Prop");
    t.add("Metric.ball", "{α : Type u} → [inst : PseudoMetricSpace α] → α → ℝ → Set α");
    t.add("Metric.closedBall", "{α : Type u} → [inst : PseudoMetricSpace α] → α → ℝ → Set α");
    // Topology
    t.add("IsOpen", "{X : Type u} → [inst : TopologicalSpace X] → Set X → Prop");
    t.add("IsClosed", "{X : Type u} → [inst : TopologicalSpace X] → Set X → Prop");
    t.add("IsCompact", "{X : Type u} → [inst : TopologicalSpace X] → Set X → Prop");
    t.add("IsConnected", "{α : Type u} → [inst : TopologicalSpace α] → Set α → Prop");
    t.add("Continuous", "{X : Type u} → {Y : Type v} → [inst : TopologicalSpace X] → [inst : TopologicalSpace Y] → (X → Y) → Prop");
    t.add("Set.univ", "{α : Type u} → Set α");
    t.add("closure", "{X : Type u} → [inst : TopologicalSpace X] → Set X → Set X");
    t.add("interior", "{X : Type u} → [inst : TopologicalSpace X] → Set X → Set X");
    t.add("TopologicalSpace.IsTopologicalBasis", "{α : Type u} → [t : TopologicalSpace α] → Set (Set α) → Prop");
    t.add("T2Space", "(X : Type u) → [inst : TopologicalSpace X] → Prop");
    return t;
  }

 private:
  std::map<std::string, SymbolInfo> symbols_;
};

/// Plain Levenshtein distance (unit costs).
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 1 - distance / max(len); 1.0 for identical strings.
inline double similarity(std::string_view a, std::string_view b) {
  const std::size_t n = std::max(a.size(), b.size());
  if (n == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(n);
}

struct ResolveCandidate {
  std::string name;
  std::string type;
  double score = 0.0;
};

struct ResolveOptions {
  double namespace_bonus = 0.1;
  double case_penalty = 0.01;
};

/// Ranks index entries against `token`. The score of a name is the best
/// case-insensitive similarity between the token and any dot-suffix of the
/// name ("Polynomial.natDegree" offers "natDegree" and the full name), minus
/// a small penalty when only the case-folded forms agree, plus a bonus when
/// the name lives in one of `namespace_hints`. Ties break by name.
inline std::vector<ResolveCandidate> rank_symbols(const SymbolTable& index, std::string_view token,
                                                  const std::vector<std::string>& namespace_hints,
                                                  std::size_t top_k,
                                                  const ResolveOptions& opts = {}) {
  if (token.empty()) throw ValidationError("token must be non-empty");
  if (top_k == 0) throw ValidationError("top_k must be a positive integer");
  if (index.empty()) throw ConfigError("symbol index is empty");

  auto lower = [](std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const std::string tok_lower = lower(token);

  std::vector<ResolveCandidate> scored;
  scored.reserve(index.size());
  for (const auto& [name, info] : index.entries()) {
    double best = 0.0;
    std::size_t pos = 0;
    while (true) {
      std::string_view suffix = std::string_view(name).substr(pos);
      double s = similarity(tok_lower, lower(suffix));
      if (s > 0.0 && suffix != token && lower(suffix) == tok_lower) s -= opts.case_penalty;
      best = std::max(best, s);
      auto dot = name.find('.', pos);
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    for (const auto& hint : namespace_hints) {
      if (!hint.empty() && name.size() > hint.size() && name.compare(0, hint.size(), hint) == 0 &&
          name[hint.size()] == '.') {
        best += opts.namespace_bonus;
        break;
      }
    }
    scored.push_back({name, info.type, best});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  if (scored.size() > top_k) scored.resize(top_k);
  return scored;
}

}  // namespace autoform
