#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoform/error.hpp"

namespace autoform {

enum class Domain { RealAnalysis, ComplexAnalysis, Topology, Algebra };

inline constexpr std::array<Domain, 4> kAllDomains = {
    Domain::RealAnalysis, Domain::ComplexAnalysis, Domain::Topology, Domain::Algebra};

inline std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::RealAnalysis: return "RealAnalysis";
    case Domain::ComplexAnalysis: return "ComplexAnalysis";
    case Domain::Topology: return "Topology";
    case Domain::Algebra: return "Algebra";
  }
  return "?";
}

inline std::string_view display_name(Domain d) {
  switch (d) {
    case Domain::RealAnalysis: return "Real Analysis";
    case Domain::ComplexAnalysis: return "Complex Analysis";
    case Domain::Topology: return "Topology";
    case Domain::Algebra: return "Algebra";
  }
  return "?";
}

/// Accepts the serialized id or the display name, nothing looser.
inline std::optional<Domain> parse_domain(std::string_view label) {
  for (Domain d : kAllDomains) {
    if (label == to_string(d) || label == display_name(d)) return d;
  }
  return std::nullopt;
}

inline std::size_t domain_index(Domain d) { return static_cast<std::size_t>(d); }

enum class Factor { T, F, S };

inline constexpr std::array<Factor, 3> kAllFactors = {Factor::T, Factor::F, Factor::S};

inline char factor_letter(Factor f) {
  switch (f) {
    case Factor::T: return 'T';
    case Factor::F: return 'F';
    case Factor::S: return 'S';
  }
  return '?';
}

inline Factor parse_factor(std::string_view s) {
  if (s == "T" || s == "t") return Factor::T;
  if (s == "F" || s == "f") return Factor::F;
  if (s == "S" || s == "s") return Factor::S;
  throw ValidationError("unknown factor '" + std::string(s) + "' (expected T, F or S)");
}

/// Which tool groups are active: expert drafter (T), compiler feedback (F),
/// symbol search (S). 000 is the one-shot baseline.
struct ToolConfig {
  bool t = false;
  bool f = false;
  bool s = false;

  /// "TFS" bits, e.g. "110".
  std::string code() const {
    return {t ? '1' : '0', f ? '1' : '0', s ? '1' : '0'};
  }

  /// Column index in binary TFS order: 000 → 0 … 111 → 7.
  std::size_t index() const { return (t ? 4u : 0u) + (f ? 2u : 0u) + (s ? 1u : 0u); }

  bool level(Factor x) const {
    switch (x) {
      case Factor::T: return t;
      case Factor::F: return f;
      case Factor::S: return s;
    }
    return false;
  }

  bool is_baseline() const { return !t && !f && !s; }

  static ToolConfig from_index(std::size_t i) {
    if (i > 7) throw ValidationError("config index out of range");
    return ToolConfig{(i & 4u) != 0, (i & 2u) != 0, (i & 1u) != 0};
  }

  static ToolConfig parse(std::string_view code) {
    if (code.size() != 3) {
      throw ValidationError("config code must be three characters over {0,1}, got '" +
                            std::string(code) + "'");
    }
    ToolConfig c;
    std::array<bool*, 3> bits = {&c.t, &c.f, &c.s};
    for (std::size_t i = 0; i < 3; ++i) {
      if (code[i] != '0' && code[i] != '1') {
        throw ValidationError("config code must be three characters over {0,1}, got '" +
                              std::string(code) + "'");
      }
      *bits[i] = code[i] == '1';
    }
    return c;
  }

  friend bool operator==(const ToolConfig&, const ToolConfig&) = default;
  friend bool operator<(const ToolConfig& a, const ToolConfig& b) { return a.index() < b.index(); }
};

inline std::array<ToolConfig, 8> all_configs() {
  std::array<ToolConfig, 8> out{};
  for (std::size_t i = 0; i < 8; ++i) out[i] = ToolConfig::from_index(i);
  return out;
}

struct TheoremItem {
  std::string id;
  Domain domain = Domain::RealAnalysis;
  std::string statement_text;
  std::string source_ref;

  friend bool operator==(const TheoremItem&, const TheoremItem&) = default;
};

}  // namespace autoform
