#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "selfdoubt/tokenizer.hpp"

namespace selfdoubt {

enum class TraceFormat { full_trace, thought_summary, unknown };

struct ModelDefaults {
  std::string canonical;
  TraceFormat format = TraceFormat::unknown;
  double tau_verify = 0.0;
  double tau_hedge = 0.0;
};

// Fallback thresholds: medians of the per-model defaults below.
inline constexpr double kFallbackTauVerify = 0.12;
inline constexpr double kFallbackTauHedge = 0.15;

namespace detail {

inline std::string normalize_model_name(std::string_view raw) {
  std::string s = fold_ascii(raw);
  for (char& c : s)
    if (c == '_' || c == ' ') c = '-';
  return s;
}

inline bool contains(const std::string& s, std::string_view needle) {
  return s.find(needle) != std::string::npos;
}

}  // namespace detail

/// Maps free-form model strings ("gpt_20b", "Qwen3 14B", "claude-sonnet-4.6")
/// onto the known model families with their shipped marker-classification
/// thresholds. Unknown models get the fallback medians.
inline std::optional<ModelDefaults> lookup_model(std::string_view raw) {
  const std::string s = detail::normalize_model_name(raw);
  using detail::contains;
  if (contains(s, "claude"))
    return ModelDefaults{"claude", TraceFormat::thought_summary, 0.09, 0.08};
  if (contains(s, "gemini"))
    return ModelDefaults{"gemini", TraceFormat::thought_summary, 0.12, 0.05};
  if (contains(s, "grok"))
    return ModelDefaults{"grok", TraceFormat::thought_summary, 0.10, 0.10};
  if (contains(s, "120b"))
    return ModelDefaults{"gpt-oss-120b", TraceFormat::full_trace, 0.10, 0.15};
  if (contains(s, "20b"))
    return ModelDefaults{"gpt-oss-20b", TraceFormat::full_trace, 0.14, 0.20};
  if (contains(s, "qwen")) {
    if (contains(s, "14b")) return ModelDefaults{"qwen3-14b", TraceFormat::full_trace, 0.15, 0.15};
    return ModelDefaults{"qwen3", TraceFormat::full_trace, 0.17, 0.20};
  }
  return std::nullopt;
}

inline TraceFormat model_trace_format(std::string_view raw) {
  auto m = lookup_model(raw);
  return m ? m->format : TraceFormat::unknown;
}

}  // namespace selfdoubt
