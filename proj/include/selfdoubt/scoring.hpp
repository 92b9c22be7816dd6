#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfdoubt/errors.hpp"
#include "selfdoubt/matcher.hpp"
#include "selfdoubt/trace_store.hpp"

namespace selfdoubt {

inline constexpr double kSigmaEpsilon = 1e-12;

/// Mean/spread scalars for the two fused channels. In calibrated mode they
/// come from a stored profile; in oracle mode from the evaluation run itself.
struct NormStats {
  double mu_neg_hvr = 0.0;
  double sigma_neg_hvr = 0.0;
  double mu_v = 0.0;
  double sigma_v = 0.0;
};

enum class NormalizationMode { oracle, calibrated };

/// The deployment scalars for one model plus the zero-hedge gate bookkeeping.
struct CalibrationProfile {
  std::string model;
  NormStats stats;
  std::size_t n_cal = 0;
  std::size_t n_zero_hedge = 0;  // calibration traces with hvr == 0
  bool gate_enabled = false;     // n_zero_hedge >= 4
  double epsilon = kSigmaEpsilon;
};

inline constexpr std::size_t kGateMinZeroHedge = 4;

namespace detail {

inline std::pair<double, double> mean_and_population_sd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

}  // namespace detail

struct CalibrationSample {
  double hvr = 0.0;
  double verb_conf = 0.0;
};

/// Builds the per-model profile from calibration records that carry both
/// signals. Population standard deviations; the zero-hedge gate turns on only
/// when at least four calibration traces had no hedge markers.
inline CalibrationProfile calibrate(const std::vector<CalibrationSample>& samples,
                                    const std::string& model = "") {
  if (samples.size() < 2)
    throw validation_error("calibrate: need at least 2 records with both signals, got " +
                           std::to_string(samples.size()));
  std::vector<double> neg_hvr, verb;
  neg_hvr.reserve(samples.size());
  verb.reserve(samples.size());
  std::size_t zero_hedge = 0;
  for (const auto& s : samples) {
    neg_hvr.push_back(-s.hvr);
    verb.push_back(s.verb_conf);
    if (s.hvr == 0.0) ++zero_hedge;
  }
  CalibrationProfile profile;
  profile.model = model;
  auto [mu_h, sd_h] = detail::mean_and_population_sd(neg_hvr);
  auto [mu_v, sd_v] = detail::mean_and_population_sd(verb);
  profile.stats = {mu_h, sd_h, mu_v, sd_v};
  profile.n_cal = samples.size();
  profile.n_zero_hedge = zero_hedge;
  profile.gate_enabled = zero_hedge >= kGateMinZeroHedge;
  return profile;
}

/// Additive z-score fusion: z(-hvr) + z(verb_conf). A channel whose sigma is
/// below epsilon contributes zero instead of blowing up.
inline double selfdoubt_score(double hvr, double verb_conf, const NormStats& stats,
                              double epsilon = kSigmaEpsilon) {
  double s = 0.0;
  if (stats.sigma_neg_hvr >= epsilon) s += (-hvr - stats.mu_neg_hvr) / stats.sigma_neg_hvr;
  if (stats.sigma_v >= epsilon) s += (verb_conf - stats.mu_v) / stats.sigma_v;
  return s;
}

inline double selfdoubt_score(double hvr, double verb_conf, const CalibrationProfile& profile) {
  return selfdoubt_score(hvr, verb_conf, profile.stats, profile.epsilon);
}

// ---------------------------------------------------------------------------
// Scored records
// ---------------------------------------------------------------------------

/// Per-record signal bundle produced by running a matcher over a corpus.
struct ScoredRecord {
  std::string id;
  std::string model;
  std::string dataset;
  long h = 0;
  long v = 0;
  double hvr = 0.0;
  std::optional<double> verb_conf;
  std::optional<double> selfdoubt;  // present iff verb_conf is present and a profile was applied
  NormalizationMode normalization_mode = NormalizationMode::oracle;
  std::optional<bool> correct;
  std::size_t trace_length = 0;
  std::optional<std::vector<std::string>> sampled_answers;
  std::vector<MarkerSpan> hedge_spans;
  std::vector<MarkerSpan> verify_spans;
};

inline ScoredRecord score_record(const TraceRecord& record, const CompiledMatcher& matcher,
                                 const CalibrationProfile* profile = nullptr,
                                 bool keep_spans = false) {
  ScoredRecord out;
  out.id = record.id;
  out.model = record.model;
  out.dataset = record.dataset;
  MatchResult match = matcher.count_markers(record.trace_text);
  out.h = match.h;
  out.v = match.v;
  out.hvr = match.hvr;
  if (keep_spans) {
    out.hedge_spans = std::move(match.hedge_spans);
    out.verify_spans = std::move(match.verify_spans);
  }
  out.verb_conf = effective_confidence(record);
  if (profile && out.verb_conf) {
    out.selfdoubt = selfdoubt_score(out.hvr, *out.verb_conf, *profile);
    out.normalization_mode = NormalizationMode::calibrated;
  }
  out.correct = record.correct;
  out.trace_length = record.trace_length();
  out.sampled_answers = record.sampled_answers;
  return out;
}

inline std::vector<ScoredRecord> score_corpus(const Corpus& corpus, const CompiledMatcher& matcher,
                                              const CalibrationProfile* profile = nullptr,
                                              bool keep_spans = false) {
  std::vector<ScoredRecord> out;
  out.reserve(corpus.records.size());
  for (const auto& r : corpus.records) out.push_back(score_record(r, matcher, profile, keep_spans));
  return out;
}

/// Calibration samples from a corpus: records where both channels exist.
inline std::vector<CalibrationSample> calibration_samples(const Corpus& corpus,
                                                          const CompiledMatcher& matcher) {
  std::vector<CalibrationSample> samples;
  for (const auto& r : corpus.records) {
    auto verb = effective_confidence(r);
    if (!verb) continue;
    samples.push_back({matcher.count_markers(r.trace_text).hvr, *verb});
  }
  return samples;
}

/// Oracle-mode statistics over the usable joined subset of a run.
inline NormStats run_norm_stats(const std::vector<ScoredRecord>& records) {
  std::vector<double> neg_hvr, verb;
  for (const auto& r : records) {
    if (!r.verb_conf) continue;
    neg_hvr.push_back(-r.hvr);
    verb.push_back(*r.verb_conf);
  }
  if (neg_hvr.empty()) throw validation_error("run_norm_stats: no records with both signals");
  auto [mu_h, sd_h] = detail::mean_and_population_sd(neg_hvr);
  auto [mu_v, sd_v] = detail::mean_and_population_sd(verb);
  return {mu_h, sd_h, mu_v, sd_v};
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// z-statistics for the trace-length + verbalized-confidence fusion baseline,
/// computed over the run's records that carry a confidence value.
struct BaselineRunStats {
  double mu_neg_len = 0.0;
  double sigma_neg_len = 0.0;
  double mu_v = 0.0;
  double sigma_v = 0.0;
};

inline BaselineRunStats baseline_run_stats(const std::vector<ScoredRecord>& records) {
  std::vector<double> neg_len, verb;
  for (const auto& r : records) {
    if (!r.verb_conf) continue;
    neg_len.push_back(-static_cast<double>(r.trace_length));
    verb.push_back(*r.verb_conf);
  }
  BaselineRunStats stats;
  if (neg_len.empty()) return stats;
  auto [mu_l, sd_l] = detail::mean_and_population_sd(neg_len);
  auto [mu_v, sd_v] = detail::mean_and_population_sd(verb);
  return {mu_l, sd_l, mu_v, sd_v};
}

/// Negative Shannon entropy of the exact-match answer distribution; higher
/// means more consistent sampling. Absent when no samples are stored.
inline std::optional<double> discrete_se_score(const ScoredRecord& r) {
  if (!r.sampled_answers || r.sampled_answers->empty()) return std::nullopt;
  std::map<std::string, std::size_t> clusters;
  for (const auto& a : *r.sampled_answers) clusters[a] += 1;
  const double n = static_cast<double>(r.sampled_answers->size());
  double entropy = 0.0;
  for (const auto& [answer, count] : clusters) {
    const double p = static_cast<double>(count) / n;
    entropy -= p * std::log(p);
  }
  return -entropy;
}

/// All baseline scores available for a record, oriented so that higher means
/// more likely correct.
inline std::map<std::string, double> baseline_scores(const ScoredRecord& r,
                                                     const BaselineRunStats& stats) {
  std::map<std::string, double> out;
  out["tl"] = -static_cast<double>(r.trace_length);
  if (r.verb_conf) {
    out["verb"] = *r.verb_conf;
    double z = 0.0;
    if (stats.sigma_neg_len >= kSigmaEpsilon)
      z += (-static_cast<double>(r.trace_length) - stats.mu_neg_len) / stats.sigma_neg_len;
    if (stats.sigma_v >= kSigmaEpsilon) z += (*r.verb_conf - stats.mu_v) / stats.sigma_v;
    out["tlvb"] = z;
  }
  if (auto dse = discrete_se_score(r)) out["dse"] = *dse;
  return out;
}

// ---------------------------------------------------------------------------
// Profile serialization
// ---------------------------------------------------------------------------

inline json profile_to_json(const CalibrationProfile& p) {
  json j;
  j["model"] = p.model;
  j["mu_neg_hvr"] = p.stats.mu_neg_hvr;
  j["sigma_neg_hvr"] = p.stats.sigma_neg_hvr;
  j["mu_v"] = p.stats.mu_v;
  j["sigma_v"] = p.stats.sigma_v;
  j["n_cal"] = p.n_cal;
  j["n_zero_hedge"] = p.n_zero_hedge;
  j["gate_enabled"] = p.gate_enabled;
  return j;
}

inline CalibrationProfile profile_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) throw validation_error(origin + ": profile is not an object");
  CalibrationProfile p;
  try {
    p.model = j.at("model").get<std::string>();
    p.stats.mu_neg_hvr = j.at("mu_neg_hvr").get<double>();
    p.stats.sigma_neg_hvr = j.at("sigma_neg_hvr").get<double>();
    p.stats.mu_v = j.at("mu_v").get<double>();
    p.stats.sigma_v = j.at("sigma_v").get<double>();
    p.n_cal = j.at("n_cal").get<std::size_t>();
    p.n_zero_hedge = j.at("n_zero_hedge").get<std::size_t>();
    p.gate_enabled = j.at("gate_enabled").get<bool>();
  } catch (const json::exception& e) {
    throw validation_error(origin + ": malformed profile: " + e.what());
  }
  if (p.n_zero_hedge > p.n_cal)
    throw validation_error(origin + ": n_zero_hedge exceeds n_cal");
  if (p.gate_enabled != (p.n_zero_hedge >= kGateMinZeroHedge))
    throw validation_error(origin + ": gate_enabled inconsistent with n_zero_hedge");
  return p;
}

inline CalibrationProfile load_profile(const std::string& path) {
  json j = json::parse(read_file_bytes(path), nullptr, false);
  if (j.is_discarded()) throw validation_error(path + ": invalid JSON");
  return profile_from_json(j, path);
}

inline void save_profile(const CalibrationProfile& p, const std::string& path) {
  write_text_file(path, profile_to_json(p).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Scored-record serialization (the `score` CLI output format)
// ---------------------------------------------------------------------------

inline json scored_record_to_json(const ScoredRecord& r, bool emit_spans = false) {
  json j;
  j["id"] = r.id;
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["h"] = r.h;
  j["v"] = r.v;
  j["hvr"] = r.hvr;
  j["verb_conf"] = r.verb_conf ? json(*r.verb_conf) : json(nullptr);
  j["selfdoubt"] = r.selfdoubt ? json(*r.selfdoubt) : json(nullptr);
  j["trace_length"] = r.trace_length;
  if (r.correct) j["correct"] = *r.correct;
  if (r.sampled_answers) j["sampled_answers"] = *r.sampled_answers;
  if (emit_spans) {
    const auto spans_json = [](const std::vector<MarkerSpan>& spans) {
      json arr = json::array();
      for (const auto& s : spans)
        arr.push_back({{"start", s.begin}, {"end", s.end}, {"marker", s.marker}});
      return arr;
    };
    j["hedge_spans"] = spans_json(r.hedge_spans);
    j["verify_spans"] = spans_json(r.verify_spans);
  }
  return j;
}

inline ScoredRecord scored_record_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) throw validation_error(origin + ": scored record is not an object");
  ScoredRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.model = j.value("model", "");
    r.dataset = j.value("dataset", "");
    r.h = j.at("h").get<long>();
    r.v = j.at("v").get<long>();
    r.hvr = j.at("hvr").get<double>();
    if (j.contains("verb_conf") && !j.at("verb_conf").is_null())
      r.verb_conf = j.at("verb_conf").get<double>();
    if (j.contains("selfdoubt") && !j.at("selfdoubt").is_null())
      r.selfdoubt = j.at("selfdoubt").get<double>();
    r.trace_length = j.value("trace_length", static_cast<std::size_t>(0));
    if (j.contains("correct") && !j.at("correct").is_null())
      r.correct = j.at("correct").get<bool>();
    if (j.contains("sampled_answers") && !j.at("sampled_answers").is_null())
      r.sampled_answers = j.at("sampled_answers").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw validation_error(origin + ": malformed scored record: " + e.what());
  }
  return r;
}

inline std::vector<ScoredRecord> load_scored_records(const std::string& path) {
  std::vector<ScoredRecord> out;
  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    if (is_blank(line)) return;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw validation_error(path + ": line " + std::to_string(line_no) + ": invalid JSON");
    out.push_back(scored_record_from_json(j, path + ": line " + std::to_string(line_no)));
  });
  return out;
}

}  // namespace selfdoubt
