#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfdoubt/errors.hpp"
#include "selfdoubt/scoring.hpp"
#include "selfdoubt/stats.hpp"

namespace selfdoubt {

enum class Outcome { accept, defer };
enum class DecisionTier { tier1_gate, tier2_score, tier2_missing_signal };

/// Behavior when a record reaches tier 2 without a confidence value:
/// defer (default) or score on the hedge channel alone.
enum class Tier2Fallback { defer, hvr_only };

struct Decision {
  std::string record_id;
  Outcome outcome = Outcome::defer;
  DecisionTier tier = DecisionTier::tier2_score;
  std::optional<double> score;
  double tau = 0.0;
};

inline const char* to_string(Outcome o) { return o == Outcome::accept ? "accept" : "defer"; }

inline const char* to_string(DecisionTier t) {
  switch (t) {
    case DecisionTier::tier1_gate: return "tier1_gate";
    case DecisionTier::tier2_score: return "tier2_score";
    case DecisionTier::tier2_missing_signal: return "tier2_missing_signal";
  }
  return "tier2_score";
}

/// Two-tier accept/defer policy. Tier 1 accepts any trace with zero hedge
/// matches when the gate is enabled, without consulting the confidence value.
/// Tier 2 accepts when the calibrated fused score clears tau (inclusive).
inline Decision decide(long h, double hvr, std::optional<double> verb_conf,
                       const CalibrationProfile& profile, double tau,
                       Tier2Fallback fallback = Tier2Fallback::defer,
                       const std::string& record_id = "") {
  Decision d;
  d.record_id = record_id;
  d.tau = tau;
  if (profile.gate_enabled && h == 0) {
    d.outcome = Outcome::accept;
    d.tier = DecisionTier::tier1_gate;
    return d;
  }
  if (!verb_conf) {
    if (fallback == Tier2Fallback::defer) {
      d.outcome = Outcome::defer;
      d.tier = DecisionTier::tier2_missing_signal;
      return d;
    }
    NormStats hvr_only = profile.stats;
    hvr_only.sigma_v = 0.0;  // silences the confidence channel
    d.score = selfdoubt_score(hvr, 0.0, hvr_only, profile.epsilon);
  } else {
    d.score = selfdoubt_score(hvr, *verb_conf, profile);
  }
  d.outcome = *d.score >= tau ? Outcome::accept : Outcome::defer;
  d.tier = DecisionTier::tier2_score;
  return d;
}

inline Decision decide(const ScoredRecord& r, const CalibrationProfile& profile, double tau,
                       Tier2Fallback fallback = Tier2Fallback::defer) {
  return decide(r.h, r.hvr, r.verb_conf, profile, tau, fallback, r.id);
}

struct CurvePoint {
  double tau = 0.0;
  double coverage = 0.0;
  std::optional<double> accuracy;  // accepted-subset accuracy; absent when nothing accepted
  double tier1_share = 0.0;
};

struct CascadeReport {
  double tau = 0.0;  // the operating point the report was asked about
  double coverage = 0.0;
  std::optional<double> accepted_accuracy;
  double tier1_share = 0.0;
  std::vector<CurvePoint> curve;
};

/// Default tau grid: evenly spaced points (101 by default) spanning the
/// observed score range, padded by a hair on both sides, plus the symmetric
/// default tau = 0.
inline std::vector<double> default_tau_grid(const std::vector<double>& scores,
                                            int grid_points = 101) {
  if (grid_points < 2) throw validation_error("tau grid needs at least 2 points");
  std::vector<double> taus;
  if (!scores.empty()) {
    const double lo = *std::min_element(scores.begin(), scores.end()) - 1e-9;
    const double hi = *std::max_element(scores.begin(), scores.end()) + 1e-9;
    for (int i = 0; i < grid_points; ++i)
      taus.push_back(lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(grid_points - 1));
  }
  taus.push_back(0.0);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

/// Accuracy-coverage sweep over a labeled scored corpus.
inline CascadeReport sweep_tau(const std::vector<ScoredRecord>& records,
                               const CalibrationProfile& profile,
                               std::vector<double> taus = {}, double report_tau = 0.0,
                               Tier2Fallback fallback = Tier2Fallback::defer,
                               int grid_points = 101) {
  std::vector<const ScoredRecord*> labeled;
  for (const auto& r : records)
    if (r.correct) labeled.push_back(&r);
  if (labeled.empty()) throw validation_error("sweep_tau: no labeled records");

  struct Entry {
    bool tier1 = false;
    std::optional<double> score;
    bool correct = false;
  };
  std::vector<Entry> entries;
  entries.reserve(labeled.size());
  std::vector<double> observed_scores;
  for (const auto* r : labeled) {
    Decision d = decide(*r, profile, 0.0, fallback);
    Entry e;
    e.tier1 = d.tier == DecisionTier::tier1_gate;
    e.score = d.score;
    e.correct = *r->correct;
    if (e.score) observed_scores.push_back(*e.score);
    entries.push_back(e);
  }
  if (taus.empty()) taus = default_tau_grid(observed_scores, grid_points);

  const double total = static_cast<double>(entries.size());
  CascadeReport report;
  report.tau = report_tau;

  const auto evaluate_point = [&](double tau) {
    CurvePoint p;
    p.tau = tau;
    std::size_t accepted = 0, accepted_correct = 0, tier1 = 0;
    for (const auto& e : entries) {
      bool accept = e.tier1 || (e.score && *e.score >= tau);
      if (e.tier1) ++tier1;
      if (accept) {
        ++accepted;
        if (e.correct) ++accepted_correct;
      }
    }
    p.coverage = static_cast<double>(accepted) / total;
    p.tier1_share = static_cast<double>(tier1) / total;
    if (accepted > 0)
      p.accuracy = static_cast<double>(accepted_correct) / static_cast<double>(accepted);
    return p;
  };

  for (double tau : taus) report.curve.push_back(evaluate_point(tau));
  const CurvePoint at = evaluate_point(report_tau);
  report.coverage = at.coverage;
  report.accepted_accuracy = at.accuracy;
  report.tier1_share = at.tier1_share;
  return report;
}

// ---------------------------------------------------------------------------
// Zero-hedge gate report
// ---------------------------------------------------------------------------

struct GateGroupStats {
  std::string model;
  std::string dataset;
  std::size_t n = 0;        // labeled rows
  std::size_t n_zero = 0;   // rows with hvr == 0
  std::size_t n_zero_correct = 0;
  double coverage = 0.0;
  std::optional<double> precision;            // absent when n_zero == 0
  std::optional<std::pair<double, double>> wilson_ci;
};

/// Precision and coverage of the zero-hedge subset per (model, dataset) group
/// plus a pooled row, with 95% Wilson intervals.
inline std::vector<GateGroupStats> gate_report(const std::vector<ScoredRecord>& records) {
  std::map<std::pair<std::string, std::string>, GateGroupStats> groups;
  GateGroupStats pooled;
  pooled.model = "all";
  pooled.dataset = "pooled";
  for (const auto& r : records) {
    if (!r.correct) continue;  // unlabeled rows are excluded from all metrics
    auto& g = groups[{r.model, r.dataset}];
    g.model = r.model;
    g.dataset = r.dataset;
    for (GateGroupStats* s : {&g, &pooled}) {
      s->n += 1;
      if (r.hvr == 0.0) {
        s->n_zero += 1;
        if (*r.correct) s->n_zero_correct += 1;
      }
    }
  }
  if (pooled.n == 0) throw validation_error("gate_report: no labeled records");

  std::vector<GateGroupStats> out;
  for (auto& [key, g] : groups) out.push_back(g);
  out.push_back(pooled);
  for (auto& g : out) {
    g.coverage = static_cast<double>(g.n_zero) / static_cast<double>(g.n);
    if (g.n_zero > 0) {
      g.precision = static_cast<double>(g.n_zero_correct) / static_cast<double>(g.n_zero);
      g.wilson_ci = wilson_interval(g.n_zero_correct, g.n_zero, 0.95);
    }
  }
  return out;
}

}  // namespace selfdoubt

