#pragma once

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfdoubt/errors.hpp"
#include "selfdoubt/models.hpp"
#include "selfdoubt/scoring.hpp"
#include "selfdoubt/stats.hpp"

namespace selfdoubt {

struct RunKey {
  std::string model;
  std::string dataset;
  bool operator<(const RunKey& o) const {
    if (model != o.model) return model < o.model;
    return dataset < o.dataset;
  }
  bool operator==(const RunKey& o) const { return model == o.model && dataset == o.dataset; }
  std::string label() const { return model + "/" + dataset; }
};

inline const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> methods = {"sd", "hvr", "verb", "tl", "tlvb", "dse"};
  return methods;
}

struct RunMetrics {
  std::size_t n = 0;
  std::optional<double> auroc;
  std::optional<double> aurac;
};

struct WilcoxonRow {
  std::string comparison;  // e.g. "sd_vs_se"
  std::string metric;      // "auroc" or "aurac"
  std::string group = "all";
  double mean_delta = 0.0;
  WilcoxonResult test;
};

struct EvalReport {
  std::map<RunKey, std::map<std::string, RunMetrics>> per_run;
  // grouping name -> method -> (mean auroc, mean aurac, run count)
  struct GroupMean {
    double auroc = 0.0;
    double aurac = 0.0;
    std::size_t runs = 0;
  };
  std::map<std::string, std::map<std::string, GroupMean>> pooled;
  std::vector<WilcoxonRow> wilcoxon;
};

namespace detail {

/// Per-method score of one record, oriented so higher means more likely
/// correct; absent when the method's signals are missing.
inline std::optional<double> method_score(const std::string& method, const ScoredRecord& r,
                                          const NormStats& sd_stats,
                                          const BaselineRunStats& baseline_stats) {
  if (method == "sd") {
    if (!r.verb_conf) return std::nullopt;
    return selfdoubt_score(r.hvr, *r.verb_conf, sd_stats);
  }
  if (method == "hvr") return -r.hvr;
  if (method == "verb") {
    if (!r.verb_conf) return std::nullopt;
    return *r.verb_conf;
  }
  if (method == "tl") return -static_cast<double>(r.trace_length);
  if (method == "tlvb") {
    if (!r.verb_conf) return std::nullopt;
    auto scores = baseline_scores(r, baseline_stats);
    auto it = scores.find("tlvb");
    if (it == scores.end()) return std::nullopt;
    return it->second;
  }
  if (method == "dse") return discrete_se_score(r);
  throw validation_error("unknown method: " + method);
}

}  // namespace detail

/// Per-run AUROC/AURAC for the requested methods over a labeled scored
/// corpus. In oracle mode the fused score is standardized within each run; in
/// calibrated mode the per-model profile statistics are used instead.
inline std::map<RunKey, std::map<std::string, RunMetrics>> compute_run_metrics(
    const std::vector<ScoredRecord>& records, const std::vector<std::string>& methods,
    NormalizationMode mode = NormalizationMode::oracle,
    const std::map<std::string, CalibrationProfile>* profiles = nullptr,
    const std::vector<std::string>& group_by = {"model", "dataset"}) {
  bool by_model = false, by_dataset = false;
  for (const auto& g : group_by) {
    if (g == "model")
      by_model = true;
    else if (g == "dataset")
      by_dataset = true;
    else
      throw validation_error("group-by supports model and dataset, got: " + g);
  }

  std::map<RunKey, std::vector<const ScoredRecord*>> runs;
  std::size_t labeled = 0;
  for (const auto& r : records) {
    if (!r.correct) continue;
    ++labeled;
    RunKey key{by_model ? r.model : "all", by_dataset ? r.dataset : "all"};
    runs[key].push_back(&r);
  }
  if (labeled == 0)
    throw validation_error("evaluation requires correctness labels; none of the records carry one");

  std::map<RunKey, std::map<std::string, RunMetrics>> out;
  for (const auto& [key, run_records] : runs) {
    std::vector<ScoredRecord> run;
    run.reserve(run_records.size());
    for (const auto* p : run_records) run.push_back(*p);

    NormStats sd_stats;
    bool have_sd_stats = false;
    if (mode == NormalizationMode::calibrated) {
      if (!profiles) throw validation_error("calibrated mode requires profiles");
      auto it = profiles->find(key.model);
      if (it == profiles->end()) {
        auto single = profiles->size() == 1 ? profiles->begin() : profiles->end();
        if (single == profiles->end())
          throw validation_error("no profile for model: " + key.model);
        sd_stats = single->second.stats;
        have_sd_stats = true;
      } else {
        sd_stats = it->second.stats;
        have_sd_stats = true;
      }
    } else {
      try {
        sd_stats = run_norm_stats(run);
        have_sd_stats = true;
      } catch (const validation_error&) {
        have_sd_stats = false;  // no joined subset in this run
      }
    }
    const BaselineRunStats baseline_stats = baseline_run_stats(run);

    for (const auto& method : methods) {
      RunMetrics metrics;
      std::vector<double> scores;
      std::vector<bool> labels;
      for (const auto& r : run) {
        if (method == "sd" && !have_sd_stats) break;
        auto s = detail::method_score(method, r, sd_stats, baseline_stats);
        if (!s) continue;
        scores.push_back(*s);
        labels.push_back(*r.correct);
      }
      metrics.n = scores.size();
      if (!scores.empty()) {
        try {
          metrics.auroc = auroc(scores, labels);
        } catch (const validation_error&) {
          // single-class run: AUROC undefined, reported as absent
        }
        metrics.aurac = aurac(scores, labels);
      }
      out[key][method] = metrics;
    }
  }
  return out;
}

/// Unweighted means over the runs of a group; throws on an empty group.
inline EvalReport::GroupMean aggregate_group(
    const std::map<RunKey, std::map<std::string, RunMetrics>>& per_run,
    const std::string& method, const std::vector<RunKey>& keys) {
  EvalReport::GroupMean mean;
  for (const auto& key : keys) {
    auto run = per_run.find(key);
    if (run == per_run.end()) continue;
    auto m = run->second.find(method);
    if (m == run->second.end() || !m->second.auroc || !m->second.aurac) continue;
    mean.auroc += *m->second.auroc;
    mean.aurac += *m->second.aurac;
    mean.runs += 1;
  }
  if (mean.runs == 0) throw validation_error("aggregate: empty group for method " + method);
  mean.auroc /= static_cast<double>(mean.runs);
  mean.aurac /= static_cast<double>(mean.runs);
  return mean;
}

/// Full evaluation report: per-run metrics, pooled means over the standard
/// groupings (all runs, trace-format subgroups, per dataset), and paired
/// one-sided Wilcoxon tests of the fused score against every other method.
inline EvalReport build_report(const std::vector<ScoredRecord>& records,
                               const std::vector<std::string>& methods,
                               NormalizationMode mode = NormalizationMode::oracle,
                               const std::map<std::string, CalibrationProfile>* profiles = nullptr,
                               const std::vector<std::string>& group_by = {"model", "dataset"}) {
  EvalReport report;
  report.per_run = compute_run_metrics(records, methods, mode, profiles, group_by);

  std::vector<RunKey> all_keys, trace_keys, summary_keys;
  std::map<std::string, std::vector<RunKey>> dataset_keys;
  for (const auto& [key, metrics] : report.per_run) {
    all_keys.push_back(key);
    switch (model_trace_format(key.model)) {
      case TraceFormat::full_trace: trace_keys.push_back(key); break;
      case TraceFormat::thought_summary: summary_keys.push_back(key); break;
      case TraceFormat::unknown: break;
    }
    dataset_keys[key.dataset].push_back(key);
  }

  const auto pool = [&](const std::string& name, const std::vector<RunKey>& keys) {
    if (keys.empty()) return;
    for (const auto& method : methods) {
      try {
        report.pooled[name][method] = aggregate_group(report.per_run, method, keys);
      } catch (const validation_error&) {
        // method undefined on every run of the group
      }
    }
  };
  pool("all", all_keys);
  pool("full_trace", trace_keys);
  pool("summary", summary_keys);
  for (const auto& [dataset, keys] : dataset_keys) pool("dataset:" + dataset, keys);

  // paired tests on all runs plus the trace-format subgroups
  std::vector<std::pair<std::string, const std::vector<RunKey>*>> test_groups = {
      {"all", &all_keys}};
  if (!trace_keys.empty() && !summary_keys.empty()) {
    test_groups.emplace_back("full_trace", &trace_keys);
    test_groups.emplace_back("summary", &summary_keys);
  }
  for (const auto& [group_name, keys] : test_groups) {
    for (const auto& method : methods) {
      if (method == "sd") continue;
      for (const std::string metric : {"auroc", "aurac"}) {
        std::vector<double> deltas;
        for (const auto& key : *keys) {
          auto run = report.per_run.find(key);
          if (run == report.per_run.end()) continue;
          auto sd = run->second.find("sd");
          auto other = run->second.find(method);
          if (sd == run->second.end() || other == run->second.end()) continue;
          const std::optional<double> a = metric == "auroc" ? sd->second.auroc : sd->second.aurac;
          const std::optional<double> b =
              metric == "auroc" ? other->second.auroc : other->second.aurac;
          if (!a || !b) continue;
          deltas.push_back(*a - *b);
        }
        if (deltas.empty()) continue;
        WilcoxonRow row;
        row.comparison = "sd_vs_" + method;
        row.metric = metric;
        row.group = group_name;
        double sum = 0.0;
        for (double d : deltas) sum += d;
        row.mean_delta = sum / static_cast<double>(deltas.size());
        try {
          row.test = wilcoxon_one_sided(deltas);
        } catch (const validation_error&) {
          continue;  // all deltas zero
        }
        report.wilcoxon.push_back(std::move(row));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline json report_to_json(const EvalReport& report) {
  json j;
  json runs = json::array();
  for (const auto& [key, methods] : report.per_run) {
    for (const auto& [method, m] : methods) {
      json row;
      row["model"] = key.model;
      row["dataset"] = key.dataset;
      row["method"] = method;
      row["n"] = m.n;
      row["auroc"] = m.auroc ? json(*m.auroc) : json(nullptr);
      row["aurac"] = m.aurac ? json(*m.aurac) : json(nullptr);
      runs.push_back(row);
    }
  }
  j["per_run"] = runs;

  json pooled = json::object();
  for (const auto& [group, methods] : report.pooled) {
    json g = json::object();
    for (const auto& [method, mean] : methods)
      g[method] = {{"auroc", mean.auroc}, {"aurac", mean.aurac}, {"runs", mean.runs}};
    pooled[group] = g;
  }
  j["pooled"] = pooled;

  json tests = json::array();
  for (const auto& row : report.wilcoxon) {
    tests.push_back({{"comparison", row.comparison},
                     {"metric", row.metric},
                     {"group", row.group},
                     {"mean_delta", row.mean_delta},
                     {"wins", row.test.wins},
                     {"draws", row.test.draws},
                     {"losses", row.test.losses},
                     {"W", row.test.w},
                     {"p_one_sided", row.test.p},
                     {"exact", row.test.exact}});
  }
  j["wilcoxon"] = tests;
  return j;
}

inline std::string report_to_csv(const EvalReport& report) {
  std::string out = "model,dataset,method,n,auroc,aurac\n";
  for (const auto& [key, methods] : report.per_run) {
    for (const auto& [method, m] : methods) {
      out += key.model + "," + key.dataset + "," + method + "," + std::to_string(m.n) + ",";
      out += (m.auroc ? format_fixed(*m.auroc) : "") + std::string(",");
      out += (m.aurac ? format_fixed(*m.aurac) : "") + "\n";
    }
  }
  return out;
}

inline std::string wilcoxon_to_csv(const EvalReport& report) {
  // the flat CSV carries the all-runs tests; subgroup rows live in the JSON report
  std::string out = "comparison,metric,mean_delta,W,D,L,W_stat,p\n";
  for (const auto& row : report.wilcoxon) {
    if (row.group != "all") continue;
    out += row.comparison + "," + row.metric + "," + format_fixed(row.mean_delta) + ",";
    out += std::to_string(row.test.wins) + "," + std::to_string(row.test.draws) + "," +
           std::to_string(row.test.losses) + ",";
    out += format_fixed(row.test.w, 1) + "," + format_fixed(row.test.p) + "\n";
  }
  return out;
}

}  // namespace selfdoubt
