#pragma once

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "selfdoubt/cascade.hpp"
#include "selfdoubt/discovery.hpp"
#include "selfdoubt/embedding.hpp"
#include "selfdoubt/embedding_http.hpp"
#include "selfdoubt/errors.hpp"
#include "selfdoubt/evalkit.hpp"
#include "selfdoubt/matcher.hpp"
#include "selfdoubt/scoring.hpp"
#include "selfdoubt/service.hpp"
#include "selfdoubt/trace_store.hpp"

namespace selfdoubt {
namespace cli {

namespace fs = std::filesystem;

struct EmbedderOptions {
  std::string kind = "stub";  // stub | http
  int stub_dim = 64;
  std::uint64_t stub_seed = 0;
  std::string endpoint;
  std::string embed_model = "bge-m3";
  int batch_size = 64;
  int timeout_ms = 10000;
  int retries = 2;
  std::string cache_path;
};

inline std::shared_ptr<CachingEmbedder> make_embedder(const EmbedderOptions& o) {
  std::shared_ptr<Embedder> base;
  if (o.kind == "stub") {
    base = std::make_shared<StubEmbedder>(static_cast<std::size_t>(o.stub_dim), o.stub_seed);
  } else if (o.kind == "http") {
    if (o.endpoint.empty()) throw validation_error("--endpoint is required with --embedder http");
    ProviderConfig cfg;
    cfg.endpoint = o.endpoint;
    cfg.model_name = o.embed_model;
    cfg.batch_size = static_cast<std::size_t>(std::max(1, o.batch_size));
    cfg.timeout = std::chrono::milliseconds(o.timeout_ms);
    cfg.retry_limit = static_cast<std::size_t>(std::max(0, o.retries));
    base = std::make_shared<HttpEmbedder>(cfg);
  } else {
    throw validation_error("--embedder must be stub or http");
  }
  std::optional<std::string> cache;
  if (!o.cache_path.empty()) cache = o.cache_path;
  return std::make_shared<CachingEmbedder>(base, base->name(), cache,
                                           static_cast<std::size_t>(std::max(1, o.batch_size)));
}

/// Provenance timestamp: an explicit override wins, then SOURCE_DATE_EPOCH
/// (for reproducible builds), then the wall clock.
inline std::string build_timestamp(const std::string& override_value) {
  if (!override_value.empty()) return override_value;
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"))
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  else
    t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Options {
  std::string in_path, out_path, out_dir;
  std::string corpus_path, calibration_path, scored_path, runs_dir, seeds_dir;
  std::vector<std::string> dict_paths;
  std::vector<std::string> profile_paths;
  std::string mode = "strict";
  bool fill_confidence = false;
  bool emit_spans = false;
  bool seeds_only = false;
  std::string model;
  double threshold = 0.7;
  int min_keep = 10;
  int max_rounds = 6;
  double within_quorum = 3.0 / 5.0;
  double across_quorum = 3.0 / 4.0;
  int subset_size = 10;
  int subset_override = 0;  // 0 keeps the value stored in the seed files
  double tau_verify = 0.0;  // 0 = use per-model default
  double tau_hedge = 0.0;
  int max_n = 3;
  double min_trace_fraction = 0.10;
  std::vector<double> multipliers = {0.5, 0.75, 1.0, 1.25, 1.5};
  double tau = 0.0;
  int grid = 101;
  std::string tier2_fallback = "defer";
  std::vector<std::string> methods = {"sd", "hvr", "verb", "tl", "tlvb", "dse"};
  std::vector<std::string> group_by = {"model", "dataset"};
  std::string csv_path, wilcoxon_csv_path, gate_csv_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string timestamp;
  EmbedderOptions embed;
};

inline SchemaMode parse_mode(const std::string& mode) {
  if (mode == "strict") return SchemaMode::strict;
  if (mode == "lenient") return SchemaMode::lenient;
  throw validation_error("--mode must be strict or lenient");
}

inline Tier2Fallback parse_fallback(const std::string& s) {
  if (s == "defer") return Tier2Fallback::defer;
  if (s == "hvr-only") return Tier2Fallback::hvr_only;
  throw validation_error("--tier2-fallback must be defer or hvr-only");
}

inline void ensure_parent_dir(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

inline int cmd_ingest(const Options& o) {
  Corpus corpus = load_corpus(o.in_path, parse_mode(o.mode));
  for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << "\n";
  if (o.fill_confidence)
    for (auto& r : corpus.records)
      if (!r.verbalized_confidence)
        r.verbalized_confidence = parse_confidence(extract_answer_region(r.response_text));
  ensure_parent_dir(o.out_path);
  save_corpus(corpus, o.out_path);
  std::cout << "ingested " << corpus.records.size() << " records (skipped " << corpus.skipped
            << ") -> " << o.out_path << "\n";
  return 0;
}

inline int cmd_discover_seeds(const Options& o) {
  std::vector<SeedRunFile> runs;
  std::vector<fs::path> files;
  if (!fs::is_directory(o.runs_dir))
    throw validation_error("--runs-dir is not a directory: " + o.runs_dir);
  for (const auto& entry : fs::directory_iterator(o.runs_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) runs.push_back(load_seed_run(f.string()));
  if (runs.empty()) throw validation_error("no seed-run files (*.json) in " + o.runs_dir);

  const auto consensus = consensus_vote(runs, o.within_quorum, o.across_quorum);
  auto embedder = make_embedder(o.embed);
  fs::create_directories(o.out_dir);
  for (const auto& [role, words] : consensus) {
    SeedSet seed = coherence_prune(words, *embedder, o.threshold,
                                   static_cast<std::size_t>(std::max(1, o.min_keep)),
                                   o.max_rounds, role);
    seed.subset_size = o.subset_size;
    const std::string path = (fs::path(o.out_dir) / (role + ".json")).string();
    write_text_file(path, seed_set_to_json(seed).dump(2) + "\n");
    std::cout << role << ": " << words.size() << " consensus words, "
              << seed.ranked_words.size() << " after pruning -> " << path << "\n";
  }
  return 0;
}

inline std::pair<SeedSet, SeedSet> load_seed_pair(const std::string& seeds_dir) {
  const std::string hedge_path = (fs::path(seeds_dir) / "hedge.json").string();
  const std::string verify_path = (fs::path(seeds_dir) / "verify.json").string();
  return {load_seed_set(hedge_path), load_seed_set(verify_path)};
}

inline int cmd_expand_markers(const Options& o) {
  auto [hedge_seed, verify_seed] = load_seed_pair(o.seeds_dir);
  if (o.subset_override > 0) {
    hedge_seed.subset_size = o.subset_override;
    verify_seed.subset_size = o.subset_override;
  }
  double tau_verify = o.tau_verify, tau_hedge = o.tau_hedge;
  if (tau_verify <= 0.0 || tau_hedge <= 0.0) {
    auto [tv, th] = default_thresholds(o.model);
    if (tau_verify <= 0.0) tau_verify = tv;
    if (tau_hedge <= 0.0) tau_hedge = th;
  }

  MarkerDictionary dict;
  auto embedder = make_embedder(o.embed);
  if (o.seeds_only) {
    dict = seeds_only_dictionary(hedge_seed, verify_seed, tau_verify, tau_hedge, o.model,
                                 embedder->name());
  } else {
    if (o.calibration_path.empty())
      throw validation_error("--calibration is required unless --seeds-only is set");
    Corpus calibration = load_corpus(o.calibration_path, SchemaMode::strict);
    auto ngrams = extract_ngrams(calibration, o.max_n, o.min_trace_fraction);
    std::vector<std::string> candidates;
    candidates.reserve(ngrams.size());
    for (auto& [gram, count] : ngrams) candidates.push_back(gram);
    dict = classify_markers(candidates, hedge_seed, verify_seed, tau_verify, tau_hedge,
                            *embedder, o.model);
    dict.min_trace_fraction = o.min_trace_fraction;
    dict.provenance.calibration_corpus_hash = file_content_hash(o.calibration_path);
  }
  dict.provenance.build_timestamp = build_timestamp(o.timestamp);
  ensure_parent_dir(o.out_path);
  save_dictionary(dict, o.out_path);
  std::cout << "dictionary for " << o.model << ": " << dict.hedge.size() << " hedge, "
            << dict.verify.size() << " verify markers -> " << o.out_path << "\n";
  return 0;
}

inline int cmd_sweep_thresholds(const Options& o) {
  auto [hedge_seed, verify_seed] = load_seed_pair(o.seeds_dir);
  if (o.subset_override > 0) {
    hedge_seed.subset_size = o.subset_override;
    verify_seed.subset_size = o.subset_override;
  }
  double tau_verify = o.tau_verify, tau_hedge = o.tau_hedge;
  if (tau_verify <= 0.0 || tau_hedge <= 0.0) {
    auto [tv, th] = default_thresholds(o.model);
    if (tau_verify <= 0.0) tau_verify = tv;
    if (tau_hedge <= 0.0) tau_hedge = th;
  }
  Corpus calibration = load_corpus(o.calibration_path, SchemaMode::strict);
  auto ngrams = extract_ngrams(calibration, o.max_n, o.min_trace_fraction);
  std::vector<std::string> candidates;
  for (auto& [gram, count] : ngrams) candidates.push_back(gram);

  auto embedder = make_embedder(o.embed);
  auto sweep = sweep_thresholds(candidates, hedge_seed, verify_seed, tau_verify, tau_hedge,
                                *embedder, o.model, o.multipliers);
  fs::create_directories(o.out_dir);
  const std::string corpus_hash = file_content_hash(o.calibration_path);
  const std::string stamp = build_timestamp(o.timestamp);
  for (auto& [multiplier, dict] : sweep) {
    dict.min_trace_fraction = o.min_trace_fraction;
    dict.provenance.calibration_corpus_hash = corpus_hash;
    dict.provenance.build_timestamp = stamp;
    char name[64];
    std::snprintf(name, sizeof(name), "dict_x%.2f.json", multiplier);
    const std::string path = (fs::path(o.out_dir) / name).string();
    save_dictionary(dict, path);
    std::cout << "x" << format_fixed(multiplier, 2) << ": " << dict.hedge.size() << " hedge, "
              << dict.verify.size() << " verify -> " << path << "\n";
  }
  return 0;
}

inline int cmd_score(const Options& o) {
  const MarkerDictionary dict = load_dictionary(o.dict_paths.at(0));
  const CompiledMatcher matcher(dict);
  const Corpus corpus = load_corpus(o.corpus_path, parse_mode(o.mode));
  for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << "\n";

  std::optional<CalibrationProfile> profile;
  if (!o.profile_paths.empty()) profile = load_profile(o.profile_paths.front());

  ensure_parent_dir(o.out_path);
  std::ofstream out(o.out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open file for writing: " + o.out_path);
  for (const auto& record : corpus.records) {
    ScoredRecord scored =
        score_record(record, matcher, profile ? &*profile : nullptr, o.emit_spans);
    out << scored_record_to_json(scored, o.emit_spans).dump() << "\n";
  }
  if (!out) throw io_error("write failed: " + o.out_path);
  std::cout << "scored " << corpus.records.size() << " records -> " << o.out_path << "\n";
  return 0;
}

inline int cmd_calibrate(const Options& o) {
  const MarkerDictionary dict = load_dictionary(o.dict_paths.at(0));
  const CompiledMatcher matcher(dict);
  const Corpus corpus = load_corpus(o.corpus_path, SchemaMode::strict);
  const auto samples = calibration_samples(corpus, matcher);
  CalibrationProfile profile = calibrate(samples, dict.model);
  ensure_parent_dir(o.out_path);
  save_profile(profile, o.out_path);
  std::cout << "calibrated " << profile.model << " on " << profile.n_cal
            << " usable records; zero-hedge " << profile.n_zero_hedge << "; gate "
            << (profile.gate_enabled ? "enabled" : "disabled") << " -> " << o.out_path << "\n";
  return 0;
}

inline int cmd_evaluate(const Options& o) {
  const std::vector<ScoredRecord> records = load_scored_records(o.scored_path);
  for (const auto& m : o.methods) {
    const auto& known = all_methods();
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw validation_error("unknown method: " + m);
  }
  std::map<std::string, CalibrationProfile> profiles;
  for (const auto& p : o.profile_paths) {
    CalibrationProfile profile = load_profile(p);
    profiles[profile.model] = profile;
  }
  const NormalizationMode mode =
      profiles.empty() ? NormalizationMode::oracle : NormalizationMode::calibrated;
  const EvalReport report = build_report(records, o.methods, mode,
                                         profiles.empty() ? nullptr : &profiles, o.group_by);

  if (!o.out_path.empty()) {
    ensure_parent_dir(o.out_path);
    write_text_file(o.out_path, report_to_json(report).dump(2) + "\n");
  }
  if (!o.csv_path.empty()) {
    ensure_parent_dir(o.csv_path);
    write_text_file(o.csv_path, report_to_csv(report));
  }
  if (!o.wilcoxon_csv_path.empty()) {
    ensure_parent_dir(o.wilcoxon_csv_path);
    write_text_file(o.wilcoxon_csv_path, wilcoxon_to_csv(report));
  }
  if (!o.gate_csv_path.empty()) {
    const auto gate = gate_report(records);
    std::string csv = "model,dataset,n,n_zero,coverage,precision,wilson_low,wilson_high\n";
    for (const auto& g : gate) {
      csv += g.model + "," + g.dataset + "," + std::to_string(g.n) + "," +
             std::to_string(g.n_zero) + "," + format_fixed(g.coverage) + ",";
      csv += (g.precision ? format_fixed(*g.precision) : "") + std::string(",");
      csv += (g.wilson_ci ? format_fixed(g.wilson_ci->first) : "") + std::string(",");
      csv += (g.wilson_ci ? format_fixed(g.wilson_ci->second) : "") + "\n";
    }
    ensure_parent_dir(o.gate_csv_path);
    write_text_file(o.gate_csv_path, csv);
  }

  auto all = report.pooled.find("all");
  if (all != report.pooled.end())
    for (const auto& [method, mean] : all->second)
      std::cout << method << ": mean auroc " << format_fixed(mean.auroc, 4) << ", mean aurac "
                << format_fixed(mean.aurac, 4) << " over " << mean.runs << " runs\n";
  return 0;
}

inline int cmd_cascade(const Options& o) {
  const CalibrationProfile profile = load_profile(o.profile_paths.at(0));
  const MarkerDictionary dict = load_dictionary(o.dict_paths.at(0));
  const CompiledMatcher matcher(dict);
  const Corpus corpus = load_corpus(o.corpus_path, parse_mode(o.mode));
  const Tier2Fallback fallback = parse_fallback(o.tier2_fallback);

  ensure_parent_dir(o.out_path);
  std::ofstream out(o.out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open file for writing: " + o.out_path);
  std::size_t accepted = 0, tier1 = 0, accepted_correct = 0, accepted_labeled = 0;
  for (const auto& record : corpus.records) {
    const ScoredRecord scored = score_record(record, matcher, &profile);
    const Decision d = decide(scored, profile, o.tau, fallback);
    json j;
    j["id"] = d.record_id;
    j["outcome"] = to_string(d.outcome);
    j["tier"] = to_string(d.tier);
    j["score"] = d.score ? json(*d.score) : json(nullptr);
    j["tau"] = d.tau;
    out << j.dump() << "\n";
    if (d.outcome == Outcome::accept) {
      ++accepted;
      if (d.tier == DecisionTier::tier1_gate) ++tier1;
      if (record.correct) {
        ++accepted_labeled;
        if (*record.correct) ++accepted_correct;
      }
    }
  }
  if (!out) throw io_error("write failed: " + o.out_path);
  const double total = static_cast<double>(corpus.records.size());
  std::cout << "decisions -> " << o.out_path << "\n";
  std::cout << "coverage " << format_fixed(total > 0 ? accepted / total : 0.0, 4)
            << ", tier1 share " << format_fixed(total > 0 ? tier1 / total : 0.0, 4);
  if (accepted_labeled > 0)
    std::cout << ", accepted accuracy "
              << format_fixed(static_cast<double>(accepted_correct) /
                                  static_cast<double>(accepted_labeled),
                              4);
  std::cout << "\n";
  return 0;
}

inline int cmd_cascade_sweep(const Options& o) {
  const CalibrationProfile profile = load_profile(o.profile_paths.at(0));
  const MarkerDictionary dict = load_dictionary(o.dict_paths.at(0));
  const CompiledMatcher matcher(dict);
  const Corpus corpus = load_corpus(o.corpus_path, parse_mode(o.mode));
  const std::vector<ScoredRecord> scored = score_corpus(corpus, matcher, &profile);
  const CascadeReport report =
      sweep_tau(scored, profile, {}, o.tau, parse_fallback(o.tier2_fallback), o.grid);

  std::string csv = "tau,coverage,accuracy,tier1_share\n";
  for (const auto& p : report.curve) {
    csv += format_fixed(p.tau) + "," + format_fixed(p.coverage) + ",";
    csv += (p.accuracy ? format_fixed(*p.accuracy) : "") + std::string(",");
    csv += format_fixed(p.tier1_share) + "\n";
  }
  ensure_parent_dir(o.out_path);
  write_text_file(o.out_path, csv);
  std::cout << "curve with " << report.curve.size() << " points -> " << o.out_path << "\n";
  std::cout << "at tau " << format_fixed(o.tau, 4) << ": coverage "
            << format_fixed(report.coverage, 4);
  if (report.accepted_accuracy)
    std::cout << ", accuracy " << format_fixed(*report.accepted_accuracy, 4);
  std::cout << ", tier1 share " << format_fixed(report.tier1_share, 4) << "\n";
  return 0;
}

inline int cmd_serve(const Options& o) {
  if (o.dict_paths.empty()) throw validation_error("--dict is required");
  std::map<std::string, CalibrationProfile> profiles;
  for (const auto& p : o.profile_paths) {
    CalibrationProfile profile = load_profile(p);
    profiles[profile.model] = profile;
  }
  std::map<std::string, ModelAssets> assets;
  for (const auto& d : o.dict_paths) {
    ModelAssets a;
    a.dictionary = load_dictionary(d);
    a.matcher = CompiledMatcher(a.dictionary);
    auto it = profiles.find(a.dictionary.model);
    if (it == profiles.end())
      throw validation_error("no profile for model: " + a.dictionary.model);
    a.profile = it->second;
    assets[a.dictionary.model] = std::move(a);
  }

  ScoringService service;
  service.load(std::move(assets), o.tau);
  httplib::Server server;
  const int port = service.bind(server, o.host, o.port);
  std::cout << "listening on " << o.host << ":" << port << std::endl;
  server.listen_after_bind();
  return 0;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline std::string env_name(std::string option) {
  for (char& c : option) {
    if (c == '-') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return "SELFDOUBT_" + option;
}

/// Config reader that overlays SELFDOUBT_* environment values on top of the
/// file contents. CLI11 applies the config layer only to options absent from
/// the command line, which yields the documented precedence:
/// flags > environment > config file > built-in defaults.
class EnvOverlayConfig : public CLI::ConfigTOML {
 public:
  struct Binding {
    std::string env;
    std::vector<std::string> parents;
    std::string name;  // option name without leading dashes
  };

  std::vector<Binding> bindings;

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    for (const auto& binding : bindings) {
      const char* value = std::getenv(binding.env.c_str());
      if (!value || !*value) continue;
      auto match = std::find_if(items.begin(), items.end(), [&](const CLI::ConfigItem& item) {
        return item.parents == binding.parents && item.name == binding.name;
      });
      if (match != items.end()) {
        match->inputs = {std::string(value)};
      } else {
        CLI::ConfigItem item;
        item.parents = binding.parents;
        item.name = binding.name;
        item.inputs = {std::string(value)};
        items.push_back(std::move(item));
      }
    }
    return items;
  }
};

}  // namespace cli

/// CLI entry point. Exit codes: 0 success, 1 validation error, 2 runtime
/// error. --config loads option defaults; SELFDOUBT_* environment variables
/// override the config file; command-line flags override both.
inline int cli_main(int argc, const char* const* argv) {
  using namespace cli;
  Options o;
  CLI::App app{"Single-pass uncertainty estimation for reasoning-model traces"};
  app.set_version_flag("--version", "selfdoubt 0.1.0");
  app.set_config("--config", "", "Read option defaults from a config file")
      ->envname("SELFDOUBT_CONFIG");
  app.require_subcommand(0, 1);
  auto overlay = std::make_shared<EnvOverlayConfig>();
  app.config_formatter(overlay);

  CLI::App* current_sub = nullptr;
  const auto opt = [&overlay, &current_sub](CLI::Option* option, const std::string& name) {
    option->envname(env_name(name));
    std::vector<std::string> parents;
    if (current_sub) parents.push_back(current_sub->get_name());
    overlay->bindings.push_back({env_name(name), std::move(parents), name});
    return option;
  };

  const auto add_embedder_options = [&](CLI::App* sub) {
    opt(sub->add_option("--embedder", o.embed.kind, "Embedding provider: stub or http"),
        "embedder");
    opt(sub->add_option("--stub-dim", o.embed.stub_dim, "Stub embedding dimension"), "stub-dim");
    opt(sub->add_option("--stub-seed", o.embed.stub_seed, "Stub embedding seed"), "stub-seed");
    opt(sub->add_option("--endpoint", o.embed.endpoint, "Embedding service URL"), "endpoint");
    opt(sub->add_option("--embed-model", o.embed.embed_model, "Embedding model name"),
        "embed-model");
    opt(sub->add_option("--batch-size", o.embed.batch_size, "Embedding batch size"), "batch-size");
    opt(sub->add_option("--timeout-ms", o.embed.timeout_ms, "Embedding request timeout"),
        "timeout-ms");
    opt(sub->add_option("--retries", o.embed.retries, "Embedding request retries"), "retries");
    opt(sub->add_option("--cache", o.embed.cache_path, "Embedding cache file"), "cache");
  };

  const auto add_sub = [&app, &current_sub](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    current_sub = sub;
    return sub;
  };

  std::function<int()> action;

  {
    auto* sub = add_sub("ingest", "Validate and normalize a trace corpus");
    sub->add_option("--in", o.in_path, "Input corpus (JSONL)")->required();
    sub->add_option("--out", o.out_path, "Output corpus (JSONL)")->required();
    opt(sub->add_option("--mode", o.mode, "Schema mode: strict or lenient"), "mode");
    sub->add_flag("--fill-confidence", o.fill_confidence,
                  "Parse missing confidence values from the response text");
    sub->callback([&] { action = [&] { return cmd_ingest(o); }; });
  }
  {
    auto* sub = add_sub("discover-seeds",
                                   "Consensus-vote seed words and prune them by coherence");
    sub->add_option("--runs-dir", o.runs_dir, "Directory of seed-run files (*.json)")->required();
    sub->add_option("--out", o.out_dir, "Output directory for seed sets")->required();
    opt(sub->add_option("--threshold", o.threshold, "Coherence cosine threshold"), "threshold");
    opt(sub->add_option("--min-keep", o.min_keep, "Minimum surviving words"), "min-keep");
    opt(sub->add_option("--max-rounds", o.max_rounds, "Maximum pruning rounds"), "max-rounds");
    opt(sub->add_option("--within-quorum", o.within_quorum, "Within-model run fraction"),
        "within-quorum");
    opt(sub->add_option("--across-quorum", o.across_quorum, "Across-model fraction"),
        "across-quorum");
    opt(sub->add_option("--subset-size", o.subset_size, "Default seed subset size"),
        "subset-size");
    add_embedder_options(sub);
    sub->callback([&] { action = [&] { return cmd_discover_seeds(o); }; });
  }
  {
    auto* sub = add_sub("expand-markers",
                                   "Expand seeds into a per-model marker dictionary");
    sub->add_option("--model", o.model, "Target model name")->required();
    sub->add_option("--calibration", o.calibration_path, "Calibration corpus (JSONL)");
    sub->add_option("--seeds", o.seeds_dir, "Seed directory from discover-seeds")->required();
    sub->add_option("--out", o.out_path, "Output dictionary file")->required();
    opt(sub->add_option("--tau-verify", o.tau_verify, "Verify margin threshold"), "tau-verify");
    opt(sub->add_option("--tau-hedge", o.tau_hedge, "Hedge margin threshold"), "tau-hedge");
    opt(sub->add_option("--max-n", o.max_n, "Longest n-gram"), "max-n");
    opt(sub->add_option("--min-trace-fraction", o.min_trace_fraction,
                        "Distinct-trace fraction for candidate n-grams"),
        "min-trace-fraction");
    opt(sub->add_option("--subset-size", o.subset_override, "Seed subset size override"),
        "subset-size");
    sub->add_flag("--seeds-only", o.seeds_only, "Skip expansion; use seed words directly");
    sub->add_option("--timestamp", o.timestamp, "Provenance timestamp override");
    add_embedder_options(sub);
    sub->callback([&] { action = [&] { return cmd_expand_markers(o); }; });
  }
  {
    auto* sub = add_sub("sweep-thresholds",
                                   "Rebuild dictionaries across threshold multipliers");
    sub->add_option("--model", o.model, "Target model name")->required();
    sub->add_option("--calibration", o.calibration_path, "Calibration corpus (JSONL)")->required();
    sub->add_option("--seeds", o.seeds_dir, "Seed directory")->required();
    sub->add_option("--out-dir", o.out_dir, "Output directory")->required();
    opt(sub->add_option("--tau-verify", o.tau_verify, "Base verify threshold"), "tau-verify");
    opt(sub->add_option("--tau-hedge", o.tau_hedge, "Base hedge threshold"), "tau-hedge");
    sub->add_option("--multipliers", o.multipliers, "Joint threshold multipliers")
        ->delimiter(',');
    opt(sub->add_option("--max-n", o.max_n, "Longest n-gram"), "max-n");
    opt(sub->add_option("--min-trace-fraction", o.min_trace_fraction,
                        "Distinct-trace fraction for candidate n-grams"),
        "min-trace-fraction");
    opt(sub->add_option("--subset-size", o.subset_override, "Seed subset size override"),
        "subset-size");
    sub->add_option("--timestamp", o.timestamp, "Provenance timestamp override");
    add_embedder_options(sub);
    sub->callback([&] { action = [&] { return cmd_sweep_thresholds(o); }; });
  }
  {
    auto* sub = add_sub("score", "Count markers and emit per-record signals");
    opt(sub->add_option("--dict", o.dict_paths, "Marker dictionary")->expected(1), "dict");
    sub->get_option("--dict")->required();
    opt(sub->add_option("--corpus", o.corpus_path, "Trace corpus (JSONL)")->required(),
        "corpus");
    sub->add_option("--out", o.out_path, "Scored output (JSONL)")->required();
    sub->add_option("--profile", o.profile_paths, "Calibration profile (adds fused score)")
        ->expected(1);
    opt(sub->add_option("--mode", o.mode, "Schema mode: strict or lenient"), "mode");
    sub->add_flag("--emit-spans", o.emit_spans, "Include matched spans");
    sub->callback([&] { action = [&] { return cmd_score(o); }; });
  }
  {
    auto* sub = add_sub("calibrate", "Estimate deployment scalars from a corpus");
    opt(sub->add_option("--dict", o.dict_paths, "Marker dictionary")->expected(1)->required(),
        "dict");
    opt(sub->add_option("--corpus", o.corpus_path, "Calibration corpus (JSONL)")->required(),
        "corpus");
    sub->add_option("--out", o.out_path, "Output profile file")->required();
    sub->callback([&] { action = [&] { return cmd_calibrate(o); }; });
  }
  {
    auto* sub = add_sub("evaluate", "Rank-based evaluation over scored records");
    sub->add_option("--scored", o.scored_path, "Scored records (JSONL)")->required();
    sub->add_option("--methods", o.methods, "Methods to evaluate")->delimiter(',');
    sub->add_option("--group-by", o.group_by, "Run grouping keys")->delimiter(',');
    sub->add_option("--out", o.out_path, "Report JSON path");
    sub->add_option("--csv", o.csv_path, "Per-run metrics CSV path");
    sub->add_option("--wilcoxon-csv", o.wilcoxon_csv_path, "Paired test CSV path");
    sub->add_option("--gate-csv", o.gate_csv_path, "Zero-hedge gate report CSV path");
    sub->add_option("--profile", o.profile_paths, "Calibration profiles (calibrated mode)");
    sub->callback([&] { action = [&] { return cmd_evaluate(o); }; });
  }
  {
    auto* sub = add_sub("cascade", "Accept/defer decisions at a fixed tau");
    sub->add_option("--profile", o.profile_paths, "Calibration profile")->expected(1)->required();
    opt(sub->add_option("--dict", o.dict_paths, "Marker dictionary")->expected(1)->required(),
        "dict");
    opt(sub->add_option("--corpus", o.corpus_path, "Trace corpus (JSONL)")->required(),
        "corpus");
    sub->add_option("--out", o.out_path, "Decisions output (JSONL)")->required();
    opt(sub->add_option("--tau", o.tau, "Acceptance threshold"), "tau");
    opt(sub->add_option("--tier2-fallback", o.tier2_fallback,
                        "Records without confidence: defer or hvr-only"),
        "tier2-fallback");
    opt(sub->add_option("--mode", o.mode, "Schema mode"), "mode");
    sub->callback([&] { action = [&] { return cmd_cascade(o); }; });
  }
  {
    auto* sub = add_sub("cascade-sweep", "Accuracy-coverage curve over a tau grid");
    sub->add_option("--profile", o.profile_paths, "Calibration profile")->expected(1)->required();
    opt(sub->add_option("--dict", o.dict_paths, "Marker dictionary")->expected(1)->required(),
        "dict");
    opt(sub->add_option("--corpus", o.corpus_path, "Labeled trace corpus (JSONL)")->required(),
        "corpus");
    sub->add_option("--out", o.out_path, "Curve CSV path")->required();
    opt(sub->add_option("--grid", o.grid, "Grid points"), "grid");
    opt(sub->add_option("--tau", o.tau, "Reported operating point"), "tau");
    opt(sub->add_option("--tier2-fallback", o.tier2_fallback,
                        "Records without confidence: defer or hvr-only"),
        "tier2-fallback");
    opt(sub->add_option("--mode", o.mode, "Schema mode"), "mode");
    sub->callback([&] { action = [&] { return cmd_cascade_sweep(o); }; });
  }
  {
    auto* sub = add_sub("serve", "HTTP scoring service");
    opt(sub->add_option("--dict", o.dict_paths, "Marker dictionaries"), "dict");
    sub->get_option("--dict")->required();
    sub->add_option("--profile", o.profile_paths, "Calibration profiles")->required();
    opt(sub->add_option("--host", o.host, "Bind host"), "host");
    opt(sub->add_option("--port", o.port, "Bind port (0 = ephemeral)"), "port");
    opt(sub->add_option("--tau", o.tau, "Default decision threshold"), "tau");
    sub->callback([&] { action = [&] { return cmd_serve(o); }; });
  }

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    return 1;
  }

  if (!action) {
    std::cerr << app.help();
    return 1;
  }
  try {
    return action();
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace selfdoubt
