#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfdoubt/embedding.hpp"
#include "selfdoubt/errors.hpp"
#include "selfdoubt/jsonl.hpp"
#include "selfdoubt/models.hpp"
#include "selfdoubt/tokenizer.hpp"
#include "selfdoubt/trace_store.hpp"

namespace selfdoubt {

// ---------------------------------------------------------------------------
// Seed generation: consensus voting over raw word-list files
// ---------------------------------------------------------------------------

struct SeedRunFile {
  std::string model;
  std::string role;  // "hedge" or "verify"
  int run_index = 0;
  std::vector<std::string> words;  // lowercase single tokens, deduplicated
};

inline SeedRunFile seed_run_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) throw validation_error(origin + ": seed-run file is not an object");
  SeedRunFile run;
  try {
    const auto need = [&](const char* key) {
      if (!j.contains(key)) throw validation_error(origin + ": missing field: " + key);
      return j.at(key);
    };
    run.model = need("model").get<std::string>();
    run.role = need("role").get<std::string>();
    if (run.role != "hedge" && run.role != "verify")
      throw validation_error(origin + ": role must be hedge or verify");
    run.run_index = need("run_index").get<int>();
    std::set<std::string> seen;
    for (const auto& w : need("words")) {
      std::string word = fold_ascii(w.get<std::string>());
      if (word.empty()) continue;
      if (word.find(' ') != std::string::npos || word.find('\t') != std::string::npos)
        throw validation_error(origin + ": seed word contains whitespace: " + word);
      if (seen.insert(word).second) run.words.push_back(word);
    }
  } catch (const json::exception& e) {
    throw validation_error(origin + ": malformed seed-run file: " + e.what());
  }
  return run;
}

inline SeedRunFile load_seed_run(const std::string& path) {
  json j = json::parse(read_file_bytes(path), nullptr, false);
  if (j.is_discarded()) throw validation_error(path + ": invalid JSON");
  return seed_run_from_json(j, path);
}

/// Two-level majority vote: a word survives a role when it appears in at
/// least ceil(within_quorum * runs) runs of a model, for at least
/// ceil(across_quorum * models) of the models that contributed that role.
inline std::map<std::string, std::vector<std::string>> consensus_vote(
    const std::vector<SeedRunFile>& runs, double within_quorum = 3.0 / 5.0,
    double across_quorum = 3.0 / 4.0) {
  if (runs.empty()) throw validation_error("consensus_vote: no seed runs");

  const auto quorum = [](double fraction, std::size_t n) {
    return static_cast<std::size_t>(
        std::max(0.0, std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  };

  // role -> model -> (run count, word -> run count)
  std::map<std::string, std::map<std::string, std::pair<std::size_t, std::map<std::string, std::size_t>>>>
      tallies;
  for (const auto& run : runs) {
    auto& per_model = tallies[run.role][run.model];
    per_model.first += 1;
    for (const auto& w : run.words) per_model.second[w] += 1;
  }

  std::map<std::string, std::vector<std::string>> result;
  for (const auto& [role, models] : tallies) {
    std::map<std::string, std::size_t> model_votes;  // word -> models retaining it
    for (const auto& [model, tally] : models) {
      const std::size_t need = std::max<std::size_t>(1, quorum(within_quorum, tally.first));
      for (const auto& [word, count] : tally.second)
        if (count >= need) model_votes[word] += 1;
    }
    const std::size_t need_models = std::max<std::size_t>(1, quorum(across_quorum, models.size()));
    std::vector<std::string> survivors;
    for (const auto& [word, votes] : model_votes)
      if (votes >= need_models) survivors.push_back(word);
    if (survivors.empty())
      throw validation_error("consensus_vote: no surviving words for role: " + role);
    result[role] = std::move(survivors);  // map iteration is already sorted
  }
  return result;
}

// ---------------------------------------------------------------------------
// Iterative coherence pruning
// ---------------------------------------------------------------------------

struct PruneRound {
  int round = 0;
  std::vector<std::string> dropped;
};

struct SeedSet {
  std::string role;
  std::vector<std::string> ranked_words;  // by cosine-to-centroid descending
  EmbeddingVector centroid;               // centroid of the final survivor set
  int subset_size = 10;
  std::vector<PruneRound> pruning_log;
};

/// Iteratively drops candidates whose cosine to the active-set centroid falls
/// below `threshold`, never going under `min_keep` survivors. When a round
/// would cross the floor only the lowest-cosine words are dropped, down to
/// exactly `min_keep`, and pruning stops.
inline SeedSet coherence_prune(const std::vector<std::string>& candidates, Embedder& embedder,
                               double threshold = 0.7, std::size_t min_keep = 10,
                               int max_rounds = 6, const std::string& role = "") {
  if (candidates.empty()) throw validation_error("coherence_prune: empty candidate list");

  std::vector<std::string> active(candidates.begin(), candidates.end());
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());

  auto vectors = embedder.embed_batch(active);
  std::map<std::string, EmbeddingVector> by_word;
  for (std::size_t i = 0; i < active.size(); ++i) by_word[active[i]] = vectors[i];

  const auto active_vectors = [&](const std::vector<std::string>& words) {
    std::vector<EmbeddingVector> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(by_word.at(w));
    return out;
  };

  SeedSet seed;
  seed.role = role;

  for (int round = 1; round <= max_rounds; ++round) {
    const EmbeddingVector center = centroid(active_vectors(active));
    std::vector<std::pair<double, std::string>> scored;  // (cosine, word)
    scored.reserve(active.size());
    for (const auto& w : active) scored.emplace_back(cosine(by_word.at(w), center), w);

    std::vector<std::string> below;
    for (const auto& [c, w] : scored)
      if (c < threshold) below.push_back(w);
    if (below.empty()) break;

    const std::size_t allowed =
        active.size() > min_keep ? active.size() - min_keep : 0;
    if (allowed == 0) break;

    bool hit_floor = below.size() > allowed;
    std::vector<std::string> dropped;
    if (hit_floor) {
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
      });
      for (std::size_t i = 0; i < allowed; ++i) dropped.push_back(scored[i].second);
    } else {
      dropped = below;
    }

    std::set<std::string> gone(dropped.begin(), dropped.end());
    std::vector<std::string> next;
    for (const auto& w : active)
      if (!gone.count(w)) next.push_back(w);
    active = std::move(next);

    std::sort(dropped.begin(), dropped.end());
    seed.pruning_log.push_back({round, std::move(dropped)});
    if (hit_floor) break;
  }

  seed.centroid = centroid(active_vectors(active));
  std::vector<std::pair<double, std::string>> final_scored;
  for (const auto& w : active) final_scored.emplace_back(cosine(by_word.at(w), seed.centroid), w);
  std::sort(final_scored.begin(), final_scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& [c, w] : final_scored) seed.ranked_words.push_back(w);
  return seed;
}

/// Top-k prefixes of the coherence ranking for k in {2, 4, ..., 20},
/// clipped to the available word count.
inline std::map<int, std::vector<std::string>> materialize_subsets(const SeedSet& seed) {
  std::map<int, std::vector<std::string>> out;
  for (int k = 2; k <= 20; k += 2) {
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), seed.ranked_words.size());
    out[k] = std::vector<std::string>(seed.ranked_words.begin(),
                                      seed.ranked_words.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

inline std::vector<std::string> seed_subset(const SeedSet& seed) {
  std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(seed.subset_size, 0)),
                            seed.ranked_words.size());
  return {seed.ranked_words.begin(), seed.ranked_words.begin() + static_cast<std::ptrdiff_t>(take)};
}

inline json seed_set_to_json(const SeedSet& seed) {
  json j;
  j["role"] = seed.role;
  j["ranked_words"] = seed.ranked_words;
  j["centroid"] = seed.centroid.values;
  j["subset_size"] = seed.subset_size;
  json log = json::array();
  for (const auto& round : seed.pruning_log)
    log.push_back({{"round", round.round}, {"dropped", round.dropped}});
  j["pruning_log"] = log;
  return j;
}

inline SeedSet seed_set_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) throw validation_error(origin + ": seed set is not an object");
  SeedSet s;
  try {
    s.role = j.at("role").get<std::string>();
    s.ranked_words = j.at("ranked_words").get<std::vector<std::string>>();
    s.centroid.values = j.at("centroid").get<std::vector<double>>();
    s.centroid.normalized = true;
    s.subset_size = j.value("subset_size", 10);
    if (j.contains("pruning_log"))
      for (const auto& r : j.at("pruning_log"))
        s.pruning_log.push_back({r.at("round").get<int>(),
                                 r.at("dropped").get<std::vector<std::string>>()});
  } catch (const json::exception& e) {
    throw validation_error(origin + ": malformed seed set: " + e.what());
  }
  return s;
}

inline SeedSet load_seed_set(const std::string& path) {
  json j = json::parse(read_file_bytes(path), nullptr, false);
  if (j.is_discarded()) throw validation_error(path + ": invalid JSON");
  return seed_set_from_json(j, path);
}

// ---------------------------------------------------------------------------
// Per-model n-gram expansion
// ---------------------------------------------------------------------------

inline std::size_t fraction_threshold(double fraction, std::size_t n) {
  return static_cast<std::size_t>(
      std::max(0.0, std::ceil(fraction * static_cast<double>(n) - 1e-9)));
}

/// Extracts 1..max_n-grams from the trace texts and keeps those that occur in
/// at least ceil(min_trace_fraction * corpus size) distinct traces. Multiple
/// occurrences within one trace count once. Single-character unigrams are
/// excluded.
inline std::vector<std::pair<std::string, std::size_t>> extract_ngrams(
    const Corpus& calibration, int max_n = 3, double min_trace_fraction = 0.10) {
  if (calibration.records.empty()) throw validation_error("extract_ngrams: empty corpus");
  if (max_n < 1) throw validation_error("extract_ngrams: max_n must be >= 1");

  std::map<std::string, std::size_t> distinct_counts;
  for (const auto& record : calibration.records) {
    const auto tokens = tokenize(record.trace_text);
    std::set<std::string> in_this_trace;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::string gram;
      for (int n = 1; n <= max_n; ++n) {
        const std::size_t j = i + static_cast<std::size_t>(n) - 1;
        if (j >= tokens.size() || tokens[j].group != tokens[i].group) break;
        if (n > 1) gram.push_back(' ');
        gram += tokens[j].text;
        if (n == 1 && tokens[i].text.size() < 2) continue;
        in_this_trace.insert(gram);
      }
    }
    for (const auto& gram : in_this_trace) distinct_counts[gram] += 1;
  }

  const std::size_t need = fraction_threshold(min_trace_fraction, calibration.records.size());
  std::vector<std::pair<std::string, std::size_t>> retained;
  for (const auto& [gram, count] : distinct_counts)
    if (count >= need) retained.emplace_back(gram, count);
  return retained;  // map order: lexicographic
}

// ---------------------------------------------------------------------------
// Marker dictionaries
// ---------------------------------------------------------------------------

struct DictionaryProvenance {
  std::string encoder;
  std::string calibration_corpus_hash;
  std::string build_timestamp;
  std::vector<PruneRound> hedge_pruning_log;
  std::vector<PruneRound> verify_pruning_log;
  std::optional<double> threshold_multiplier;
  bool seeds_only = false;
};

struct MarkerDictionary {
  std::string model;
  std::vector<std::string> hedge;   // sorted, disjoint from verify
  std::vector<std::string> verify;  // sorted
  double tau_verify = 0.0;
  double tau_hedge = 0.0;
  double min_trace_fraction = 0.10;
  int seed_subset = 10;
  DictionaryProvenance provenance;
};

inline void validate_dictionary(const MarkerDictionary& dict) {
  if (dict.tau_verify <= 0.0 || dict.tau_hedge <= 0.0)
    throw validation_error("dictionary thresholds must be positive");
  if (dict.hedge.empty() && dict.verify.empty())
    throw validation_error("empty marker dictionary for model: " + dict.model);
  std::set<std::string> hedge_set(dict.hedge.begin(), dict.hedge.end());
  for (const auto& w : dict.verify)
    if (hedge_set.count(w))
      throw validation_error("marker in both hedge and verify lists: " + w);
  for (const auto* list : {&dict.hedge, &dict.verify})
    for (const auto& entry : *list) {
      const auto words = split_words(entry);
      if (words.empty() || words.size() > 3)
        throw validation_error("marker must be 1-3 tokens: " + entry);
      if (entry != fold_ascii(entry))
        throw validation_error("marker must be lowercase: " + entry);
    }
}

/// Per-model thresholds, falling back to the shipped medians with a warning.
inline std::pair<double, double> default_thresholds(const std::string& model) {
  if (auto m = lookup_model(model)) return {m->tau_verify, m->tau_hedge};
  std::cerr << "warning: no configured thresholds for model '" << model
            << "'; using fallback medians (tau_verify=" << kFallbackTauVerify
            << ", tau_hedge=" << kFallbackTauHedge << ")\n";
  return {kFallbackTauVerify, kFallbackTauHedge};
}

/// Margin classification of candidate n-grams against the seed centroids:
/// delta(g) = cos(g, c_verify) - cos(g, c_hedge); above tau_verify goes to
/// the verify list, below -tau_hedge to the hedge list, the neutral band in
/// between is discarded.
inline MarkerDictionary classify_markers(const std::vector<std::string>& candidates,
                                         const SeedSet& hedge_seed, const SeedSet& verify_seed,
                                         double tau_verify, double tau_hedge, Embedder& embedder,
                                         const std::string& model) {
  if (tau_verify <= 0.0 || tau_hedge <= 0.0)
    throw validation_error("classify_markers: thresholds must be positive");
  if (candidates.empty()) throw validation_error("classify_markers: no candidates");

  const auto hedge_words = seed_subset(hedge_seed);
  const auto verify_words = seed_subset(verify_seed);
  if (hedge_words.empty() || verify_words.empty())
    throw validation_error("classify_markers: empty seed subset");
  const EmbeddingVector c_hedge = centroid(embedder.embed_batch(hedge_words));
  const EmbeddingVector c_verify = centroid(embedder.embed_batch(verify_words));

  std::vector<std::string> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const auto vectors = embedder.embed_batch(sorted);

  MarkerDictionary dict;
  dict.model = model;
  dict.tau_verify = tau_verify;
  dict.tau_hedge = tau_hedge;
  dict.seed_subset = hedge_seed.subset_size;
  dict.provenance.encoder = embedder.name();
  dict.provenance.hedge_pruning_log = hedge_seed.pruning_log;
  dict.provenance.verify_pruning_log = verify_seed.pruning_log;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double margin = cosine(vectors[i], c_verify) - cosine(vectors[i], c_hedge);
    if (margin > tau_verify)
      dict.verify.push_back(sorted[i]);
    else if (margin < -tau_hedge)
      dict.hedge.push_back(sorted[i]);
  }
  if (dict.hedge.empty() && dict.verify.empty())
    throw validation_error("empty marker dictionary for model: " + model +
                           " (no candidate cleared either threshold)");
  return dict;
}

/// Seeds-only dictionary: the selected seed subsets become the marker lists
/// directly and the n-gram expansion stage is skipped.
inline MarkerDictionary seeds_only_dictionary(const SeedSet& hedge_seed,
                                              const SeedSet& verify_seed, double tau_verify,
                                              double tau_hedge, const std::string& model,
                                              const std::string& encoder_name) {
  MarkerDictionary dict;
  dict.model = model;
  dict.tau_verify = tau_verify;
  dict.tau_hedge = tau_hedge;
  dict.seed_subset = hedge_seed.subset_size;
  dict.provenance.encoder = encoder_name;
  dict.provenance.seeds_only = true;
  dict.provenance.hedge_pruning_log = hedge_seed.pruning_log;
  dict.provenance.verify_pruning_log = verify_seed.pruning_log;

  auto hedge = seed_subset(hedge_seed);
  auto verify = seed_subset(verify_seed);
  std::set<std::string> hedge_set(hedge.begin(), hedge.end());
  std::set<std::string> verify_set(verify.begin(), verify.end());
  for (const auto& w : hedge)
    if (!verify_set.count(w)) dict.hedge.push_back(w);
  for (const auto& w : verify)
    if (!hedge_set.count(w)) dict.verify.push_back(w);
  if (hedge.size() != dict.hedge.size())
    std::cerr << "warning: dropped words shared by both seed subsets\n";
  std::sort(dict.hedge.begin(), dict.hedge.end());
  std::sort(dict.verify.begin(), dict.verify.end());
  validate_dictionary(dict);
  return dict;
}

/// Reruns classification with both thresholds scaled by each multiplier.
/// N-gram extraction is shared; only the margin cut moves.
inline std::vector<std::pair<double, MarkerDictionary>> sweep_thresholds(
    const std::vector<std::string>& candidates, const SeedSet& hedge_seed,
    const SeedSet& verify_seed, double base_tau_verify, double base_tau_hedge,
    Embedder& embedder, const std::string& model,
    const std::vector<double>& multipliers = {0.5, 0.75, 1.0, 1.25, 1.5}) {
  std::vector<std::pair<double, MarkerDictionary>> out;
  for (double m : multipliers) {
    if (m <= 0.0) throw validation_error("sweep_thresholds: multipliers must be positive");
    MarkerDictionary dict = classify_markers(candidates, hedge_seed, verify_seed,
                                             base_tau_verify * m, base_tau_hedge * m, embedder,
                                             model);
    dict.provenance.threshold_multiplier = m;
    out.emplace_back(m, std::move(dict));
  }
  return out;
}

inline json dictionary_to_json(const MarkerDictionary& dict) {
  json prov;
  prov["encoder"] = dict.provenance.encoder;
  prov["calibration_corpus_hash"] = dict.provenance.calibration_corpus_hash;
  prov["build_timestamp"] = dict.provenance.build_timestamp;
  json log;
  json hedge_log = json::array(), verify_log = json::array();
  for (const auto& r : dict.provenance.hedge_pruning_log)
    hedge_log.push_back({{"round", r.round}, {"dropped", r.dropped}});
  for (const auto& r : dict.provenance.verify_pruning_log)
    verify_log.push_back({{"round", r.round}, {"dropped", r.dropped}});
  log["hedge"] = hedge_log;
  log["verify"] = verify_log;
  prov["pruning_log"] = log;
  if (dict.provenance.threshold_multiplier)
    prov["threshold_multiplier"] = *dict.provenance.threshold_multiplier;
  if (dict.provenance.seeds_only) prov["seeds_only"] = true;

  json j;
  j["model"] = dict.model;
  j["hedge"] = dict.hedge;
  j["verify"] = dict.verify;
  j["tau_verify"] = dict.tau_verify;
  j["tau_hedge"] = dict.tau_hedge;
  j["min_trace_fraction"] = dict.min_trace_fraction;
  j["seed_subset"] = dict.seed_subset;
  j["provenance"] = prov;
  return j;
}

inline MarkerDictionary dictionary_from_json(const json& j, const std::string& origin) {
  if (!j.is_object()) throw validation_error(origin + ": dictionary is not an object");
  MarkerDictionary dict;
  try {
    dict.model = j.at("model").get<std::string>();
    dict.hedge = j.at("hedge").get<std::vector<std::string>>();
    dict.verify = j.at("verify").get<std::vector<std::string>>();
    dict.tau_verify = j.at("tau_verify").get<double>();
    dict.tau_hedge = j.at("tau_hedge").get<double>();
    dict.min_trace_fraction = j.value("min_trace_fraction", 0.10);
    dict.seed_subset = j.value("seed_subset", 10);
    if (j.contains("provenance")) {
      const auto& p = j.at("provenance");
      dict.provenance.encoder = p.value("encoder", "");
      dict.provenance.calibration_corpus_hash = p.value("calibration_corpus_hash", "");
      dict.provenance.build_timestamp = p.value("build_timestamp", "");
      if (p.contains("threshold_multiplier"))
        dict.provenance.threshold_multiplier = p.at("threshold_multiplier").get<double>();
      dict.provenance.seeds_only = p.value("seeds_only", false);
      if (p.contains("pruning_log")) {
        const auto& log = p.at("pruning_log");
        if (log.contains("hedge"))
          for (const auto& r : log.at("hedge"))
            dict.provenance.hedge_pruning_log.push_back(
                {r.at("round").get<int>(), r.at("dropped").get<std::vector<std::string>>()});
        if (log.contains("verify"))
          for (const auto& r : log.at("verify"))
            dict.provenance.verify_pruning_log.push_back(
                {r.at("round").get<int>(), r.at("dropped").get<std::vector<std::string>>()});
      }
    }
  } catch (const json::exception& e) {
    throw validation_error(origin + ": malformed dictionary: " + e.what());
  }
  std::sort(dict.hedge.begin(), dict.hedge.end());
  std::sort(dict.verify.begin(), dict.verify.end());
  validate_dictionary(dict);
  return dict;
}

inline MarkerDictionary load_dictionary(const std::string& path) {
  json j = json::parse(read_file_bytes(path), nullptr, false);
  if (j.is_discarded()) throw validation_error(path + ": invalid JSON");
  return dictionary_from_json(j, path);
}

inline void save_dictionary(const MarkerDictionary& dict, const std::string& path) {
  write_text_file(path, dictionary_to_json(dict).dump(2) + "\n");
}

inline std::string dictionary_hash(const MarkerDictionary& dict) {
  std::string canon = dict.model;
  canon.push_back('\0');
  for (const auto& w : dict.hedge) {
    canon += w;
    canon.push_back('\0');
  }
  canon.push_back('\1');
  for (const auto& w : dict.verify) {
    canon += w;
    canon.push_back('\0');
  }
  canon += std::to_string(dict.tau_verify);
  canon.push_back('\0');
  canon += std::to_string(dict.tau_hedge);
  return hex64(fnv1a64(canon));
}

}  // namespace selfdoubt
