// Acceptance suite: one check per shipped criterion, one pass/fail line each.
// Runs fully offline against the deterministic stub embedder and the bundled
// fixtures; the CLI binary is exercised through real subprocess calls.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "selfdoubt/cascade.hpp"
#include "selfdoubt/discovery.hpp"
#include "selfdoubt/evalkit.hpp"
#include "selfdoubt/matcher.hpp"
#include "selfdoubt/scoring.hpp"
#include "selfdoubt/service.hpp"
#include "selfdoubt/stats.hpp"
#include "selfdoubt/trace_store.hpp"

#include "metric_fixtures.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

namespace fs = std::filesystem;
using namespace selfdoubt;

namespace {

struct check_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct skip_criterion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define ACCEPT_CHECK(cond)                                                             \
  do {                                                                                 \
    if (!(cond))                                                                       \
      throw check_failure(std::string(#cond) + " (" + __FILE__ + ":" +                 \
                          std::to_string(__LINE__) + ")");                             \
  } while (0)

std::string cli_path() {
  if (const char* env = std::getenv("SELFDOUBT_CLI")) return env;
  return SELFDOUBT_CLI_PATH;
}

std::string fixtures_path() {
  if (const char* env = std::getenv("SELFDOUBT_FIXTURES")) return env;
  return SELFDOUBT_FIXTURES_PATH;
}

int run_cli(const std::string& args) {
  const std::string command = cli_path() + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(command.c_str()));
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "selfdoubt_acc_XXXXXX").string();
    path = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// ---------------------------------------------------------------------------

void criterion_hvr_arithmetic() {
  const CompiledMatcher matcher({"maybe"}, {"check"}, "acc");
  std::mt19937 rng(1001);
  for (int trial = 0; trial < 1000; ++trial) {
    const long h = static_cast<long>(rng() % 30);
    const long v = static_cast<long>(rng() % 30);
    std::string text = "prelude words";
    for (long i = 0; i < h; ++i) text += " maybe so,";
    for (long i = 0; i < v; ++i) text += " check that;";
    const MatchResult r = matcher.count_markers(text);
    ACCEPT_CHECK(r.h == h);
    ACCEPT_CHECK(r.v == v);
    ACCEPT_CHECK(r.hvr == static_cast<double>(h) / (static_cast<double>(v) + 1.0));
    ACCEPT_CHECK((r.hvr == 0.0) == (h == 0));
  }
}

void criterion_matcher_semantics() {
  struct Fixture {
    std::vector<std::string> hedge;
    std::vector<std::string> verify;
    const char* text;
    long h;
    long v;
  };
  const std::vector<Fixture> fixtures = {
      {{"sure", "not sure"}, {}, "I'm not sure.", 1, 0},
      {{"maybe", "not sure"}, {}, "Maybe this is right, but I'm not sure.", 2, 0},
      {{"not sure"}, {}, "NOT SURE", 1, 0},
      {{}, {"check"}, "checkered flag", 0, 0},
      {{"sure"}, {}, "sureness and assure and fissure", 0, 0},
      {{"hes"}, {}, "hesitant theses", 0, 0},
      {{}, {"test"}, "latest tests attest", 0, 0},
      {{"maybe"}, {}, "(maybe) [maybe] {maybe} maybe! maybe?", 5, 0},
      {{"maybe"}, {}, "maybe,maybe.maybe;maybe:maybe", 5, 0},
      {{}, {"check"}, "check...check->check", 0, 3},
      {{"sure"}, {}, "sure-fire plan", 0, 0},
      {{"sure"}, {}, "sure - fire plan", 1, 0},
      {{}, {"double-check"}, "please double-check it", 0, 1},
      {{}, {"check"}, "please double-check it", 0, 0},
      {{}, {"check"}, "trailing hyphen check- here", 0, 1},
      {{"i'm not sure"}, {}, "i'm not sure", 1, 0},
      {{"sure"}, {}, "the students' sure answer", 1, 0},
      {{"not sure", "sure thing"}, {}, "not sure thing", 1, 0},
      {{"a b", "b c"}, {}, "a b c", 1, 0},
      {{"a b c", "a b", "c d"}, {}, "a b c d", 1, 0},
      {{"not", "not sure"}, {}, "not sure", 1, 0},
      {{"not", "not sure"}, {}, "not so sure", 1, 0},
      {{"double"}, {"double"}, "double trouble", 1, 1},
      {{"not sure"}, {}, "not  sure", 0, 0},
      {{"not sure"}, {}, "not\nsure", 0, 0},
      {{"4"}, {}, "4 42 b4", 1, 0},
      {{"maybe"}, {"check"}, "", 0, 0},
  };
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    const auto& f = fixtures[i];
    const CompiledMatcher m(f.hedge, f.verify, "acc");
    const MatchResult r = m.count_markers(f.text);
    if (r.h != f.h || r.v != f.v)
      throw check_failure("fixture " + std::to_string(i) + " ('" + f.text + "'): got h=" +
                          std::to_string(r.h) + " v=" + std::to_string(r.v) + ", want h=" +
                          std::to_string(f.h) + " v=" + std::to_string(f.v));
  }
}

void criterion_wilson_reference_rows() {
  for (const auto& row : reference::kGateRows) {
    const auto [lo, hi] =
        wilson_interval(static_cast<std::size_t>(row.successes),
                        static_cast<std::size_t>(row.n_zero), 0.95);
    if (std::abs(lo - row.ci_low) > 0.002 || std::abs(hi - row.ci_high) > 0.002)
      throw check_failure(std::string("row ") + row.model + ": got [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "], want [" + std::to_string(row.ci_low) +
                          ", " + std::to_string(row.ci_high) + "]");
    const double precision =
        static_cast<double>(row.successes) / static_cast<double>(row.n_zero);
    ACCEPT_CHECK(std::abs(precision - row.precision) < 0.0005 + 1e-12);
  }
}

void criterion_mean_recomputation() {
  double sd_auroc = 0.0, se_auroc = 0.0, sd_aurac = 0.0, se_aurac = 0.0;
  for (const auto& run : reference::kRuns) {
    sd_auroc += run.sd_auroc;
    se_auroc += run.se_auroc;
    sd_aurac += run.sd_aurac;
    se_aurac += run.se_aurac;
  }
  sd_auroc /= 21.0;
  se_auroc /= 21.0;
  sd_aurac /= 21.0;
  se_aurac /= 21.0;
  ACCEPT_CHECK(std::abs(sd_auroc - reference::kMeanSdAuroc) <= 0.002);
  ACCEPT_CHECK(std::abs(sd_aurac - reference::kMeanSdAurac) <= 0.002);
  ACCEPT_CHECK(std::abs(se_auroc - reference::kMeanSeAuroc) <= 0.002);
  ACCEPT_CHECK(std::abs(se_aurac - reference::kMeanSeAurac) <= 0.002);
}

void criterion_wilcoxon_reference() {
  const auto simple = wilcoxon_one_sided({1.0, 2.0, 3.0});
  ACCEPT_CHECK(simple.w == 6.0);
  ACCEPT_CHECK(simple.p == 0.125);

  std::vector<double> sd_minus_se, sd_minus_verb;
  for (const auto& run : reference::kRuns) {
    sd_minus_se.push_back(run.sd_auroc - run.se_auroc);
    sd_minus_verb.push_back(run.sd_auroc - run.verb_auroc);
  }
  const auto se_test = wilcoxon_one_sided(sd_minus_se);
  ACCEPT_CHECK(se_test.exact);
  ACCEPT_CHECK(std::abs(se_test.w - 198.0) <= 6.0);
  ACCEPT_CHECK(se_test.p < 0.01);

  const auto verb_test = wilcoxon_one_sided(sd_minus_verb);
  ACCEPT_CHECK(verb_test.wins == 16);
  ACCEPT_CHECK(verb_test.draws == 1);
  ACCEPT_CHECK(verb_test.losses == 4);
}

void criterion_auroc_oracle() {
  std::mt19937 rng(1006);
  std::uniform_int_distribution<int> size_dist(2, 50);
  std::uniform_real_distribution<double> score_dist(0.0, 1.0);
  std::uniform_int_distribution<int> tie_dist(0, 6);
  int done = 0;
  while (done < 200) {
    const int n = size_dist(rng);
    std::vector<double> scores;
    std::vector<bool> labels;
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      scores.push_back(done % 2 == 0 ? tie_dist(rng) / 3.0 : score_dist(rng));
      labels.push_back(rng() % 2 == 0);
      (labels.back() ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    ACCEPT_CHECK(auroc(scores, labels) == oracles::auroc_all_pairs(scores, labels));
    ++done;
  }
}

void criterion_aurac_oracle() {
  std::mt19937 rng(1007);
  std::uniform_int_distribution<int> size_dist(1, 50);
  std::uniform_real_distribution<double> score_dist(0.0, 1.0);
  std::uniform_int_distribution<int> tie_dist(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size_dist(rng);
    std::vector<double> scores;
    std::vector<bool> labels;
    for (int i = 0; i < n; ++i) {
      scores.push_back(trial % 2 == 0 ? tie_dist(rng) / 3.0 : score_dist(rng));
      labels.push_back(rng() % 2 == 0);
    }
    ACCEPT_CHECK(aurac(scores, labels) == oracles::aurac_prefix_enumeration(scores, labels));
  }
}

CalibrationProfile profile_with_zero_hedge(std::size_t zeros) {
  std::vector<CalibrationSample> samples;
  for (std::size_t i = 0; i < zeros; ++i)
    samples.push_back({0.0, 0.85 + 0.01 * static_cast<double>(i)});
  while (samples.size() < 12)
    samples.push_back(
        {0.5 + 0.3 * static_cast<double>(samples.size()), 0.4 + 0.02 * static_cast<double>(samples.size())});
  return calibrate(samples, "acc");
}

void criterion_cascade_properties() {
  const CalibrationProfile gate_on = profile_with_zero_hedge(4);
  const CalibrationProfile gate_off = profile_with_zero_hedge(3);
  ACCEPT_CHECK(gate_on.gate_enabled);
  ACCEPT_CHECK(!gate_off.gate_enabled);

  std::mt19937 rng(1008);
  std::vector<ScoredRecord> records;
  for (int i = 0; i < 1000; ++i) {
    ScoredRecord r;
    r.id = "r" + std::to_string(i);
    r.model = "acc";
    r.dataset = "synthetic";
    r.h = static_cast<long>(rng() % 6);
    r.v = static_cast<long>(rng() % 5);
    r.hvr = hedge_verify_ratio(r.h, r.v);
    if (rng() % 12 != 0) r.verb_conf = (rng() % 101) / 100.0;
    r.correct = rng() % 3 != 0;
    records.push_back(r);
  }

  const CascadeReport report = sweep_tau(records, gate_on, {}, 0.0, Tier2Fallback::defer, 101);
  ACCEPT_CHECK(report.curve.size() >= 101);
  for (std::size_t i = 1; i < report.curve.size(); ++i) {
    ACCEPT_CHECK(report.curve[i].tau >= report.curve[i - 1].tau);
    ACCEPT_CHECK(report.curve[i].coverage <= report.curve[i - 1].coverage);
    ACCEPT_CHECK(report.curve[i].tier1_share == report.curve[0].tier1_share);
  }

  // boundary inclusivity: a record whose score equals tau is accepted
  const double s = selfdoubt_score(1.5, 0.62, gate_on);
  const Decision at_boundary = decide(3, 1.5, 0.62, gate_on, s);
  ACCEPT_CHECK(at_boundary.outcome == Outcome::accept);
  ACCEPT_CHECK(at_boundary.tier == DecisionTier::tier2_score);
  const Decision just_above = decide(3, 1.5, 0.62, gate_on, std::nextafter(s, 1e300));
  ACCEPT_CHECK(just_above.outcome == Outcome::defer);

  // the gate decides tier-1 acceptance regardless of confidence
  const Decision gated = decide(0, 0.0, 0.01, gate_on, 1e9);
  ACCEPT_CHECK(gated.outcome == Outcome::accept);
  ACCEPT_CHECK(gated.tier == DecisionTier::tier1_gate);
  const Decision ungated = decide(0, 0.0, 0.01, gate_off, 1e9);
  ACCEPT_CHECK(ungated.outcome == Outcome::defer);
  ACCEPT_CHECK(ungated.tier == DecisionTier::tier2_score);
}

void criterion_normalization_modes() {
  std::mt19937 rng(1009);
  std::uniform_real_distribution<double> conf_dist(0.05, 0.95);
  std::vector<ScoredRecord> records;
  std::vector<CalibrationSample> samples;
  for (int i = 0; i < 90; ++i) {
    ScoredRecord r;
    r.id = "c" + std::to_string(i);
    r.h = static_cast<long>(rng() % 5);
    r.v = static_cast<long>(rng() % 4);
    r.hvr = hedge_verify_ratio(r.h, r.v);
    r.verb_conf = conf_dist(rng);
    records.push_back(r);
    samples.push_back({r.hvr, *r.verb_conf});
  }
  const NormStats oracle = run_norm_stats(records);
  const CalibrationProfile profile = calibrate(samples, "acc");
  for (const auto& r : records) {
    const double a = selfdoubt_score(r.hvr, *r.verb_conf, oracle);
    const double b = selfdoubt_score(r.hvr, *r.verb_conf, profile);
    ACCEPT_CHECK(std::abs(a - b) <= 1e-9);
  }

  // affine invariance per channel under x -> 2x + 0.1
  std::vector<CalibrationSample> conf_shifted, hvr_shifted;
  for (const auto& s : samples) {
    conf_shifted.push_back({s.hvr, 2.0 * s.verb_conf + 0.1});
    hvr_shifted.push_back({2.0 * s.hvr + 0.1, s.verb_conf});
  }
  const CalibrationProfile conf_profile = calibrate(conf_shifted, "acc");
  const CalibrationProfile hvr_profile = calibrate(hvr_shifted, "acc");
  for (const auto& s : samples) {
    const double base = selfdoubt_score(s.hvr, s.verb_conf, profile);
    const double with_conf = selfdoubt_score(s.hvr, 2.0 * s.verb_conf + 0.1, conf_profile);
    const double with_hvr = selfdoubt_score(2.0 * s.hvr + 0.1, s.verb_conf, hvr_profile);
    ACCEPT_CHECK(std::abs(base - with_conf) <= 1e-9);
    ACCEPT_CHECK(std::abs(base - with_hvr) <= 1e-9);
  }
}

void criterion_discovery_determinism() {
  TempDir t;
  const std::string fixtures = fixtures_path();
  if (!fs::exists(fixtures + "/seed_runs"))
    throw check_failure("fixtures not found at " + fixtures);

  const auto discover = [&](const std::string& out) {
    return run_cli("discover-seeds --runs-dir " + fixtures + "/seed_runs --out " + out);
  };
  ACCEPT_CHECK(discover(t / "seeds_a") == 0);
  ACCEPT_CHECK(discover(t / "seeds_b") == 0);
  ACCEPT_CHECK(read_file_bytes(t / "seeds_a/hedge.json") ==
               read_file_bytes(t / "seeds_b/hedge.json"));
  ACCEPT_CHECK(read_file_bytes(t / "seeds_a/verify.json") ==
               read_file_bytes(t / "seeds_b/verify.json"));

  const std::string expand_base = "expand-markers --model gpt-oss-20b --calibration " + fixtures +
                                  "/calibration.jsonl --timestamp 2026-01-01T00:00:00Z --seeds " +
                                  (t / "seeds_a") + " ";
  ACCEPT_CHECK(run_cli(expand_base + "--out " + (t / "dict_a.json")) == 0);
  ACCEPT_CHECK(run_cli(expand_base + "--out " + (t / "dict_b.json")) == 0);
  ACCEPT_CHECK(read_file_bytes(t / "dict_a.json") == read_file_bytes(t / "dict_b.json"));

  const MarkerDictionary base = load_dictionary(t / "dict_a.json");
  ACCEPT_CHECK(!base.hedge.empty());
  ACCEPT_CHECK(!base.verify.empty());

  // raising either threshold by 0.05 never adds a marker
  ACCEPT_CHECK(run_cli(expand_base + "--tau-verify 0.19 --tau-hedge 0.20 --out " +
                       (t / "dict_tv.json")) == 0);
  ACCEPT_CHECK(run_cli(expand_base + "--tau-verify 0.14 --tau-hedge 0.25 --out " +
                       (t / "dict_th.json")) == 0);
  const MarkerDictionary tv = load_dictionary(t / "dict_tv.json");
  const MarkerDictionary th = load_dictionary(t / "dict_th.json");
  const std::set<std::string> base_verify(base.verify.begin(), base.verify.end());
  const std::set<std::string> base_hedge(base.hedge.begin(), base.hedge.end());
  for (const auto& w : tv.verify) ACCEPT_CHECK(base_verify.count(w) == 1);
  ACCEPT_CHECK(tv.hedge == base.hedge);
  for (const auto& w : th.hedge) ACCEPT_CHECK(base_hedge.count(w) == 1);
  ACCEPT_CHECK(th.verify == base.verify);

  // joint multiplier sweep: five artifacts with monotonically shrinking lists
  ACCEPT_CHECK(run_cli("sweep-thresholds --model gpt-oss-20b --calibration " + fixtures +
                       "/calibration.jsonl --seeds " + (t / "seeds_a") + " --out-dir " +
                       (t / "sweep")) == 0);
  const std::vector<std::string> names = {"dict_x0.50.json", "dict_x0.75.json",
                                          "dict_x1.00.json", "dict_x1.25.json",
                                          "dict_x1.50.json"};
  std::vector<MarkerDictionary> dicts;
  for (const auto& name : names) dicts.push_back(load_dictionary(t / ("sweep/" + name)));
  ACCEPT_CHECK(dicts.size() == 5);
  for (std::size_t i = 1; i < dicts.size(); ++i) {
    const std::set<std::string> prev_h(dicts[i - 1].hedge.begin(), dicts[i - 1].hedge.end());
    const std::set<std::string> prev_v(dicts[i - 1].verify.begin(), dicts[i - 1].verify.end());
    ACCEPT_CHECK(dicts[i].hedge.size() <= prev_h.size());
    ACCEPT_CHECK(dicts[i].verify.size() <= prev_v.size());
    for (const auto& w : dicts[i].hedge) ACCEPT_CHECK(prev_h.count(w) == 1);
    for (const auto& w : dicts[i].verify) ACCEPT_CHECK(prev_v.count(w) == 1);
  }
}

void criterion_ngram_thresholds() {
  for (const std::size_t n : {std::size_t{10}, std::size_t{90}, std::size_t{180}}) {
    const std::size_t threshold = fraction_threshold(0.10, n);
    ACCEPT_CHECK(threshold == (n + 9) / 10);

    Corpus corpus;
    for (std::size_t i = 0; i < n; ++i) {
      TraceRecord r;
      r.id = "t" + std::to_string(i);
      r.model = "m";
      r.dataset = "d";
      r.trace_text = "neutral filler line " + std::to_string(i);
      if (i < threshold - 1) r.trace_text += " borderline marker";
      if (i < threshold) r.trace_text += " qualifying marker";
      r.response_text = "x";
      corpus.records.push_back(std::move(r));
    }
    const auto ngrams = extract_ngrams(corpus, 3, 0.10);
    bool saw_qualifying = false, saw_borderline = false;
    for (const auto& [gram, count] : ngrams) {
      if (gram == "qualifying marker") saw_qualifying = true;
      if (gram == "borderline marker") saw_borderline = true;
    }
    ACCEPT_CHECK(saw_qualifying);
    ACCEPT_CHECK(!saw_borderline);
  }
}

void criterion_confidence_parsing() {
  ACCEPT_CHECK(parse_confidence("\\boxed{C}\nConfidence: 85%") == 0.85);
  ACCEPT_CHECK(parse_confidence("about 70% of cases ... I'd say 90%") == 0.90);
  ACCEPT_CHECK(parse_confidence("Confidence: 150%") == std::nullopt);
  ACCEPT_CHECK(parse_confidence("no value anywhere") == std::nullopt);
  ACCEPT_CHECK(parse_confidence("Confidence=42") == 0.42);
  ACCEPT_CHECK(parse_confidence("Confidence: 12.5%") == 0.125);
  ACCEPT_CHECK(parse_confidence("Confidence: -20%") == std::nullopt);
  ACCEPT_CHECK(parse_confidence("maybe 55 % either way") == std::nullopt);

  ACCEPT_CHECK(extract_answer_region("a</think>b</think>final") == "final");
  ACCEPT_CHECK(extract_answer_region("no tag here") == "no tag here");
  ACCEPT_CHECK(extract_answer_region("") == "");

  TraceRecord r;
  r.response_text = "Confidence: 5% in thought</think>The answer is (B). Confidence: 75%";
  ACCEPT_CHECK(effective_confidence(r) == 0.75);
  r.response_text = "Confidence: 5% in thought</think>The answer is (B).";
  ACCEPT_CHECK(effective_confidence(r) == std::nullopt);
}

void criterion_service_cli_parity() {
  TempDir t;
  const std::string fixtures = fixtures_path();
  const std::string dict_path = fixtures + "/dict_manual.json";

  ACCEPT_CHECK(run_cli("calibrate --dict " + dict_path + " --corpus " + fixtures +
                       "/calibration.jsonl --out " + (t / "profile.json")) == 0);

  // 100 random records over the manual dictionary's vocabulary
  std::mt19937 rng(1013);
  const std::vector<std::string> hedge_bits = {"maybe", "perhaps", "not sure", "i doubt",
                                               "unsure"};
  const std::vector<std::string> verify_bits = {"check", "verify", "let me check",
                                                "substitute back", "double-check"};
  const std::vector<std::string> filler = {"the sum telescopes", "rows stay independent",
                                           "both limits agree", "expand and collect"};
  Corpus corpus;
  for (int i = 0; i < 100; ++i) {
    TraceRecord r;
    r.id = "p" + std::to_string(i);
    r.model = "gpt-oss-20b";
    r.dataset = "parity";
    std::string text;
    const int pieces = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < pieces; ++k) {
      const int kind = static_cast<int>(rng() % 3);
      if (kind == 0)
        text += hedge_bits[rng() % hedge_bits.size()];
      else if (kind == 1)
        text += verify_bits[rng() % verify_bits.size()];
      else
        text += filler[rng() % filler.size()];
      text += rng() % 4 == 0 ? ". " : ", ";
    }
    r.trace_text = text;
    if (rng() % 5 != 0)
      r.response_text = "steps</think>answer (C)\nConfidence: " + std::to_string(rng() % 101) + "%";
    else
      r.response_text = "steps</think>answer (C)";
    corpus.records.push_back(std::move(r));
  }
  save_corpus(corpus, t / "corpus.jsonl");

  ACCEPT_CHECK(run_cli("score --dict " + dict_path + " --corpus " + (t / "corpus.jsonl") +
                       " --profile " + (t / "profile.json") + " --out " + (t / "scored.jsonl")) ==
               0);
  const auto scored = load_scored_records(t / "scored.jsonl");
  ACCEPT_CHECK(scored.size() == corpus.records.size());

  ScoringService service;
  std::map<std::string, ModelAssets> assets;
  ModelAssets a;
  a.dictionary = load_dictionary(dict_path);
  a.matcher = CompiledMatcher(a.dictionary);
  a.profile = load_profile(t / "profile.json");
  assets[a.dictionary.model] = std::move(a);
  service.load(std::move(assets), 0.0);
  httplib::Server server;
  const int port = service.bind(server, "127.0.0.1", 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& record = corpus.records[i];
    json req;
    req["model"] = record.model;
    req["trace_text"] = record.trace_text;
    req["response_text"] = record.response_text;
    auto res = client.Post("/v1/score", req.dump(), "application/json");
    ACCEPT_CHECK(res && res->status == 200);
    const json body = json::parse(res->body);
    const auto& batch = scored[i];
    ACCEPT_CHECK(batch.id == record.id);
    ACCEPT_CHECK(body.at("h").get<long>() == batch.h);
    ACCEPT_CHECK(body.at("v").get<long>() == batch.v);
    ACCEPT_CHECK(std::abs(body.at("hvr").get<double>() - batch.hvr) <= 1e-12);
    ACCEPT_CHECK(body.at("verb_conf").is_null() == !batch.verb_conf.has_value());
    if (batch.verb_conf)
      ACCEPT_CHECK(std::abs(body.at("verb_conf").get<double>() - *batch.verb_conf) <= 1e-12);
    ACCEPT_CHECK(body.at("selfdoubt").is_null() == !batch.selfdoubt.has_value());
    if (batch.selfdoubt)
      ACCEPT_CHECK(std::abs(body.at("selfdoubt").get<double>() - *batch.selfdoubt) <= 1e-12);
  }
  server.stop();
  listener.join();
}

void criterion_user_corpus() {
  const char* corpus_path = std::getenv("SELFDOUBT_REAL_CORPUS");
  const char* calibration_path = std::getenv("SELFDOUBT_REAL_CALIBRATION");
  const char* dict_path = std::getenv("SELFDOUBT_REAL_DICT");
  if (!corpus_path || !calibration_path || !dict_path)
    throw skip_criterion(
        "set SELFDOUBT_REAL_CORPUS, SELFDOUBT_REAL_CALIBRATION and SELFDOUBT_REAL_DICT to run");

  const MarkerDictionary dict = load_dictionary(dict_path);
  const CompiledMatcher matcher(dict);
  const Corpus calibration = load_corpus(calibration_path, SchemaMode::lenient);
  const Corpus corpus = load_corpus(corpus_path, SchemaMode::lenient);
  const CalibrationProfile profile =
      calibrate(calibration_samples(calibration, matcher), dict.model);
  const auto scored = score_corpus(corpus, matcher, &profile);
  ACCEPT_CHECK(scored.size() == corpus.records.size());

  const auto gate = gate_report(scored);
  ACCEPT_CHECK(!gate.empty());
  const auto& pooled = gate.back();
  ACCEPT_CHECK(pooled.n_zero <= pooled.n);
  for (const auto& g : gate) {
    ACCEPT_CHECK(g.coverage >= 0.0 && g.coverage <= 1.0);
    if (g.precision) {
      ACCEPT_CHECK(g.wilson_ci.has_value());
      ACCEPT_CHECK(g.wilson_ci->first <= *g.precision);
      ACCEPT_CHECK(g.wilson_ci->second >= *g.precision);
    }
  }

  const EvalReport report = build_report(scored, all_methods());
  ACCEPT_CHECK(!report.per_run.empty());

  const CascadeReport curve = sweep_tau(scored, profile);
  for (std::size_t i = 1; i < curve.curve.size(); ++i)
    ACCEPT_CHECK(curve.curve[i].coverage <= curve.curve[i - 1].coverage);
}

struct Criterion {
  int id;
  const char* name;
  std::function<void()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "hedge/verify ratio arithmetic is exact", criterion_hvr_arithmetic},
      {2, "matcher longest-match word-boundary semantics", criterion_matcher_semantics},
      {3, "Wilson intervals reproduce the reference gate rows", criterion_wilson_reference_rows},
      {4, "pooled means match the reference tables", criterion_mean_recomputation},
      {5, "signed-rank statistics match the reference results", criterion_wilcoxon_reference},
      {6, "AUROC equals the all-pairs oracle", criterion_auroc_oracle},
      {7, "AURAC equals the prefix-enumeration oracle", criterion_aurac_oracle},
      {8, "cascade sweep and gate boundary properties", criterion_cascade_properties},
      {9, "oracle and calibrated normalization agree", criterion_normalization_modes},
      {10, "discovery pipeline determinism and threshold monotonicity",
       criterion_discovery_determinism},
      {11, "candidate n-gram thresholds at corpus sizes 10/90/180", criterion_ngram_thresholds},
      {12, "confidence parsing and answer-region isolation", criterion_confidence_parsing},
      {13, "service and batch CLI parity on random records", criterion_service_cli_parity},
      {14, "user-supplied corpus end-to-end consistency", criterion_user_corpus},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    try {
      criterion.fn();
      std::printf("[PASS] %2d. %s\n", criterion.id, criterion.name);
    } catch (const skip_criterion& s) {
      std::printf("[SKIP] %2d. %s: %s\n", criterion.id, criterion.name, s.what());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2d. %s: %s\n", criterion.id, criterion.name, e.what());
    }
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
