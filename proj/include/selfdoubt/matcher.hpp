#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "selfdoubt/discovery.hpp"
#include "selfdoubt/errors.hpp"
#include "selfdoubt/tokenizer.hpp"

namespace selfdoubt {

struct MarkerSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string marker;
};

struct MatchResult {
  long h = 0;
  long v = 0;
  double hvr = 0.0;
  std::vector<MarkerSpan> hedge_spans;
  std::vector<MarkerSpan> verify_spans;
};

inline double hedge_verify_ratio(long h, long v) {
  return static_cast<double>(h) / (static_cast<double>(v) + 1.0);
}

namespace detail {

struct Pattern {
  std::string text;        // folded, space-joined tokens
  std::size_t token_count; // number of space-separated tokens
};

// longest token count first, then longest text, then lexicographic
inline bool pattern_priority(const Pattern& a, const Pattern& b) {
  if (a.token_count != b.token_count) return a.token_count > b.token_count;
  if (a.text.size() != b.text.size()) return a.text.size() > b.text.size();
  return a.text < b.text;
}

struct PatternSet {
  std::vector<Pattern> patterns;
  // first token -> indices into patterns, preserving priority order
  std::map<std::string, std::vector<std::size_t>> by_first_token;

  void build(const std::vector<std::string>& markers) {
    patterns.clear();
    by_first_token.clear();
    for (const auto& m : markers) {
      Pattern p;
      p.text = fold_ascii(m);
      p.token_count = split_words(p.text).size();
      if (p.token_count == 0) continue;
      patterns.push_back(std::move(p));
    }
    std::sort(patterns.begin(), patterns.end(), pattern_priority);
    patterns.erase(std::unique(patterns.begin(), patterns.end(),
                               [](const Pattern& a, const Pattern& b) { return a.text == b.text; }),
                   patterns.end());
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      const auto space = patterns[i].text.find(' ');
      by_first_token[patterns[i].text.substr(0, space)].push_back(i);
    }
  }
};

}  // namespace detail

/// Case-insensitive multi-pattern matcher over marker dictionaries. A marker
/// matches where its literal folded text occurs with token boundaries at both
/// edges. Scanning is left to right; at each position the marker with the
/// most tokens (then the longest text) wins and consumes its span, so matches
/// within a role never overlap.
class CompiledMatcher {
 public:
  CompiledMatcher() = default;

  explicit CompiledMatcher(const MarkerDictionary& dict) : model_(dict.model) {
    if (dict.hedge.empty() && dict.verify.empty())
      throw validation_error("compile: dictionary has no markers");
    hedge_.build(dict.hedge);
    verify_.build(dict.verify);
    dictionary_hash_ = dictionary_hash(dict);
  }

  CompiledMatcher(std::vector<std::string> hedge, std::vector<std::string> verify,
                  std::string model = "") : model_(std::move(model)) {
    if (hedge.empty() && verify.empty())
      throw validation_error("compile: dictionary has no markers");
    hedge_.build(hedge);
    verify_.build(verify);
  }

  const std::string& model() const { return model_; }
  const std::string& source_hash() const { return dictionary_hash_; }
  std::size_t hedge_pattern_count() const { return hedge_.patterns.size(); }
  std::size_t verify_pattern_count() const { return verify_.patterns.size(); }

  MatchResult count_markers(std::string_view text) const {
    MatchResult result;
    const TextShape shape = shape_text(text);
    result.hedge_spans = scan(shape, hedge_);
    result.verify_spans = scan(shape, verify_);
    result.h = static_cast<long>(result.hedge_spans.size());
    result.v = static_cast<long>(result.verify_spans.size());
    result.hvr = hedge_verify_ratio(result.h, result.v);
    return result;
  }

 private:
  static std::vector<MarkerSpan> scan(const TextShape& shape, const detail::PatternSet& set) {
    std::vector<MarkerSpan> spans;
    if (set.patterns.empty()) return spans;
    const std::string& f = shape.folded;
    const std::size_t n = f.size();

    std::size_t i = 0;
    while (i < n) {
      if (!shape.token_byte[i] || (i > 0 && shape.token_byte[i - 1])) {
        ++i;
        continue;
      }
      // i is the start of a token run; the first marker token must equal it
      std::size_t run_end = i;
      while (run_end < n && shape.token_byte[run_end]) ++run_end;
      const std::string first_token = f.substr(i, run_end - i);

      const detail::Pattern* winner = nullptr;
      auto bucket = set.by_first_token.find(first_token);
      if (bucket != set.by_first_token.end()) {
        for (std::size_t idx : bucket->second) {
          const detail::Pattern& p = set.patterns[idx];
          if (i + p.text.size() > n) continue;
          if (f.compare(i, p.text.size(), p.text) != 0) continue;
          const std::size_t end = i + p.text.size();
          if (end < n && shape.token_byte[end]) continue;  // right edge inside a token
          winner = &p;
          break;  // bucket is in priority order
        }
      }
      if (winner) {
        spans.push_back({i, i + winner->text.size(), winner->text});
        i += winner->text.size();
      } else {
        i = run_end;
      }
    }
    return spans;
  }

  std::string model_;
  std::string dictionary_hash_;
  detail::PatternSet hedge_;
  detail::PatternSet verify_;
};

}  // namespace selfdoubt
