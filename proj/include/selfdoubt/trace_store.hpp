#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "selfdoubt/errors.hpp"
#include "selfdoubt/jsonl.hpp"
#include "selfdoubt/tokenizer.hpp"

namespace selfdoubt {

/// One model response: the reasoning trace plus the answer region and the
/// optional labels used downstream.
struct TraceRecord {
  std::string id;
  std::string model;
  std::string dataset;
  std::optional<std::string> question;
  std::string trace_text;
  std::string response_text;
  std::optional<double> verbalized_confidence;  // fraction in [0,1]
  std::optional<bool> correct;
  std::optional<std::vector<std::string>> sampled_answers;
  json extra = json::object();  // unknown fields, preserved on round-trip

  std::size_t trace_length() const { return trace_text.size(); }
};

enum class SchemaMode { strict, lenient };

struct Corpus {
  std::vector<TraceRecord> records;  // file order; downstream ties reference this order
  std::string source_path;
  std::string model;    // common model name or "mixed"
  std::string dataset;  // common dataset name or "mixed"
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline TraceRecord record_from_json(const json& j, std::size_t line_no) {
  const auto fail = [line_no](const std::string& msg) -> void {
    throw validation_error("line " + std::to_string(line_no) + ": " + msg);
  };
  if (!j.is_object()) fail("record is not an object");

  TraceRecord r;
  const auto need_string = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string()) fail(std::string("missing or non-string field: ") + key);
    return j.at(key).get<std::string>();
  };
  r.id = need_string("id");
  if (r.id.empty()) fail("empty id");
  r.model = need_string("model");
  r.dataset = need_string("dataset");
  r.trace_text = need_string("trace_text");
  r.response_text = need_string("response_text");

  if (j.contains("question")) {
    if (!j.at("question").is_string() && !j.at("question").is_null()) fail("non-string question");
    if (j.at("question").is_string()) r.question = j.at("question").get<std::string>();
  }
  if (j.contains("verbalized_confidence") && !j.at("verbalized_confidence").is_null()) {
    if (!j.at("verbalized_confidence").is_number()) fail("non-numeric verbalized_confidence");
    double v = j.at("verbalized_confidence").get<double>();
    if (!(v >= 0.0 && v <= 1.0)) fail("verbalized_confidence outside [0,1]");
    r.verbalized_confidence = v;
  }
  if (j.contains("correct") && !j.at("correct").is_null()) {
    if (!j.at("correct").is_boolean()) fail("non-boolean correct");
    r.correct = j.at("correct").get<bool>();
  }
  if (j.contains("sampled_answers") && !j.at("sampled_answers").is_null()) {
    if (!j.at("sampled_answers").is_array()) fail("sampled_answers is not an array");
    std::vector<std::string> answers;
    for (const auto& a : j.at("sampled_answers")) {
      if (!a.is_string()) fail("sampled_answers entry is not a string");
      answers.push_back(a.get<std::string>());
    }
    r.sampled_answers = std::move(answers);
  }

  static const std::set<std::string> known = {
      "id",       "model",          "dataset",       "question", "trace_text",
      "response_text", "verbalized_confidence", "correct", "sampled_answers"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) r.extra[it.key()] = it.value();
  return r;
}

}  // namespace detail

inline json record_to_json(const TraceRecord& r) {
  json j = r.extra.is_object() ? r.extra : json::object();
  j["id"] = r.id;
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  if (r.question) j["question"] = *r.question;
  j["trace_text"] = r.trace_text;
  j["response_text"] = r.response_text;
  if (r.verbalized_confidence) j["verbalized_confidence"] = *r.verbalized_confidence;
  if (r.correct) j["correct"] = *r.correct;
  if (r.sampled_answers) j["sampled_answers"] = *r.sampled_answers;
  return j;
}

/// Loads a line-delimited trace corpus. Strict mode fails on the first
/// malformed line or duplicate id; lenient mode skips them and records a
/// warning per skip.
inline Corpus load_corpus(const std::string& path, SchemaMode mode = SchemaMode::strict) {
  Corpus corpus;
  corpus.source_path = path;
  std::set<std::string> seen_ids;

  for_each_line(path, [&](std::size_t line_no, const std::string& line) {
    if (is_blank(line)) return;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    try {
      if (j.is_discarded()) throw validation_error("line " + std::to_string(line_no) + ": invalid JSON");
      TraceRecord r = detail::record_from_json(j, line_no);
      if (!seen_ids.insert(r.id).second)
        throw validation_error("line " + std::to_string(line_no) + ": duplicate id: " + r.id);
      corpus.records.push_back(std::move(r));
    } catch (const validation_error& e) {
      if (mode == SchemaMode::strict) throw;
      ++corpus.skipped;
      corpus.warnings.push_back(e.what());
    }
  });

  corpus.model = "mixed";
  corpus.dataset = "mixed";
  if (!corpus.records.empty()) {
    bool same_model = true, same_dataset = true;
    for (const auto& r : corpus.records) {
      same_model = same_model && r.model == corpus.records.front().model;
      same_dataset = same_dataset && r.dataset == corpus.records.front().dataset;
    }
    if (same_model) corpus.model = corpus.records.front().model;
    if (same_dataset) corpus.dataset = corpus.records.front().dataset;
  }
  return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open file for writing: " + path);
  for (const auto& r : corpus.records) out << record_to_json(r).dump() << "\n";
  if (!out) throw io_error("write failed: " + path);
}

/// Returns the text after the final literal `</think>` tag, or the whole
/// response when the tag is absent.
inline std::string extract_answer_region(std::string_view response_text) {
  static constexpr std::string_view tag = "</think>";
  std::size_t pos = response_text.rfind(tag);
  if (pos == std::string_view::npos) return std::string(response_text);
  return std::string(response_text.substr(pos + tag.size()));
}

namespace detail {

// Parses an unsigned decimal number at `pos` (digits with at most one dot).
// Returns the value and advances `pos` past it, or nullopt if no digit.
inline std::optional<double> scan_number(std::string_view s, std::size_t& pos) {
  std::size_t i = pos;
  bool digit = false;
  int dots = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c >= '0' && c <= '9') {
      digit = true;
      ++i;
    } else if (c == '.') {
      ++dots;
      ++i;
    } else {
      break;
    }
  }
  if (!digit || dots > 1) return std::nullopt;
  double value = 0.0;
  auto res = std::from_chars(s.data() + pos, s.data() + i, value);
  if (res.ec != std::errc()) return std::nullopt;
  pos = i;
  return value;
}

inline bool is_ascii_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline void skip_blanks(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

}  // namespace detail

/// Extracts a verbalized confidence from an answer region and scales it to
/// [0,1]. First pass: explicit `Confidence:`/`Confidence=` fields. Fallback:
/// any number immediately followed by `%`. Both passes keep the last value in
/// [0,100]; absent when neither pass applies.
inline std::optional<double> parse_confidence(std::string_view answer_region) {
  const std::string folded = fold_ascii(answer_region);
  static constexpr std::string_view field = "confidence";

  std::optional<double> best;
  std::size_t search = 0;
  while (true) {
    std::size_t at = folded.find(field, search);
    if (at == std::string::npos) break;
    search = at + 1;
    if (at > 0 && detail::is_ascii_letter(folded[at - 1])) continue;  // e.g. "overconfidence"
    std::size_t i = at + field.size();
    detail::skip_blanks(folded, i);
    if (i >= folded.size() || (folded[i] != ':' && folded[i] != '=')) continue;
    ++i;
    detail::skip_blanks(folded, i);
    if (i < folded.size() && (folded[i] == '-' || folded[i] == '+')) continue;  // signs rejected
    auto value = detail::scan_number(folded, i);
    if (!value) continue;
    if (*value >= 0.0 && *value <= 100.0) best = *value;
  }
  if (best) return *best / 100.0;

  // Fallback: percentage expressions, '%' adjacent to the number.
  for (std::size_t i = 0; i < folded.size(); ++i) {
    if (folded[i] != '%') continue;
    std::size_t b = i;
    int dots = 0;
    bool digit = false;
    while (b > 0) {
      char c = folded[b - 1];
      if (c >= '0' && c <= '9') {
        digit = true;
        --b;
      } else if (c == '.') {
        ++dots;
        --b;
      } else {
        break;
      }
    }
    if (!digit || dots > 1) continue;
    if (b > 0 && (folded[b - 1] == '-' || folded[b - 1] == '+')) continue;
    std::size_t pos = b;
    auto value = detail::scan_number(folded, pos);
    if (!value || pos != i) continue;
    if (*value >= 0.0 && *value <= 100.0) best = *value;
  }
  if (best) return *best / 100.0;
  return std::nullopt;
}

/// Confidence signal for a record: the stored field when present, otherwise
/// parsed from the answer region of the response text.
inline std::optional<double> effective_confidence(const TraceRecord& r) {
  if (r.verbalized_confidence) return r.verbalized_confidence;
  return parse_confidence(extract_answer_region(r.response_text));
}

}  // namespace selfdoubt
