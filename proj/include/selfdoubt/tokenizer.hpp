#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace selfdoubt {

/// ASCII case fold; bytes outside A-Z are left untouched.
inline std::string fold_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

namespace tok {

struct Codepoint {
  std::size_t pos = 0;  // byte offset
  std::size_t len = 1;  // byte length
  std::uint32_t cp = 0;
  bool valid = false;
};

inline std::vector<Codepoint> decode_utf8(std::string_view s) {
  std::vector<Codepoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  const auto cont = [&](std::size_t k) {
    return k < s.size() && (static_cast<unsigned char>(s[k]) & 0xC0) == 0x80;
  };
  while (i < s.size()) {
    unsigned char b = static_cast<unsigned char>(s[i]);
    Codepoint c;
    c.pos = i;
    if (b < 0x80) {
      c.cp = b;
      c.len = 1;
      c.valid = true;
    } else if ((b & 0xE0) == 0xC0 && cont(i + 1)) {
      c.cp = ((b & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
      c.len = 2;
      c.valid = c.cp >= 0x80;
    } else if ((b & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
      c.cp = ((b & 0x0Fu) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
             (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
      c.len = 3;
      c.valid = c.cp >= 0x800;
    } else if ((b & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
      c.cp = ((b & 0x07u) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
             ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
             (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
      c.len = 4;
      c.valid = c.cp >= 0x10000 && c.cp <= 0x10FFFF;
    } else {
      c.cp = b;
      c.len = 1;
      c.valid = false;  // stray byte, treated as separator
    }
    out.push_back(c);
    i += c.len;
  }
  return out;
}

enum class CharClass : std::uint8_t {
  separator,
  letter,      // letters, digits, non-ASCII word characters
  apostrophe,  // ' and U+2019; token character in any position
  hyphen,      // token character only between two letter-class codepoints
};

inline CharClass classify_cp(const Codepoint& c) {
  if (!c.valid) return CharClass::separator;
  if (c.cp < 0x80) {
    if ((c.cp >= 'a' && c.cp <= 'z') || (c.cp >= 'A' && c.cp <= 'Z') ||
        (c.cp >= '0' && c.cp <= '9'))
      return CharClass::letter;
    if (c.cp == '\'') return CharClass::apostrophe;
    if (c.cp == '-') return CharClass::hyphen;
    return CharClass::separator;
  }
  if (c.cp == 0x2019) return CharClass::apostrophe;  // right single quote as apostrophe
  // General and CJK punctuation blocks stay separators; any other non-ASCII
  // codepoint counts as a word character.
  if ((c.cp >= 0x2000 && c.cp <= 0x206F) || (c.cp >= 0x3000 && c.cp <= 0x303F))
    return CharClass::separator;
  return CharClass::letter;
}

inline bool sentence_final(std::uint32_t cp) {
  return cp == '.' || cp == '!' || cp == '?' || cp == 0x2026;
}

}  // namespace tok

/// Byte-level view of a text used by both the n-gram extractor and the
/// marker matcher: which bytes belong to tokens and where sentences end.
struct TextShape {
  std::string folded;                       // ASCII-folded copy, same length
  std::vector<std::uint8_t> token_byte;     // 1 if the byte is part of a token
  std::vector<std::uint8_t> sentence_end;   // 1 at sentence-final punctuation bytes
};

inline TextShape shape_text(std::string_view text) {
  TextShape shape;
  shape.folded = fold_ascii(text);
  shape.token_byte.assign(text.size(), 0);
  shape.sentence_end.assign(text.size(), 0);

  const auto cps = tok::decode_utf8(text);
  std::vector<tok::CharClass> cls(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) cls[i] = tok::classify_cp(cps[i]);

  for (std::size_t i = 0; i < cps.size(); ++i) {
    bool is_token = false;
    switch (cls[i]) {
      case tok::CharClass::letter:
      case tok::CharClass::apostrophe:
        is_token = true;
        break;
      case tok::CharClass::hyphen:
        // internal hyphens only: both neighbours must be unconditional token chars
        is_token = i > 0 && i + 1 < cps.size() &&
                   (cls[i - 1] == tok::CharClass::letter ||
                    cls[i - 1] == tok::CharClass::apostrophe) &&
                   (cls[i + 1] == tok::CharClass::letter ||
                    cls[i + 1] == tok::CharClass::apostrophe);
        break;
      case tok::CharClass::separator:
        break;
    }
    if (is_token)
      for (std::size_t b = 0; b < cps[i].len; ++b) shape.token_byte[cps[i].pos + b] = 1;
    if (cls[i] == tok::CharClass::separator && tok::sentence_final(cps[i].cp))
      shape.sentence_end[cps[i].pos] = 1;
  }
  return shape;
}

struct Token {
  std::size_t begin = 0;  // byte range in the original text
  std::size_t end = 0;
  std::size_t group = 0;  // adjacency group; n-grams never span groups
  std::string text;       // folded form
};

/// Splits shaped text into tokens. Runs without any letter or digit (for
/// example bare apostrophes) are dropped and break n-gram adjacency, as do
/// sentence-final punctuation marks.
inline std::vector<Token> tokenize(const TextShape& shape) {
  std::vector<Token> out;
  const std::string& f = shape.folded;
  std::size_t n = f.size();
  std::size_t group = 0;
  std::size_t i = 0;
  while (i < n) {
    if (!shape.token_byte[i]) {
      if (shape.sentence_end[i]) ++group;
      ++i;
      continue;
    }
    std::size_t b = i;
    while (i < n && shape.token_byte[i]) ++i;
    bool substantive = false;
    for (std::size_t k = b; k < i; ++k) {
      unsigned char c = static_cast<unsigned char>(f[k]);
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
        substantive = true;
        break;
      }
    }
    if (!substantive) {
      ++group;  // junk run: breaks adjacency but yields no token
      continue;
    }
    Token t;
    t.begin = b;
    t.end = i;
    t.group = group;
    t.text = f.substr(b, i - b);
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Token> tokenize(std::string_view text) { return tokenize(shape_text(text)); }

/// Splits a marker or phrase on single spaces (markers are stored with
/// space-joined tokens).
inline std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < phrase.size()) {
    while (i < phrase.size() && phrase[i] == ' ') ++i;
    std::size_t b = i;
    while (i < phrase.size() && phrase[i] != ' ') ++i;
    if (i > b) out.emplace_back(phrase.substr(b, i - b));
  }
  return out;
}

}  // namespace selfdoubt
