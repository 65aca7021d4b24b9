#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gcn/corpus.hpp"
#include "gcn/error.hpp"
#include "gcn/utf8.hpp"

namespace gcn {

/// Character <-> index bijection. Indices 0, 1, 2 are the STR, EOS and UNK
/// specials; corpus characters follow in ascending code point order.
class Vocabulary {
 public:
  static constexpr int kStr = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kSpecials = 3;

  Vocabulary() = default;

  /// Any order, duplicates allowed.
  explicit Vocabulary(const std::vector<char32_t>& chars) {
    std::set<char32_t> uniq(chars.begin(), chars.end());
    chars_.assign(uniq.begin(), uniq.end());
    for (std::size_t i = 0; i < chars_.size(); ++i) index_[chars_[i]] = static_cast<int>(i) + kSpecials;
  }

  int size() const noexcept { return static_cast<int>(chars_.size()) + kSpecials; }
  const std::vector<char32_t>& characters() const noexcept { return chars_; }

  /// Index of `c`, or kUnk when `c` is not in the vocabulary.
  int index_of(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(char32_t c) const { return index_.count(c) != 0; }

  static bool is_special(int index) noexcept { return index >= 0 && index < kSpecials; }

  /// Character at `index`; throws for specials and out-of-range indices.
  char32_t character(int index) const {
    if (index < kSpecials || index >= size()) throw ArgumentError("index " + std::to_string(index) + " is not a character");
    return chars_[static_cast<std::size_t>(index - kSpecials)];
  }

  /// Printable name: "<STR>", "<EOS>", "<UNK>" or the UTF-8 character.
  std::string symbol_name(int index) const {
    switch (index) {
      case kStr: return "<STR>";
      case kEos: return "<EOS>";
      case kUnk: return "<UNK>";
      default: return utf8::encode(std::u32string(1, character(index)));
    }
  }

  bool operator==(const Vocabulary& o) const { return chars_ == o.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, int> index_;
};

inline Vocabulary build_vocabulary(const ReviewCollection& c) {
  if (c.empty()) throw EmptyCollectionError("cannot build a vocabulary from an empty collection");
  std::set<char32_t> seen;
  for (const auto& r : c.records())
    for (char32_t cp : utf8::decode(r.text)) seen.insert(cp);
  return Vocabulary(std::vector<char32_t>(seen.begin(), seen.end()));
}

// One symbol per line. Backslash, control characters and DEL are escaped;
// the three specials are written by name.
namespace detail {

inline std::string escape_symbol(char32_t cp) {
  switch (cp) {
    case U'\\': return "\\\\";
    case U'\n': return "\\n";
    case U'\t': return "\\t";
    case U'\r': return "\\r";
    default: break;
  }
  if (cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp < 0xA0) || cp == 0x2028 || cp == 0x2029) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(cp));
    return buf;
  }
  return utf8::encode(std::u32string(1, cp));
}

inline char32_t unescape_symbol(std::string_view line, std::size_t lineno) {
  if (line.empty()) throw ParseError("empty vocabulary record", lineno);
  if (line[0] == '\\') {
    if (line.size() == 2) {
      switch (line[1]) {
        case '\\': return U'\\';
        case 'n': return U'\n';
        case 't': return U'\t';
        case 'r': return U'\r';
        default: break;
      }
    }
    if (line.size() >= 3 && line[1] == 'u') {
      std::uint32_t v = 0;
      for (char ch : line.substr(2)) {
        int d;
        if (ch >= '0' && ch <= '9') d = ch - '0';
        else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
        else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
        else throw ParseError("bad escape in vocabulary record", lineno);
        v = v * 16 + static_cast<std::uint32_t>(d);
      }
      return static_cast<char32_t>(v);
    }
    throw ParseError("bad escape in vocabulary record", lineno);
  }
  auto cps = utf8::decode(line);
  if (cps.size() != 1) throw ParseError("vocabulary record must hold one character", lineno);
  return cps[0];
}

}  // namespace detail

inline std::string serialize_vocabulary(const Vocabulary& v) {
  std::string out = "<STR>\n<EOS>\n<UNK>\n";
  for (char32_t cp : v.characters()) {
    out += detail::escape_symbol(cp);
    out += '\n';
  }
  return out;
}

inline Vocabulary parse_vocabulary(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<char32_t> chars;
  std::size_t lineno = 0;
  const char* specials[] = {"<STR>", "<EOS>", "<UNK>"};
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno <= 3) {
      if (line != specials[lineno - 1]) throw ParseError(std::string("expected ") + specials[lineno - 1], lineno);
      continue;
    }
    chars.push_back(detail::unescape_symbol(line, lineno));
  }
  if (lineno < 3) throw ParseError("vocabulary is missing its special symbols");
  if (!std::is_sorted(chars.begin(), chars.end()) ||
      std::adjacent_find(chars.begin(), chars.end()) != chars.end())
    throw ParseError("vocabulary characters must be strictly ascending");
  return Vocabulary(chars);
}

}  // namespace gcn
