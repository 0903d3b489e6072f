// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "mal/errors.hpp"

namespace mal {

enum class TokenMode { word, character };

inline TokenMode parse_token_mode(std::string_view s) {
  if (s == "word") return TokenMode::word;
  if (s == "char") return TokenMode::character;
  throw Error("unknown tokenization mode: " + std::string(s));
}

namespace detail {

inline std::string fold_case(std::string_view s) {
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.foldCase();
  std::string out;
  u.toUTF8String(out);
  return out;
}

// Decodes UTF-8 into code points; invalid sequences become U+FFFD.
inline std::vector<std::pair<UChar32, std::string_view>> code_points(std::string_view s) {
  std::vector<std::pair<UChar32, std::string_view>> out;
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const int32_t n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, n, c);
    if (c < 0) c = 0xFFFD;
    out.emplace_back(c, s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
  }
  return out;
}

}  // namespace detail

/// Word mode splits on Unicode whitespace and case-folds; character mode
/// emits one token per non-whitespace code point.
inline std::vector<std::string> tokenize(std::string_view text, TokenMode mode) {
  std::vector<std::string> tokens;
  std::string current;
  for (const auto& [c, bytes] : detail::code_points(text)) {
    if (u_isUWhiteSpace(c)) {
      if (!current.empty()) tokens.push_back(detail::fold_case(current));
      current.clear();
      continue;
    }
    if (mode == TokenMode::character) {
      tokens.emplace_back(bytes);
    } else {
      current.append(bytes);
    }
  }
  if (!current.empty()) tokens.push_back(detail::fold_case(current));
  return tokens;
}

/// True when the token is non-empty and every code point is in a Unicode
/// punctuation category (Pc, Pd, Ps, Pe, Pi, Pf, Po).
inline bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  for (const auto& [c, bytes] : detail::code_points(token)) {
    if (!u_ispunct(c)) return false;
  }
  return true;
}

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(const std::vector<std::string>& words) {
    for (const auto& w : words) add(w);
  }

  static StopwordSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read stopword file: " + path);
    StopwordSet set;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      for (auto& tok : tokenize(line, TokenMode::word)) set.add(tok);
    }
    return set;
  }

  void add(std::string_view w) { words_.insert(detail::fold_case(w)); }
  bool contains(std::string_view w) const { return words_.contains(detail::fold_case(w)); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// A content token is neither a stopword nor punctuation.
inline bool is_content(std::string_view token, const StopwordSet& stopwords) {
  return !stopwords.contains(token) && !is_punctuation(token);
}

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary() : id_to_token_{"<pad>", "<unk>", "<s>", "</s>"} {
    for (int i = 0; i < kReserved; ++i) token_to_id_.emplace(id_to_token_[i], i);
  }

  /// Reserved ids first, then tokens by descending count (ties in byte-wise
  /// lexicographic order), keeping those with count >= min_count, up to
  /// max_size ids in total.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sequences, std::size_t max_size,
                          std::size_t min_count = 1) {
    if (max_size <= kReserved) throw Error("vocabulary max_size must exceed the reserved block");
    std::map<std::string, std::size_t> counts;
    for (const auto& seq : sequences)
      for (const auto& tok : seq) ++counts[tok];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    for (const auto& [tok, n] : ranked) {
      if (v.size() >= max_size) break;
      if (n < min_count || v.token_to_id_.contains(tok)) continue;
      v.push(tok);
    }
    return v;
  }

  /// One token per line; the line index after the reserved block is the id.
  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (v.token_to_id_.contains(line)) throw FormatError("duplicate vocabulary entry: " + line);
      v.push(line);
    }
    return v;
  }

  void save(std::ostream& out) const {
    for (std::size_t i = kReserved; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
  }

  // Reserved surface forms such as "<s>" in corpus text map to UNK.
  int id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return (it == token_to_id_.end() || it->second < kReserved) ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw VocabularyRangeError("token id " + std::to_string(id) + " outside vocabulary of " +
                                 std::to_string(id_to_token_.size()));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return id_to_token_.size(); }

 private:
  void push(const std::string& tok) {
    token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
    id_to_token_.push_back(tok);
  }

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Label 1 at every source position whose token is content and occurs
/// anywhere in the summary; 0 elsewhere.
inline std::vector<int> derive_salience_labels(const std::vector<std::string>& source,
                                               const std::vector<std::string>& summary,
                                               const StopwordSet& stopwords) {
  std::unordered_set<std::string_view> bag(summary.begin(), summary.end());
  std::vector<int> labels(source.size(), 0);
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (bag.contains(source[i]) && is_content(source[i], stopwords)) labels[i] = 1;
  }
  return labels;
}

struct LengthLimits {
  std::size_t max_src_len = 100;
  std::size_t max_tgt_len = 50;

  static LengthLimits defaults(TokenMode mode) {
    return mode == TokenMode::word ? LengthLimits{100, 50} : LengthLimits{120, 25};
  }
};

struct TrainingPair {
  std::vector<int> source_ids;
  std::vector<int> target_ids;  // ends with EOS
  std::vector<int> salience_labels;
  // true at non-stopword, non-punctuation source positions
  std::vector<bool> content_mask;
  std::vector<std::string> source_tokens;
  std::vector<std::string> summary_tokens;
};

inline std::vector<bool> content_mask(const std::vector<std::string>& tokens, const StopwordSet& stopwords) {
  std::vector<bool> mask(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) mask[i] = is_content(tokens[i], stopwords);
  return mask;
}

inline std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

/// Returns nullopt when the source is empty (the record should be skipped).
inline std::optional<TrainingPair> encode_pair(const std::vector<std::string>& source,
                                               const std::vector<std::string>& summary, const Vocabulary& vocab,
                                               const StopwordSet& stopwords, const LengthLimits& limits) {
  TrainingPair pair;
  auto labels = derive_salience_labels(source, summary, stopwords);
  const std::size_t src_len = std::min(source.size(), limits.max_src_len);
  if (src_len == 0) return std::nullopt;
  pair.source_tokens.assign(source.begin(), source.begin() + static_cast<std::ptrdiff_t>(src_len));
  pair.source_ids = to_ids(pair.source_tokens, vocab);
  pair.salience_labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(src_len));
  pair.content_mask = content_mask(pair.source_tokens, stopwords);
  const std::size_t tgt_len = std::min(summary.size(), limits.max_tgt_len > 0 ? limits.max_tgt_len - 1 : 0);
  pair.summary_tokens.assign(summary.begin(), summary.begin() + static_cast<std::ptrdiff_t>(tgt_len));
  pair.target_ids = to_ids(pair.summary_tokens, vocab);
  pair.target_ids.push_back(Vocabulary::kEos);
  return pair;
}

struct RawRecord {
  std::string source;
  std::string summary;
};

/// Parses one `source<TAB>summary` record per line. A line with any other
/// number of TABs throws CorpusFormatError carrying the 1-based line number.
inline std::vector<RawRecord> parse_corpus(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tabs = std::count(line.begin(), line.end(), '\t');
    if (tabs != 1) {
      throw CorpusFormatError(lineno, "expected exactly one TAB, found " + std::to_string(tabs));
    }
    const auto pos = line.find('\t');
    records.push_back({line.substr(0, pos), line.substr(pos + 1)});
  }
  return records;
}

inline std::vector<RawRecord> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read corpus file: " + path);
  return parse_corpus(in);
}

}  // namespace mal
