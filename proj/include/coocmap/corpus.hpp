#pragma once

// Raw text ingestion: byte-budgeted reads, lowercase/whitespace tokenization,
// frequency-ranked vocabularies and id-encoded corpora.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coocmap/error.hpp"

namespace coocmap {

using TokenId = std::int32_t;
using TokenLine = std::vector<std::string>;
using TokenizedText = std::vector<TokenLine>;

/// Reads at most `n` bytes from the head of `path`, then drops any trailing
/// partial line so the result is empty or ends with '\n'.
inline std::string take_head_bytes(const std::filesystem::path& path, std::uint64_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string buf(n, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (in.bad()) throw IoError(path.string(), "read failed");
  buf.resize(static_cast<std::size_t>(in.gcount()));
  const auto last_nl = buf.rfind('\n');
  if (last_nl == std::string::npos) return {};
  buf.resize(last_nl + 1);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path.string(), "read failed");
  return s;
}

namespace utf8 {

// Decodes one code point starting at text[pos]; advances pos.
inline char32_t decode(std::string_view text, std::size_t& pos) {
  const auto start = pos;
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  char32_t min_cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1, cp = b0 & 0x1F, min_cp = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2, cp = b0 & 0x0F, min_cp = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3, cp = b0 & 0x07, min_cp = 0x10000;
  } else {
    throw DecodeError(start, "invalid lead byte");
  }
  if (pos + extra >= text.size())
    throw DecodeError(start, "truncated sequence");
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[pos + k]);
    if ((b & 0xC0) != 0x80) throw DecodeError(start, "invalid continuation byte");
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min_cp) throw DecodeError(start, "overlong encoding");
  if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
    throw DecodeError(start, "code point out of range");
  pos += extra + 1;
  return cp;
}

inline void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// White_Space property, minus line terminators which split lines upstream.
constexpr bool is_space(char32_t c) {
  return c == 0x09 || c == 0x0B || c == 0x0C || c == 0x0D || c == 0x20 || c == 0x85 ||
         c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

// Simple one-to-one lowercase mapping for Latin, Greek, Cyrillic, Armenian and
// fullwidth Latin. Scripts without case pass through.
constexpr char32_t to_lower(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c == 0x130) return 'i';
  if (c >= 0x100 && c <= 0x137) return (c % 2 == 0) ? c + 1 : c;
  if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return (c % 2 == 0) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x386 && c <= 0x38F) {
    switch (c) {
      case 0x386: return 0x3AC;
      case 0x388: return 0x3AD;
      case 0x389: return 0x3AE;
      case 0x38A: return 0x3AF;
      case 0x38C: return 0x3CC;
      case 0x38E: return 0x3CD;
      case 0x38F: return 0x3CE;
      default: return c;
    }
  }
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x460 && c <= 0x4FF && c != 0x482 && !(c >= 0x483 && c <= 0x489)) {
    if (c >= 0x4C1 && c <= 0x4CE) return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x4C0) return 0x4CF;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x531 && c <= 0x556) return c + 0x30;
  if (c >= 0x1E00 && c <= 0x1EFF && c != 0x1E9E) return (c % 2 == 0) ? c + 1 : c;
  if (c >= 0xFF21 && c <= 0xFF3A) return c + 0x20;
  return c;
}

}  // namespace utf8

/// Lowercases and splits each line on runs of Unicode whitespace.
/// Line structure is kept: one token list per input line ("\n" separated);
/// a trailing newline does not start an extra line.
inline TokenizedText tokenize(std::string_view text) {
  TokenizedText lines;
  if (text.empty()) return lines;
  TokenLine current;
  std::string tok;
  std::size_t pos = 0;
  auto flush_token = [&] {
    if (!tok.empty()) {
      current.push_back(std::move(tok));
      tok.clear();
    }
  };
  while (pos < text.size()) {
    if (text[pos] == '\n') {
      flush_token();
      lines.push_back(std::move(current));
      current.clear();
      ++pos;
      continue;
    }
    const char32_t cp = utf8::decode(text, pos);
    if (utf8::is_space(cp)) {
      flush_token();
    } else {
      utf8::encode(utf8::to_lower(cp), tok);
    }
  }
  flush_token();
  if (text.back() != '\n') lines.push_back(std::move(current));
  return lines;
}

/// Ranked token list. Id 0 is always the unknown token; ids 1.. follow
/// descending corpus frequency.
class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr TokenId kUnkId = 0;

  Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kUnk)}) {}

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty() || tokens_.front() != kUnk)
      throw ValidationError("vocabulary must start with " + std::string(kUnk));
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw ValidationError("vocabulary contains an empty token");
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
        throw ValidationError("duplicate vocabulary token: " + tokens_[i]);
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId unk_id() const noexcept { return kUnkId; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool contains(std::string_view tok) const { return index_.find(std::string(tok)) != index_.end(); }

  /// Id of `tok`, or the unknown id when out of vocabulary.
  TokenId id(std::string_view tok) const {
    auto it = index_.find(std::string(tok));
    return it == index_.end() ? kUnkId : it->second;
  }

  /// FNV-1a 64 over the newline-joined token list, as 16 hex digits.
  std::string digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](unsigned char c) {
      h ^= c;
      h *= 0x100000001b3ULL;
    };
    for (const auto& t : tokens_) {
      for (unsigned char c : t) mix(c);
      mix('\n');
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    for (const auto& t : tokens_) out << t << '\n';
    if (!out) throw IoError(path.string(), "write failed");
  }

  static Vocabulary load(const std::filesystem::path& path) {
    const auto text = read_file(path);
    std::vector<std::string> toks;
    std::size_t start = 0;
    while (start < text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string::npos) nl = text.size();
      toks.emplace_back(text.substr(start, nl - start));
      start = nl + 1;
    }
    try {
      return Vocabulary(std::move(toks));
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), 1, e.what());
    }
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Token frequencies with first-occurrence positions. Shards counted with
/// the right `base_position` merge into exactly the single-pass result.
class TokenCounts {
 public:
  struct Entry {
    std::uint64_t count = 0;
    std::uint64_t first = 0;
  };

  void add(std::span<const TokenLine> lines, std::uint64_t base_position = 0) {
    auto pos = base_position;
    for (const auto& line : lines) {
      for (const auto& tok : line) {
        auto [it, inserted] = entries_.try_emplace(tok, Entry{0, pos});
        ++it->second.count;
        if (!inserted) it->second.first = std::min(it->second.first, pos);
        ++pos;
      }
    }
    total_ += pos - base_position;
  }

  void merge(const TokenCounts& other) {
    for (const auto& [tok, e] : other.entries_) {
      auto [it, inserted] = entries_.try_emplace(tok, e);
      if (!inserted) {
        it->second.count += e.count;
        it->second.first = std::min(it->second.first, e.first);
      }
    }
    total_ += other.total_;
  }

  std::uint64_t total() const noexcept { return total_; }
  std::size_t distinct() const noexcept { return entries_.size(); }
  const std::unordered_map<std::string, Entry>& entries() const noexcept { return entries_; }

 private:
  std::unordered_map<std::string, Entry> entries_;
  std::uint64_t total_ = 0;
};

/// Unknown token plus the `v_max - 1` most frequent tokens; frequency ties go
/// to the earlier first occurrence.
inline Vocabulary build_vocab(const TokenCounts& counts, std::size_t v_max) {
  if (v_max < 1) throw ValidationError("v_max must be >= 1");
  struct Ranked {
    const std::string* tok;
    TokenCounts::Entry e;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(counts.distinct());
  for (const auto& [tok, e] : counts.entries())
    if (tok != Vocabulary::kUnk) ranked.push_back({&tok, e});
  const auto keep = std::min(ranked.size(), v_max - 1);
  auto by_rank = [](const Ranked& a, const Ranked& b) {
    if (a.e.count != b.e.count) return a.e.count > b.e.count;
    return a.e.first < b.e.first;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), by_rank);
  std::vector<std::string> toks{std::string(Vocabulary::kUnk)};
  toks.reserve(keep + 1);
  for (std::size_t i = 0; i < keep; ++i) toks.push_back(*ranked[i].tok);
  return Vocabulary(std::move(toks));
}

inline Vocabulary build_vocab(std::span<const TokenLine> lines, std::size_t v_max) {
  TokenCounts counts;
  counts.add(lines);
  return build_vocab(counts, v_max);
}

/// Corpus as token ids. `line_breaks[k]` is one past the last id of the k-th
/// nonempty line, so windows can stop at line ends.
struct EncodedCorpus {
  std::vector<TokenId> ids;
  std::vector<std::size_t> line_breaks;
  std::shared_ptr<const Vocabulary> vocab;

  std::size_t size() const noexcept { return ids.size(); }

  template <typename F>
  void for_each_line(F&& f) const {
    std::size_t start = 0;
    for (auto end : line_breaks) {
      f(std::span<const TokenId>(ids.data() + start, end - start));
      start = end;
    }
    if (start < ids.size()) f(std::span<const TokenId>(ids.data() + start, ids.size() - start));
  }
};

inline EncodedCorpus encode(std::span<const TokenLine> lines,
                            std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab) throw ValidationError("encode: null vocabulary");
  EncodedCorpus out;
  std::size_t n = 0;
  for (const auto& l : lines) n += l.size();
  out.ids.reserve(n);
  for (const auto& line : lines) {
    if (line.empty()) continue;
    for (const auto& tok : line) out.ids.push_back(vocab->id(tok));
    out.line_breaks.push_back(out.ids.size());
  }
  out.vocab = std::move(vocab);
  return out;
}

/// Flat token stream as a single line.
inline EncodedCorpus encode(std::span<const std::string> tokens,
                            std::shared_ptr<const Vocabulary> vocab) {
  TokenLine line(tokens.begin(), tokens.end());
  return encode(std::span<const TokenLine>(&line, 1), std::move(vocab));
}

inline std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace coocmap
