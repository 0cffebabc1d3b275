#pragma once

// Word-context co-occurrence counts over symmetric token windows.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "coocmap/corpus.hpp"
#include "coocmap/kernels.hpp"

namespace coocmap {

static_assert(std::endian::native == std::endian::little,
              "cooc file I/O assumes a little-endian host");

struct CoocMatrix {
  DenseMatrix counts;  // V x V, symmetric, nonnegative
  int window = 5;
  std::string vocab_digest;
  std::uint64_t token_count = 0;

  Eigen::Index size() const noexcept { return counts.rows(); }
};

namespace detail {

inline void accumulate_line(std::span<const TokenId> line, int m, DenseMatrix& counts) {
  const auto n = static_cast<std::ptrdiff_t>(line.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto w = line[static_cast<std::size_t>(i)];
    const auto hi = std::min(n - 1, i + m);
    // Each unordered pair within reach is visited once and credited both ways.
    for (std::ptrdiff_t j = i + 1; j <= hi; ++j) {
      const auto c = line[static_cast<std::size_t>(j)];
      counts(w, c) += 1.0;
      counts(c, w) += 1.0;
    }
  }
}

}  // namespace detail

/// Counts, for every token and every offset in [-m, m] \ {0} that stays
/// inside the same line, one (word, context) hit.
inline CoocMatrix count_cooc(const EncodedCorpus& corpus, int m) {
  if (m < 1) throw ValidationError("window size must be >= 1");
  if (!corpus.vocab) throw ValidationError("corpus has no vocabulary");
  const auto v = static_cast<Eigen::Index>(corpus.vocab->size());
  CoocMatrix out;
  out.counts = DenseMatrix::Zero(v, v);
  out.window = m;
  out.vocab_digest = corpus.vocab->digest();
  out.token_count = corpus.size();
  corpus.for_each_line(
      [&](std::span<const TokenId> line) { detail::accumulate_line(line, m, out.counts); });
  return out;
}

/// Same result as count_cooc, computed over `shards` contiguous line ranges
/// whose partial matrices are summed.
inline CoocMatrix count_cooc_sharded(const EncodedCorpus& corpus, int m, unsigned shards) {
  if (m < 1) throw ValidationError("window size must be >= 1");
  if (!corpus.vocab) throw ValidationError("corpus has no vocabulary");
  shards = std::max(1u, shards);
  const auto v = static_cast<Eigen::Index>(corpus.vocab->size());

  std::vector<std::span<const TokenId>> lines;
  corpus.for_each_line([&](std::span<const TokenId> l) { lines.push_back(l); });

  std::vector<DenseMatrix> partial(shards);
  auto work = [&](unsigned s) {
    partial[s] = DenseMatrix::Zero(v, v);
    const auto begin = lines.size() * s / shards;
    const auto end = lines.size() * (s + 1) / shards;
    for (auto k = begin; k < end; ++k) detail::accumulate_line(lines[k], m, partial[s]);
  };
  std::vector<std::jthread> pool;
  for (unsigned s = 1; s < shards; ++s) pool.emplace_back(work, s);
  work(0);
  pool.clear();

  CoocMatrix out;
  out.counts = std::move(partial[0]);
  for (unsigned s = 1; s < shards; ++s) out.counts += partial[s];
  out.window = m;
  out.vocab_digest = corpus.vocab->digest();
  out.token_count = corpus.size();
  return out;
}

/// Checks that `pi` is a bijection on [0, n).
inline void validate_permutation(std::span<const Eigen::Index> pi, Eigen::Index n) {
  if (static_cast<Eigen::Index>(pi.size()) != n)
    throw ValidationError("permutation length " + std::to_string(pi.size()) +
                          " does not match size " + std::to_string(n));
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (auto p : pi) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)])
      throw ValidationError("not a permutation");
    seen[static_cast<std::size_t>(p)] = 1;
  }
}

inline std::vector<Eigen::Index> invert_permutation(std::span<const Eigen::Index> pi) {
  std::vector<Eigen::Index> inv(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) inv[static_cast<std::size_t>(pi[i])] = static_cast<Eigen::Index>(i);
  return inv;
}

/// Relabels rows and columns together: result[pi[i], pi[j]] = C[i, j].
inline CoocMatrix permute_cooc(const CoocMatrix& c, std::span<const Eigen::Index> pi) {
  const auto n = c.size();
  validate_permutation(pi, n);
  CoocMatrix out = c;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out.counts(pi[i], pi[j]) = c.counts(i, j);
  out.vocab_digest = c.vocab_digest + ":permuted";
  return out;
}

inline constexpr char kCoocMagic[8] = {'C', 'O', 'O', 'C', 'M', 'A', 'T', '1'};

inline void save_cooc(const CoocMatrix& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  const nlohmann::json header = {{"V", c.size()},
                                 {"m", c.window},
                                 {"token_count", c.token_count},
                                 {"vocab_digest", c.vocab_digest}};
  const auto h = header.dump();
  const std::uint64_t hlen = h.size();
  out.write(kCoocMagic, sizeof kCoocMagic);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  // Row-major on disk.
  std::vector<double> row(static_cast<std::size_t>(c.size()));
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    for (Eigen::Index j = 0; j < c.size(); ++j) row[static_cast<std::size_t>(j)] = c.counts(i, j);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw IoError(path.string(), "write failed");
}

/// Loads a count file. When `expected` is given, its digest must match the
/// one recorded in the header.
inline CoocMatrix load_cooc(const std::filesystem::path& path,
                            const Vocabulary* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCoocMagic, sizeof magic) != 0)
    throw ParseError(path.string(), 0, "bad magic (expected COOCMAT1)");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  if (!in || hlen > (1u << 20)) throw ParseError(path.string(), 0, "bad header length");
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw ParseError(path.string(), 0, "truncated header");

  CoocMatrix c;
  Eigen::Index v = 0;
  try {
    const auto header = nlohmann::json::parse(h);
    v = header.at("V").get<Eigen::Index>();
    c.window = header.at("m").get<int>();
    c.token_count = header.at("token_count").get<std::uint64_t>();
    c.vocab_digest = header.at("vocab_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, std::string("bad header: ") + e.what());
  }
  if (v < 1) throw ParseError(path.string(), 0, "V must be >= 1");
  if (expected && expected->digest() != c.vocab_digest)
    throw IntegrityError(path.string() + ": vocabulary digest mismatch (file " + c.vocab_digest +
                         ", supplied " + expected->digest() + ")");
  if (expected && static_cast<Eigen::Index>(expected->size()) != v)
    throw IntegrityError(path.string() + ": vocabulary size mismatch");

  c.counts.resize(v, v);
  std::vector<double> row(static_cast<std::size_t>(v));
  for (Eigen::Index i = 0; i < v; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw ParseError(path.string(), 0, "truncated matrix data");
    for (Eigen::Index j = 0; j < v; ++j) c.counts(i, j) = row[static_cast<std::size_t>(j)];
  }
  if (!c.counts.allFinite() || (c.counts.array() < 0).any())
    throw ValidationError(path.string() + ": counts must be finite and nonnegative");
  return c;
}

}  // namespace coocmap
