#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <algorithm>
#include <numeric>
#include <random>

#include "coocmap/cooc.hpp"
#include "oracles.hpp"

using namespace coocmap;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Vocabulary> abc_vocab() {
  return std::make_shared<const Vocabulary>(std::vector<std::string>{"[UNK]", "a", "b"});
}

EncodedCorpus corpus_of(const std::vector<std::vector<int>>& lines, int vocab) {
  std::vector<std::string> toks{"[UNK]"};
  for (int k = 1; k < vocab; ++k) toks.push_back("t" + std::to_string(k));
  auto v = std::make_shared<const Vocabulary>(toks);
  std::vector<TokenLine> tl;
  for (const auto& l : lines) {
    TokenLine t;
    for (int id : l) t.push_back(toks[static_cast<std::size_t>(id)]);
    tl.push_back(t);
  }
  return encode(tl, v);
}

CoocMatrix small_cooc() {
  CoocMatrix c;
  c.counts = DenseMatrix{{1, 2}, {2, 4}};
  c.vocab_digest = "x";
  return c;
}

}  // namespace

TEST(CountCooc, HandEnumeratedExamples) {
  const std::vector<std::string> aba{"a", "b", "a"};
  const auto e = encode(aba, abc_vocab());
  const auto m1 = count_cooc(e, 1);
  EXPECT_EQ(m1.counts(1, 2), 2);
  EXPECT_EQ(m1.counts(2, 1), 2);
  EXPECT_EQ(m1.counts(1, 1), 0);
  EXPECT_EQ(m1.counts.sum(), 4);
  const auto m2 = count_cooc(e, 2);
  EXPECT_EQ(m2.counts(1, 1), 2);
  EXPECT_EQ(m2.counts(1, 2), 2);
  EXPECT_EQ(m2.counts(2, 1), 2);
  EXPECT_EQ(m2.counts(2, 2), 0);
  const std::vector<std::string> a{"a"};
  EXPECT_TRUE(count_cooc(encode(a, abc_vocab()), 5).counts.isZero());
  EXPECT_EQ(m1.window, 1);
  EXPECT_EQ(m1.token_count, 3u);
  EXPECT_EQ(m1.vocab_digest, abc_vocab()->digest());
}

TEST(CountCooc, WindowsStopAtLineEnds) {
  const auto e = corpus_of({{1, 2}, {2, 1}}, 3);
  const auto c = count_cooc(e, 5);
  EXPECT_EQ(c.counts(1, 2), 2);
  EXPECT_EQ(c.counts.sum(), 4);
}

TEST(CountCooc, MatchesBruteForceAndShards) {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 200; ++rep) {
    std::uniform_int_distribution<int> vocab_d(1, 12), len_d(0, 40);
    const int vocab = vocab_d(rng);
    std::uniform_int_distribution<int> id_d(0, vocab - 1);
    std::vector<std::vector<int>> lines;
    int total = 0;
    while (total < 1000 && lines.size() < 60) {
      std::vector<int> l(static_cast<std::size_t>(len_d(rng)));
      for (auto& x : l) x = id_d(rng);
      total += static_cast<int>(l.size());
      lines.push_back(std::move(l));
    }
    const auto e = corpus_of(lines, vocab);
    for (int m : {1, 2, 5}) {
      const auto c = count_cooc(e, m);
      ASSERT_EQ(c.counts, oracle::brute_cooc(lines, vocab, m)) << "rep " << rep << " m " << m;
      ASSERT_EQ(c.counts, c.counts.transpose());
      double avail = 0;
      for (const auto& l : lines)
        for (int i = 0; i < static_cast<int>(l.size()); ++i)
          avail += std::min(m, i) + std::min(m, static_cast<int>(l.size()) - 1 - i);
      ASSERT_EQ(c.counts.sum(), avail);
      ASSERT_LE(c.counts.sum(), 2.0 * m * static_cast<double>(c.token_count));
      for (unsigned shards : {2u, 3u, 7u}) ASSERT_EQ(count_cooc_sharded(e, m, shards).counts, c.counts);
    }
  }
}

TEST(CountCooc, RejectsBadWindow) {
  const std::vector<std::string> a{"a"};
  EXPECT_THROW(count_cooc(encode(a, abc_vocab()), 0), ValidationError);
}

TEST(PermuteCooc, Examples) {
  CoocMatrix sym;
  sym.counts = DenseMatrix{{0, 2}, {2, 0}};
  const std::vector<Eigen::Index> id{0, 1}, swap{1, 0};
  EXPECT_EQ(permute_cooc(sym, id).counts, sym.counts);
  EXPECT_EQ(permute_cooc(sym, swap).counts, sym.counts);
  EXPECT_EQ(permute_cooc(small_cooc(), swap).counts, (DenseMatrix{{4, 2}, {2, 1}}));
}

TEST(PermuteCooc, InverseRestoresAndRejectsNonPermutations) {
  std::mt19937_64 rng(5);
  CoocMatrix c;
  c.counts = oracle::random_matrix(rng, 9, 9, 0, 10);
  c.counts = (c.counts + c.counts.transpose()).eval();
  std::vector<Eigen::Index> pi(9);
  std::iota(pi.begin(), pi.end(), 0);
  std::shuffle(pi.begin(), pi.end(), rng);
  const auto p = permute_cooc(c, pi);
  EXPECT_EQ(p.counts, p.counts.transpose());
  for (Eigen::Index i = 0; i < 9; ++i)
    for (Eigen::Index j = 0; j < 9; ++j) EXPECT_EQ(p.counts(pi[i], pi[j]), c.counts(i, j));
  EXPECT_EQ(permute_cooc(p, invert_permutation(pi)).counts, c.counts);
  const std::vector<Eigen::Index> dup{0, 0}, range{0, 2}, short_pi{0};
  EXPECT_THROW(permute_cooc(small_cooc(), dup), ValidationError);
  EXPECT_THROW(permute_cooc(small_cooc(), range), ValidationError);
  EXPECT_THROW(permute_cooc(small_cooc(), short_pi), ValidationError);
}

TEST(CoocFile, RoundTripAndIntegrity) {
  const auto e = encode(std::vector<std::string>{"a", "b", "a", "b", "b"}, abc_vocab());
  const auto c = count_cooc(e, 2);
  const auto p = fs::temp_directory_path() / "coocmap_rt.cooc";
  save_cooc(c, p);
  const auto back = load_cooc(p, abc_vocab().get());
  EXPECT_EQ(back.counts, c.counts);
  EXPECT_EQ(back.window, 2);
  EXPECT_EQ(back.token_count, 5u);
  EXPECT_EQ(back.vocab_digest, c.vocab_digest);

  const Vocabulary other({"[UNK]", "b", "a"});
  EXPECT_THROW(load_cooc(p, &other), IntegrityError);

  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto bad = fs::temp_directory_path() / "coocmap_bad.cooc";
  std::ofstream(bad, std::ios::binary) << "NOTCOOC!" << bytes.substr(8);
  EXPECT_THROW(load_cooc(bad), ParseError);
  std::ofstream(bad, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(load_cooc(bad), ParseError);
  EXPECT_THROW(load_cooc(fs::temp_directory_path() / "coocmap_missing.cooc"), IoError);
}
