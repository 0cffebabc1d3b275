#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "coocmap/assoc.hpp"
#include "oracles.hpp"

using namespace coocmap;
using oracle::Mat;
namespace fs = std::filesystem;

namespace {

CoocMatrix cooc_of(const Mat& counts) {
  CoocMatrix c;
  c.counts = counts;
  c.vocab_digest = "test";
  return c;
}

CoocMatrix random_cooc(std::mt19937_64& rng, Eigen::Index v, double zero_frac = 0.3) {
  Mat c = oracle::random_matrix(rng, v, v, 0, 20).array().floor().matrix();
  std::bernoulli_distribution z(zero_frac);
  for (Eigen::Index i = 0; i < v; ++i)
    for (Eigen::Index j = 0; j < v; ++j)
      if (z(rng)) c(i, j) = 0;
  return cooc_of((c + c.transpose()).eval());
}

CoocMatrix independent_cooc(std::mt19937_64& rng, Eigen::Index v) {
  const Eigen::VectorXd r = oracle::random_matrix(rng, v, 1, 0.5, 5);
  return cooc_of(r * r.transpose());
}

// Direct entrywise recomputation of the association formulas.
Mat direct(const Mat& c, const std::string& kind, double k = 1) {
  const double total = c.sum();
  Mat out = Mat::Zero(c.rows(), c.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const double p = c(i, j) / total;
      const double ps = c.row(i).sum() / total, pi = c.col(j).sum() / total;
      if (ps == 0 || pi == 0) continue;
      if (kind == "rapp") out(i, j) = p / (ps * pi);
      if (kind == "fung" && p > 0) out(i, j) = p * std::log(p / (ps * pi));
      if (kind == "ppmi" && p > 0) out(i, j) = std::max(0.0, std::log(p / (ps * pi)) - std::log(k));
    }
  return out;
}

}  // namespace

TEST(CoocmapAssoc, Examples) {
  EXPECT_TRUE(coocmap_assoc(cooc_of(Mat::Zero(3, 3))).data.isZero());
  const auto a = coocmap_assoc(cooc_of(Mat{{0, 4}, {4, 0}}));
  const Mat e{{0, 2}, {2, 0}};
  const Mat u = e.rowwise().normalized();
  const Mat cen = u.rowwise() - u.colwise().mean();
  EXPECT_TRUE(a.data.isApprox(cen.rowwise().normalized(), 1e-14));
  EXPECT_EQ(a.chain, (TransformChain{Transform::epow(0.5), Transform::normalize()}));
  EXPECT_EQ(chain_string(a.chain), "epow(0.5) > normalize");
}

TEST(CoocmapAssoc, ReplayIsBitwise) {
  std::mt19937_64 rng(3);
  const auto c = random_cooc(rng, 12);
  for (const auto& a : {coocmap_assoc(c), log1p_assoc(c), rapp_assoc(c), fung_assoc(c), ppmi_assoc(c, 2),
                        glove_assoc(c)}) {
    EXPECT_EQ(replay(a.chain, c.counts), a.data);
    EXPECT_EQ(a.vocab_digest, "test");
  }
  EXPECT_EQ(coocmap_assoc(c).data, coocmap_assoc(c).data);
}

TEST(Log1pAssoc, Examples) {
  EXPECT_TRUE(log1p_assoc(cooc_of(Mat::Zero(2, 2))).data.isZero());
  EXPECT_NEAR(std::log1p(std::exp(1.0) - 1), 1.0, 1e-15);
  std::mt19937_64 rng(5);
  const auto c = random_cooc(rng, 7);
  EXPECT_TRUE(log1p_assoc(c).data.isApprox(normalize(c.counts.array().log1p().matrix()), 1e-14));
}

TEST(RappAssoc, IndependentIsConstantAndDirect) {
  std::mt19937_64 rng(7);
  const auto ind = independent_cooc(rng, 6);
  EXPECT_LE((detail::rapp_ratio(ind.counts).array() - 1.0).abs().maxCoeff(), 1e-10);
  EXPECT_LE((rapp_assoc(ind).data.array() - 1.0 / 6).abs().maxCoeff(), 1e-10);
  const Mat diag = detail::rapp_ratio(Mat{{2, 0}, {0, 2}});
  EXPECT_TRUE(diag.isApprox(Mat{{2, 0}, {0, 2}}, 1e-14));
  EXPECT_TRUE(rapp_assoc(cooc_of(Mat{{2, 0}, {0, 2}})).data.isApprox(Mat::Identity(2, 2), 1e-14));
  Mat with_zero = random_cooc(rng, 5).counts;
  with_zero.row(2).setZero();
  with_zero.col(2).setZero();
  const auto z = rapp_assoc(cooc_of(with_zero));
  EXPECT_TRUE(z.data.row(2).isZero());
  const auto c = random_cooc(rng, 6);
  EXPECT_TRUE(detail::rapp_ratio(c.counts).isApprox(direct(c.counts, "rapp"), 1e-12));
}

TEST(FungAssoc, IndependentIsZeroAndDirect) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep)
    ASSERT_LE(fung_assoc(independent_cooc(rng, 2 + rep % 15)).data.cwiseAbs().maxCoeff(), 1e-10);
  const auto c = random_cooc(rng, 3, 0.2);
  EXPECT_TRUE(detail::fung_mi(c.counts).isApprox(direct(c.counts, "fung"), 1e-12));
  Mat zeros = c.counts;
  zeros(0, 1) = zeros(1, 0) = 0;
  EXPECT_EQ(detail::fung_mi(zeros)(0, 1), 0);
}

TEST(PpmiAssoc, DegenerateAndDirect) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 50; ++rep)
    ASSERT_LE(ppmi_assoc(independent_cooc(rng, 2 + rep % 15), 1).data.cwiseAbs().maxCoeff(), 1e-10);
  const auto c = random_cooc(rng, 6);
  EXPECT_TRUE(ppmi_assoc(c, 1e12).data.isZero());
  for (double k : {1.0, 2.0, 5.0})
    EXPECT_TRUE(detail::shifted_ppmi(c.counts, k).isApprox(direct(c.counts, "ppmi", k), 1e-12));
  const Mat n = ppmi_assoc(c).data;
  for (Eigen::Index i = 0; i < n.rows(); ++i)
    if (n.row(i).norm() > 0) EXPECT_NEAR(n.row(i).norm(), 1, 1e-12);
  EXPECT_THROW(ppmi_assoc(c, 0), ValidationError);
}

TEST(GloveAssoc, DegenerateAndDirect) {
  EXPECT_LE(glove_assoc(cooc_of(Mat::Constant(4, 4, 7))).data.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(glove_assoc(cooc_of(Mat::Constant(1, 1, 3))).data.cwiseAbs().maxCoeff(), 1e-10);
  std::mt19937_64 rng(17);
  const auto c = random_cooc(rng, 5);
  const Mat l = c.counts.array().log1p().matrix();
  Mat d = l;
  for (Eigen::Index i = 0; i < 5; ++i) d.row(i).array() -= l.row(i).mean();
  for (Eigen::Index j = 0; j < 5; ++j) d.col(j).array() -= d.col(j).mean();
  EXPECT_TRUE(glove_assoc(c).data.isApprox(d.rowwise().normalized(), 1e-12));
}

TEST(AssocFromVectors, Examples) {
  std::mt19937_64 rng(19);
  WordVectors q{oracle::random_orthogonal(rng, 4), "v"};
  EXPECT_TRUE(assoc_from_vectors(q).data.isApprox(normalize(Mat::Identity(4, 4)), 1e-10));
  WordVectors d{Mat{{1, 0}, {0, 2}}, "v"};
  EXPECT_TRUE(assoc_from_vectors(d).data.isApprox(normalize(Mat{{1, 0}, {0, 2}}), 1e-12));
  for (int rep = 0; rep < 10; ++rep) {
    WordVectors v{oracle::random_matrix(rng, 6, 3), "v"};
    const Mat g = v.data * v.data.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    const Mat root = es.eigenvectors() * es.eigenvalues().cwiseMax(0).cwiseSqrt().asDiagonal() *
                     es.eigenvectors().transpose();
    EXPECT_LE((assoc_from_vectors(v).data - normalize(root)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(SvdVectors, Examples) {
  const auto diag = svd_vectors(cooc_of(Eigen::Vector3d(9, 4, 1).asDiagonal()), 3);
  EXPECT_TRUE(diag.data.cwiseAbs().isApprox(Mat(Eigen::Vector3d(3, 2, 1).asDiagonal()), 1e-12));
  std::mt19937_64 rng(23);
  const auto c = random_cooc(rng, 6);
  const auto full = svd_vectors(c, 6);
  const Mat root = c.counts.cwiseSqrt();
  EXPECT_LE((full.data * full.data.transpose() - root * root.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::VectorXd r = oracle::random_matrix(rng, 5, 1, 0.5, 3);
  const auto one = svd_vectors(cooc_of(r * r.transpose()), 1);
  const auto f = svd(epow(r * r.transpose(), 0.5));
  EXPECT_LE((one.data * f.Vt.topRows(1) - (r * r.transpose()).cwiseSqrt()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(svd_vectors(c, 0), ValidationError);
}

TEST(SvdVectors, FullRankLiftRecoversCoocmapWhenRootIsPsd) {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 10; ++rep) {
    const Mat b = oracle::random_matrix(rng, 8, 4, 0, 2);
    const Mat root = b * b.transpose();
    const auto c = cooc_of(root.array().square().matrix());
    const auto lifted = assoc_from_vectors(svd_vectors(c, 8));
    EXPECT_LE((lifted.data - coocmap_assoc(c).data).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ApplyPipeline, ComposesKernels) {
  std::mt19937_64 rng(31);
  const auto a = coocmap_assoc(random_cooc(rng, 30));
  EXPECT_EQ(apply_pipeline(a, {}).data, a.data);
  const auto p = apply_pipeline(a, {Transform::drop(20), Transform::clip(1, 99)});
  EXPECT_TRUE(p.data.isApprox(clip(drop_head(a.data, 20), 1, 99), 1e-14));
  EXPECT_EQ(p.chain.size(), a.chain.size() + 2);
  const auto t = apply_pipeline(a, {Transform::trunc(5), Transform::normalize()});
  EXPECT_TRUE(t.data.isApprox(normalize(trunc(a.data, 5)), 1e-14));
  EXPECT_EQ(replay(p.chain, random_cooc(rng, 30).counts).rows(), 30);
}

TEST(ApplyTransform, UnknownAndDomainErrors) {
  EXPECT_THROW(apply_transform({"bogus", {}}, Mat::Ones(2, 2)), ValidationError);
  EXPECT_THROW(apply_transform({"clip", {1}}, Mat::Ones(2, 2)), ValidationError);
  EXPECT_THROW(apply_transform(Transform::log1p(), Mat::Constant(2, 2, -1)), DomainError);
}

TEST(Vectors, TextRoundTripAndAlignment) {
  const Vocabulary vocab({"[UNK]", "a", "b", "c"});
  const auto p = fs::temp_directory_path() / "coocmap_vectors.txt";
  std::ofstream(p) << "4 2\nb 1 2\nzz 9 9\na -0.5 1e-3\nb 7 7\n";
  const auto lv = load_vectors(p, vocab);
  EXPECT_EQ(lv.vectors.data, (Mat{{0, 0}, {-0.5, 1e-3}, {1, 2}, {0, 0}}));
  EXPECT_EQ(lv.skipped, 1u);
  EXPECT_EQ(lv.missing, (std::vector<std::string>{"[UNK]", "c"}));

  std::mt19937_64 rng(37);
  WordVectors v{oracle::random_matrix(rng, 4, 3), vocab.digest()};
  save_vectors(p, v, vocab);
  EXPECT_EQ(load_vectors(p, vocab).vectors.data, v.data);

  std::ofstream(p) << "1 2\na 1\n";
  EXPECT_THROW(load_vectors(p, vocab), ParseError);
  std::ofstream(p) << "1 2\na 1 x\n";
  EXPECT_THROW(load_vectors(p, vocab), ParseError);
  std::ofstream(p) << "garbage\n";
  EXPECT_THROW(load_vectors(p, vocab), ParseError);
}
