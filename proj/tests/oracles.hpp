#pragma once

// Slow, obviously-correct reference implementations used by the tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

/// Orthogonal matrix from Gram-Schmidt on a random square matrix.
inline Mat random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  Mat a = random_matrix(rng, n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index p = 0; p < k; ++p) a.col(k) -= a.col(p).dot(a.col(k)) * a.col(p);
    a.col(k).normalize();
  }
  return a;
}

/// Percentile by full sort and linear interpolation.
inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Enumerates every (position, offset) pair inside each line.
inline Mat brute_cooc(const std::vector<std::vector<int>>& lines, int vocab, int m) {
  Mat c = Mat::Zero(vocab, vocab);
  for (const auto& line : lines) {
    const int n = static_cast<int>(line.size());
    for (int i = 0; i < n; ++i)
      for (int j = -m; j <= m; ++j) {
        if (j == 0 || i + j < 0 || i + j >= n) continue;
        c(line[i], line[i + j]) += 1;
      }
  }
  return c;
}

/// Mean of the k largest values, found by full sort.
inline double topk_mean(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return std::accumulate(v.begin(), v.begin() + k, 0.0) / k;
}

inline Mat csls(const Mat& s, int k) {
  Mat out(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      std::vector<double> r, c;
      for (Eigen::Index q = 0; q < s.cols(); ++q) r.push_back(s(i, q));
      for (Eigen::Index q = 0; q < s.rows(); ++q) c.push_back(s(q, j));
      out(i, j) = s(i, j) - 0.5 * (topk_mean(r, k) + topk_mean(c, k));
    }
  return out;
}

inline double frob(const Mat& m) { return m.norm(); }

// Text from a random Markov chain over words "w0".."w{v-1}": each word prefers
// three successors, with occasional Zipfian jumps. Lines of 12 tokens.
inline std::string synthetic_text(int v, int lines, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::array<int, 3>> next(static_cast<std::size_t>(v));
  std::uniform_int_distribution<int> any(0, v - 1);
  for (auto& n : next) n = {any(rng), any(rng), any(rng)};
  std::vector<double> w(static_cast<std::size_t>(v));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<int> zipf(w.begin(), w.end());
  std::discrete_distribution<int> pick({0.5, 0.3, 0.2});
  std::bernoulli_distribution jump(0.3);
  std::string out;
  int cur = zipf(rng);
  for (int l = 0; l < lines; ++l) {
    for (int k = 0; k < 12; ++k) {
      out += (k ? " w" : "w") + std::to_string(cur);
      cur = jump(rng) ? zipf(rng) : next[static_cast<std::size_t>(cur)][static_cast<std::size_t>(pick(rng))];
    }
    out += '\n';
  }
  return out;
}

}  // namespace oracle
