#pragma once

// Dense numeric primitives shared by the association and alignment code.
// Everything is double precision and takes inputs by const reference.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coocmap/error.hpp"

namespace coocmap {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

inline std::string shape_string(const DenseMatrix& x) {
  return std::to_string(x.rows()) + "x" + std::to_string(x.cols());
}

/// Entrywise power. Fractional exponents require nonnegative entries.
inline DenseMatrix epow(const DenseMatrix& x, double alpha) {
  if (alpha == 1.0) return x;
  const bool integral = alpha == std::floor(alpha);
  if (!integral && (x.array() < 0).any())
    throw DomainError("epow: negative entry with fractional exponent " + std::to_string(alpha));
  if (alpha == 0.5) return x.array().sqrt().matrix();
  return x.array().pow(alpha).matrix();
}

/// Scales each row to unit l2 norm; all-zero rows stay zero.
inline DenseMatrix unitr(const DenseMatrix& x) {
  DenseMatrix out = x;
  const DenseVector norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (norms(i) > 0) out.row(i) /= norms(i);
  return out;
}

/// Scales each row to unit l1 norm; all-zero rows stay zero.
inline DenseMatrix unitr_l1(const DenseMatrix& x) {
  DenseMatrix out = x;
  const DenseVector norms = x.cwiseAbs().rowwise().sum();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (norms(i) > 0) out.row(i) /= norms(i);
  return out;
}

/// Subtracts the column means.
inline DenseMatrix centerc(const DenseMatrix& x) {
  if (x.rows() == 0) return x;
  return x.rowwise() - x.colwise().mean();
}

/// unitr(centerc(unitr(x))).
inline DenseMatrix normalize(const DenseMatrix& x) { return unitr(centerc(unitr(x))); }

/// Linear-interpolation percentile with inclusive endpoints (p in [0, 100]).
/// Reorders `values`.
inline double percentile_inplace(std::span<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile p must lie in [0, 100]");
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(values.begin(), nth, values.end());
  const double a = *nth;
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(nth + 1, values.end());
  return a + frac * (b - a);
}

inline double percentile(std::span<const double> values, double p) {
  std::vector<double> copy(values.begin(), values.end());
  return percentile_inplace(copy, p);
}

struct ClipThresholds {
  double lower = 0;
  double upper = 0;
};

/// Two-level percentile thresholds: the p-th percentile of every row, then
/// the p-th percentile across those row statistics, for each of p_lo, p_hi.
inline ClipThresholds clip_thresholds(const DenseMatrix& x, double p_lo, double p_hi) {
  if (!(0.0 <= p_lo && p_lo < p_hi && p_hi <= 100.0))
    throw ValidationError("clip requires 0 <= p_lo < p_hi <= 100");
  if (x.size() == 0) throw ValidationError("clip of an empty matrix");
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  std::vector<double> row_lo(static_cast<std::size_t>(x.rows()));
  std::vector<double> row_hi(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    row_hi[static_cast<std::size_t>(i)] = percentile_inplace(row, p_hi);
    row_lo[static_cast<std::size_t>(i)] = percentile_inplace(row, p_lo);
  }
  return {percentile_inplace(row_lo, p_lo), percentile_inplace(row_hi, p_hi)};
}

inline DenseMatrix clip(const DenseMatrix& x, const ClipThresholds& t) {
  return x.cwiseMax(t.lower).cwiseMin(t.upper);
}

inline DenseMatrix clip(const DenseMatrix& x, double p_lo, double p_hi) {
  return clip(x, clip_thresholds(x, p_lo, p_hi));
}

struct SvdFactors {
  DenseMatrix U;   // rows x k, orthonormal columns
  DenseVector S;   // k, nonincreasing
  DenseMatrix Vt;  // k x cols

  Eigen::Index rank_k() const noexcept { return S.size(); }

  /// U_r * diag(S_r) * Vt_r for the leading r components.
  DenseMatrix reconstruct(Eigen::Index r) const {
    r = std::min(r, rank_k());
    return U.leftCols(r) * S.head(r).asDiagonal() * Vt.topRows(r);
  }
};

/// Thin SVD. Each column of U has its largest-magnitude entry (lowest index
/// on ties) made nonnegative, with the matching row of Vt flipped.
inline SvdFactors svd(const DenseMatrix& x) {
  if (x.size() == 0) throw ValidationError("svd of an empty matrix");
  if (!x.allFinite()) throw NumericError("svd: non-finite input of size " + shape_string(x));
  Eigen::BDCSVD<DenseMatrix> dec(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success)
    throw NumericError("svd did not converge for matrix of size " + shape_string(x));
  SvdFactors f{dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
  for (Eigen::Index k = 0; k < f.U.cols(); ++k) {
    Eigen::Index arg = 0;
    double best = -1;
    for (Eigen::Index i = 0; i < f.U.rows(); ++i) {
      const double a = std::abs(f.U(i, k));
      if (a > best) best = a, arg = i;
    }
    if (f.U(arg, k) < 0) {
      f.U.col(k) = -f.U.col(k);
      f.Vt.row(k) = -f.Vt.row(k);
    }
  }
  return f;
}

/// X minus its rank-r SVD reconstruction (removes the head of the spectrum).
inline DenseMatrix drop_head(const DenseMatrix& x, Eigen::Index r) {
  if (r < 0) throw ValidationError("drop: r must be >= 0");
  if (r == 0) return x;
  return x - svd(x).reconstruct(r);
}

/// Best rank-r approximation (keeps the head of the spectrum).
inline DenseMatrix trunc(const DenseMatrix& x, Eigen::Index r) {
  if (r < 0) throw ValidationError("trunc: r must be >= 0");
  if (r == 0) return DenseMatrix::Zero(x.rows(), x.cols());
  return svd(x).reconstruct(r);
}

/// (Xv Xv^T)^(1/2) = U S U^T for Xv = U S Vt.
inline DenseMatrix psd_sqrt_gram(const DenseMatrix& xv) {
  const auto f = svd(xv);
  return f.U * f.S.asDiagonal() * f.U.transpose();
}

enum class Metric { cosine, dot, neg_l2, neg_l1 };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::cosine: return "cosine";
    case Metric::dot: return "dot";
    case Metric::neg_l2: return "neg_l2";
    case Metric::neg_l1: return "neg_l1";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "dot") return Metric::dot;
  if (s == "neg_l2" || s == "l2") return Metric::neg_l2;
  if (s == "neg_l1" || s == "l1") return Metric::neg_l1;
  throw ValidationError("unknown metric: " + s);
}

/// n x m similarity between the rows of x (n x k) and z (m x k); larger means
/// more similar. Cosine treats zero rows as similarity 0.
inline DenseMatrix sim_matrix(const DenseMatrix& x, const DenseMatrix& z, Metric metric) {
  if (x.cols() != z.cols())
    throw ValidationError("sim_matrix: width mismatch " + shape_string(x) + " vs " + shape_string(z));
  switch (metric) {
    case Metric::cosine: {
      const DenseMatrix xu = unitr(x);
      const DenseMatrix zu = unitr(z);
      return xu * zu.transpose();
    }
    case Metric::dot:
      return x * z.transpose();
    case Metric::neg_l2: {
      const DenseVector xn = x.rowwise().squaredNorm();
      const DenseVector zn = z.rowwise().squaredNorm();
      DenseMatrix d = x * z.transpose();
      for (Eigen::Index j = 0; j < d.cols(); ++j)
        for (Eigen::Index i = 0; i < d.rows(); ++i)
          d(i, j) = -std::sqrt(std::max(0.0, xn(i) + zn(j) - 2.0 * d(i, j)));
      return d;
    }
    case Metric::neg_l1: {
      DenseMatrix d(x.rows(), z.rows());
      const DenseMatrix zt = z.transpose();  // columns are z rows, contiguous
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const DenseVector xi = x.row(i).transpose();
        for (Eigen::Index j = 0; j < z.rows(); ++j) d(i, j) = -(zt.col(j) - xi).cwiseAbs().sum();
      }
      return d;
    }
  }
  throw ValidationError("unknown metric");
}

/// Orthogonal W minimizing ||xs W - zt||_F, from the SVD of xs^T zt.
inline DenseMatrix procrustes(const DenseMatrix& xs, const DenseMatrix& zt) {
  if (xs.rows() == 0 || xs.cols() == 0) throw ValidationError("procrustes: empty input");
  if (xs.rows() != zt.rows() || xs.cols() != zt.cols())
    throw ValidationError("procrustes: shape mismatch " + shape_string(xs) + " vs " + shape_string(zt));
  const DenseMatrix m = xs.transpose() * zt;
  if (!m.allFinite()) throw NumericError("procrustes: non-finite cross-covariance");
  Eigen::JacobiSVD<DenseMatrix> dec(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return dec.matrixU() * dec.matrixV().transpose();
}

/// Each row sorted ascending independently.
inline DenseMatrix sortrow(const DenseMatrix& x) {
  DenseMatrix out(x.rows(), x.cols());
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    std::sort(row.begin(), row.end());
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = row[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace coocmap
