#pragma once

// Association matrices built from counts or word vectors. Every matrix
// carries the ordered transform chain that produced it; replaying that chain
// on the same source reproduces the data bitwise.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coocmap/cooc.hpp"
#include "coocmap/corpus.hpp"
#include "coocmap/kernels.hpp"

namespace coocmap {

struct Transform {
  std::string name;
  std::vector<double> params;

  std::string to_string() const {
    std::ostringstream os;
    os << name;
    if (!params.empty()) {
      os << '(';
      for (std::size_t i = 0; i < params.size(); ++i) os << (i ? "," : "") << params[i];
      os << ')';
    }
    return os.str();
  }

  friend bool operator==(const Transform&, const Transform&) = default;

  static Transform epow(double a) { return {"epow", {a}}; }
  static Transform normalize() { return {"normalize", {}}; }
  static Transform unitr() { return {"unitr", {}}; }
  static Transform unitr_l1() { return {"unitr_l1", {}}; }
  static Transform log1p() { return {"log1p", {}}; }
  static Transform rapp_ratio() { return {"rapp_ratio", {}}; }
  static Transform fung_mi() { return {"fung_mi", {}}; }
  static Transform shifted_ppmi(double k) { return {"ppmi", {k}}; }
  static Transform double_center() { return {"double_center", {}}; }
  static Transform psd_sqrt_gram() { return {"psd_sqrt_gram", {}}; }
  static Transform clip(double lo, double hi) { return {"clip", {lo, hi}}; }
  static Transform drop(Eigen::Index r) { return {"drop", {static_cast<double>(r)}}; }
  static Transform trunc(Eigen::Index r) { return {"trunc", {static_cast<double>(r)}}; }
};

using TransformChain = std::vector<Transform>;

inline std::string chain_string(const TransformChain& chain) {
  std::string s;
  for (const auto& t : chain) s += (s.empty() ? "" : " > ") + t.to_string();
  return s;
}

namespace detail {

// Joint/marginal probabilities from a count table.
struct Marginals {
  DenseMatrix joint;
  DenseVector row;
  DenseVector col;
  bool empty = true;
};

inline Marginals marginals(const DenseMatrix& c) {
  Marginals m;
  const double total = c.sum();
  m.empty = !(total > 0);
  m.joint = m.empty ? DenseMatrix::Zero(c.rows(), c.cols()) : DenseMatrix(c / total);
  m.row = m.joint.rowwise().sum();
  m.col = m.joint.colwise().sum().transpose();
  return m;
}

// log(p / denom), with magnitudes up to kLogRatioNoise flushed to zero.
inline constexpr double kLogRatioNoise = 1e-12;

inline double denoised_log_ratio(double p, double denom) {
  const double l = std::log(p / denom);
  return std::abs(l) <= kLogRatioNoise ? 0.0 : l;
}

// p(s,i) / (p(s) p(i)); zero where either marginal is zero.
inline DenseMatrix rapp_ratio(const DenseMatrix& c) {
  const auto m = marginals(c);
  DenseMatrix out = DenseMatrix::Zero(c.rows(), c.cols());
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      const double denom = m.row(i) * m.col(j);
      if (denom > 0) out(i, j) = m.joint(i, j) / denom;
    }
  return out;
}

// p(s,i) log(p(s,i) / (p(s) p(i))) with 0 log 0 := 0.
inline DenseMatrix fung_mi(const DenseMatrix& c) {
  const auto m = marginals(c);
  DenseMatrix out = DenseMatrix::Zero(c.rows(), c.cols());
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      const double p = m.joint(i, j);
      if (p > 0) out(i, j) = p * denoised_log_ratio(p, m.row(i) * m.col(j));
    }
  return out;
}

// max(0, log(p(s,i) / (p(s) p(i))) - log k); zero joint entries give 0.
inline DenseMatrix shifted_ppmi(const DenseMatrix& c, double k) {
  if (!(k > 0)) throw ValidationError("ppmi shift k must be > 0");
  const auto m = marginals(c);
  const double shift = std::log(k);
  DenseMatrix out = DenseMatrix::Zero(c.rows(), c.cols());
  for (Eigen::Index j = 0; j < c.cols(); ++j)
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      const double p = m.joint(i, j);
      if (p > 0) {
        const double v = denoised_log_ratio(p, m.row(i) * m.col(j)) - shift;
        if (v > kLogRatioNoise) out(i, j) = v;
      }
    }
  return out;
}

// Subtract row means, then column means of the row-centred matrix.
inline DenseMatrix double_center(const DenseMatrix& l) {
  DenseMatrix out = l.colwise() - l.rowwise().mean();
  return centerc(out);
}

}  // namespace detail

inline DenseMatrix apply_transform(const Transform& t, const DenseMatrix& x) {
  auto param = [&](std::size_t i) {
    if (i >= t.params.size()) throw ValidationError("transform " + t.name + " missing parameter");
    return t.params[i];
  };
  if (t.name == "epow") return epow(x, param(0));
  if (t.name == "normalize") return normalize(x);
  if (t.name == "unitr") return unitr(x);
  if (t.name == "unitr_l1") return unitr_l1(x);
  if (t.name == "log1p") {
    if ((x.array() < 0).any()) throw DomainError("log1p: negative count");
    return x.array().log1p().matrix();
  }
  if (t.name == "rapp_ratio") return detail::rapp_ratio(x);
  if (t.name == "fung_mi") return detail::fung_mi(x);
  if (t.name == "ppmi") return detail::shifted_ppmi(x, param(0));
  if (t.name == "double_center") return detail::double_center(x);
  if (t.name == "psd_sqrt_gram") return psd_sqrt_gram(x);
  if (t.name == "clip") return clip(x, param(0), param(1));
  if (t.name == "drop") return drop_head(x, static_cast<Eigen::Index>(param(0)));
  if (t.name == "trunc") return trunc(x, static_cast<Eigen::Index>(param(0)));
  throw ValidationError("unknown transform: " + t.name);
}

inline DenseMatrix replay(const TransformChain& chain, const DenseMatrix& source) {
  DenseMatrix x = source;
  for (const auto& t : chain) x = apply_transform(t, x);
  return x;
}

struct AssocMatrix {
  DenseMatrix data;
  TransformChain chain;
  std::string vocab_digest;

  Eigen::Index rows() const noexcept { return data.rows(); }
};

/// Vectors indexed by vocabulary id (row i belongs to token id i).
struct WordVectors {
  DenseMatrix data;
  std::string vocab_digest;

  Eigen::Index dim() const noexcept { return data.cols(); }
};

inline AssocMatrix assoc_from_chain(const DenseMatrix& source, TransformChain chain,
                                    std::string digest) {
  AssocMatrix a{replay(chain, source), std::move(chain), std::move(digest)};
  if (!a.data.allFinite()) throw NumericError("association matrix has non-finite entries");
  return a;
}

/// normalize(C^(1/2)).
inline AssocMatrix coocmap_assoc(const CoocMatrix& c) {
  return assoc_from_chain(c.counts, {Transform::epow(0.5), Transform::normalize()}, c.vocab_digest);
}

/// normalize(log(1 + C)).
inline AssocMatrix log1p_assoc(const CoocMatrix& c) {
  return assoc_from_chain(c.counts, {Transform::log1p(), Transform::normalize()}, c.vocab_digest);
}

/// p(s,i)/(p(s)p(i)) with l1 row normalization.
inline AssocMatrix rapp_assoc(const CoocMatrix& c) {
  return assoc_from_chain(c.counts, {Transform::rapp_ratio(), Transform::unitr_l1()},
                          c.vocab_digest);
}

/// p(s,i) log(p(s,i)/(p(s)p(i))) with l1 row normalization.
inline AssocMatrix fung_assoc(const CoocMatrix& c) {
  return assoc_from_chain(c.counts, {Transform::fung_mi(), Transform::unitr_l1()}, c.vocab_digest);
}

/// Shifted positive PMI with l2 row normalization.
inline AssocMatrix ppmi_assoc(const CoocMatrix& c, double k = 1.0) {
  return assoc_from_chain(c.counts, {Transform::shifted_ppmi(k), Transform::unitr()},
                          c.vocab_digest);
}

/// log(1+C) with closed-form biases (row then column means removed), l2 rows.
inline AssocMatrix glove_assoc(const CoocMatrix& c) {
  return assoc_from_chain(c.counts,
                          {Transform::log1p(), Transform::double_center(), Transform::unitr()},
                          c.vocab_digest);
}

/// normalize((Xv Xv^T)^(1/2)): vectors lifted back to a V x V association.
inline AssocMatrix assoc_from_vectors(const WordVectors& v) {
  return assoc_from_chain(v.data, {Transform::psd_sqrt_gram(), Transform::normalize()},
                          v.vocab_digest);
}

/// U_r S_r from the SVD of C^(1/2).
inline WordVectors svd_vectors(const CoocMatrix& c, Eigen::Index r) {
  if (r < 1) throw ValidationError("svd_vectors: dimension must be >= 1");
  const auto f = svd(epow(c.counts, 0.5));
  r = std::min(r, f.rank_k());
  WordVectors v;
  v.data = f.U.leftCols(r) * f.S.head(r).asDiagonal();
  v.vocab_digest = c.vocab_digest;
  return v;
}

/// Appends `steps` to the chain, applying them left to right.
inline AssocMatrix apply_pipeline(const AssocMatrix& a, const TransformChain& steps) {
  AssocMatrix out = a;
  for (const auto& t : steps) {
    out.data = apply_transform(t, out.data);
    out.chain.push_back(t);
  }
  if (!out.data.allFinite()) throw NumericError("pipeline produced non-finite entries");
  return out;
}

struct LoadedVectors {
  WordVectors vectors;
  std::vector<std::string> missing;  // vocabulary words absent from the file
  std::size_t skipped = 0;           // file words absent from the vocabulary
};

/// Reads "V d" then "token v1 ... vd" lines, aligning rows to `vocab`.
inline LoadedVectors load_vectors(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, "missing header");
  long long n = 0, d = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> n >> d) || n < 0 || d < 1) throw ParseError(path.string(), 1, "header must be 'V d'");
  }
  LoadedVectors out;
  out.vectors.data = DenseMatrix::Zero(static_cast<Eigen::Index>(vocab.size()), d);
  out.vectors.vocab_digest = vocab.digest();
  std::vector<char> filled(vocab.size(), 0);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw ParseError(path.string(), lineno, "missing values");
    const std::string tok = line.substr(0, sp);
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    DenseVector row(d);
    for (long long k = 0; k < d; ++k) {
      while (p < end && *p == ' ') ++p;
      double v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) throw ParseError(path.string(), lineno, "bad float");
      row(k) = v;
      p = next;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end) throw ParseError(path.string(), lineno, "too many values");
    if (!row.allFinite()) throw ParseError(path.string(), lineno, "non-finite value");
    if (!vocab.contains(tok)) {
      ++out.skipped;
      continue;
    }
    const auto id = static_cast<std::size_t>(vocab.id(tok));
    if (filled[id]) continue;
    filled[id] = 1;
    out.vectors.data.row(static_cast<Eigen::Index>(id)) = row.transpose();
  }
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (!filled[i]) out.missing.push_back(vocab.tokens()[i]);
  return out;
}

inline void save_vectors(const std::filesystem::path& path, const WordVectors& v,
                         const Vocabulary& vocab) {
  if (static_cast<std::size_t>(v.data.rows()) != vocab.size())
    throw ValidationError("save_vectors: row count does not match vocabulary");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << v.data.rows() << ' ' << v.data.cols() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.data.rows(); ++i) {
    out << vocab.token(static_cast<TokenId>(i));
    for (Eigen::Index k = 0; k < v.data.cols(); ++k) out << ' ' << v.data(i, k);
    out << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace coocmap
