#pragma once

// Matching and self-learning. Similarities are "higher is better" throughout,
// so matching takes argmax and the objective is mean_i max_j.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coocmap/assoc.hpp"
#include "coocmap/cooc.hpp"
#include "coocmap/kernels.hpp"

namespace coocmap {

using IndexSeq = std::vector<Eigen::Index>;

struct MatchState {
  IndexSeq s;  // indices into the source vocabulary
  IndexSeq t;  // indices into the target vocabulary, same length as s
  double objective = 0;

  std::size_t size() const noexcept { return s.size(); }
};

struct ClipParams {
  double p_lo = 1.0;
  double p_hi = 99.0;
};

/// Second stage: rebuild the association with the head dropped and clipped,
/// then re-run self-learning seeded by the first stage.
struct Stage2 {
  std::optional<ClipParams> clip = ClipParams{};
  Eigen::Index drop_r = 20;
};

struct AlignConfig {
  int csls_k = 10;
  int max_iters = 100;
  double tol = 1e-6;
  Metric metric = Metric::cosine;
  std::optional<ClipParams> stage1_clip;
  std::optional<Eigen::Index> trunc_dim;
  std::optional<Stage2> stage2;

  void validate() const {
    if (csls_k < 1) throw ValidationError("csls_k must be >= 1");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(tol >= 0)) throw ValidationError("tol must be >= 0");
    if (trunc_dim && *trunc_dim < 1) throw ValidationError("trunc dimension must be >= 1");
    if (stage2 && stage2->drop_r < 0) throw ValidationError("drop r must be >= 0");
  }
};

/// Drop size used with truncation to dimension d: min(20, ceil(20 d / 400)).
inline Eigen::Index drop_schedule(Eigen::Index d) {
  return std::min<Eigen::Index>(20, (20 * d + 399) / 400);
}

struct StageTrace {
  std::string stage;
  std::vector<double> objectives;  // one per measurement round
};

using RunTrace = std::vector<StageTrace>;

namespace detail {

// Mean of the k largest values in a strided sequence.
template <typename Getter>
double topk_mean(Eigen::Index n, int k, std::vector<double>& buf, Getter get) {
  buf.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = get(i);
  auto kth = buf.begin() + (k - 1);
  std::nth_element(buf.begin(), kth, buf.end(), std::greater<double>());
  double sum = 0;
  for (auto it = buf.begin(); it <= kth; ++it) sum += *it;
  return sum / k;
}

inline int effective_k(int k, const DenseMatrix& s) {
  return static_cast<int>(std::min<Eigen::Index>({k, s.rows(), s.cols()}));
}

}  // namespace detail

/// S'[i,j] = S[i,j] - (mean of row i's k largest + mean of column j's k largest) / 2.
inline DenseMatrix csls(const DenseMatrix& s, int k) {
  if (k < 1 || k > std::min(s.rows(), s.cols()))
    throw ValidationError("csls: k=" + std::to_string(k) + " out of range for " + shape_string(s));
  std::vector<double> buf;
  DenseVector row_pen(s.rows());
  DenseVector col_pen(s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    row_pen(i) = detail::topk_mean(s.cols(), k, buf, [&](Eigen::Index j) { return s(i, j); });
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    col_pen(j) = detail::topk_mean(s.rows(), k, buf, [&](Eigen::Index i) { return s(i, j); });
  DenseMatrix out(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    for (Eigen::Index i = 0; i < s.rows(); ++i) out(i, j) = s(i, j) - 0.5 * (row_pen(i) + col_pen(j));
  return out;
}

/// Forward pairs (i, argmax_j) for every row, then backward pairs
/// (argmax_i, j) for every column. Ties go to the lowest index.
inline MatchState match_bidirectional(const DenseMatrix& s) {
  if (s.rows() == 0 || s.cols() == 0) throw ValidationError("match: empty similarity matrix");
  MatchState m;
  const auto n1 = s.rows(), n2 = s.cols();
  m.s.reserve(static_cast<std::size_t>(n1 + n2));
  m.t.reserve(static_cast<std::size_t>(n1 + n2));
  IndexSeq best_col(static_cast<std::size_t>(n1), 0);
  DenseVector best_val = s.col(0);
  for (Eigen::Index j = 1; j < n2; ++j)
    for (Eigen::Index i = 0; i < n1; ++i)
      if (s(i, j) > best_val(i)) best_val(i) = s(i, j), best_col[static_cast<std::size_t>(i)] = j;
  for (Eigen::Index i = 0; i < n1; ++i) {
    m.s.push_back(i);
    m.t.push_back(best_col[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index j = 0; j < n2; ++j) {
    Eigen::Index arg = 0;
    s.col(j).maxCoeff(&arg);  // first maximal index
    m.s.push_back(arg);
    m.t.push_back(j);
  }
  return m;
}

/// mean over rows of the row maximum.
inline double objective(const DenseMatrix& s) {
  if (s.size() == 0) throw ValidationError("objective of an empty matrix");
  return s.rowwise().maxCoeff().mean();
}

inline void validate_state(const MatchState& st, Eigen::Index n1, Eigen::Index n2) {
  if (st.s.empty() || st.s.size() != st.t.size())
    throw ValidationError("match state must hold equal-length, nonempty index sequences");
  for (auto i : st.s)
    if (i < 0 || i >= n1) throw ValidationError("source index out of range: " + std::to_string(i));
  for (auto j : st.t)
    if (j < 0 || j >= n2) throw ValidationError("target index out of range: " + std::to_string(j));
}

/// Similarity of rows of X and Z measured on the matched columns X[:, s], Z[:, t].
inline DenseMatrix measure(const AssocMatrix& x, const AssocMatrix& z, const MatchState& st,
                           Metric metric) {
  return sim_matrix(x.data(Eigen::all, st.s), z.data(Eigen::all, st.t),
                    metric);
}

/// Row-sorted, normalized signatures compared across languages; no index
/// correspondence is needed.
inline MatchState unsupervised_init(const AssocMatrix& x, const AssocMatrix& z,
                                    const AlignConfig& cfg) {
  cfg.validate();
  DenseMatrix rx = sortrow(x.data);
  DenseMatrix rz = sortrow(z.data);
  const auto width = std::min(rx.cols(), rz.cols());
  // Ascending rows: keeping the left block drops the longer side's largest values.
  if (rx.cols() > width) rx = rx.leftCols(width).eval();
  if (rz.cols() > width) rz = rz.leftCols(width).eval();
  const DenseMatrix d = sim_matrix(normalize(rx), normalize(rz), cfg.metric);
  auto st = match_bidirectional(csls(d, detail::effective_k(cfg.csls_k, d)));
  st.objective = objective(d);
  return st;
}

struct SelfLearnResult {
  MatchState state;  // best-objective matching visited
  std::vector<double> objectives;
  int iterations = 0;
};

/// Alternates measuring X[:, s] vs Z[:, t] and re-matching until the
/// objective improves by less than tol or max_iters rounds have run.
/// The returned state is the matching produced by the best measurement.
inline SelfLearnResult coocmap_selflearn(const AssocMatrix& x, const AssocMatrix& z,
                                         const MatchState& init, const AlignConfig& cfg) {
  cfg.validate();
  validate_state(init, x.data.cols(), z.data.cols());
  SelfLearnResult r;
  MatchState cur = init;
  double best = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    const DenseMatrix d = measure(x, z, cur, cfg.metric);
    const double obj = objective(d);
    MatchState next = match_bidirectional(csls(d, detail::effective_k(cfg.csls_k, d)));
    next.objective = obj;
    r.objectives.push_back(obj);
    ++r.iterations;
    const double prev = best;
    if (obj > best) {
      best = obj;
      r.state = next;
    }
    if (it > 0 && !(obj - prev >= cfg.tol)) break;
    cur = std::move(next);
  }
  return r;
}

struct VecmapResult {
  MatchState state;
  DenseMatrix W;
  std::vector<double> objectives;
  int iterations = 0;
};

/// Procrustes self-learning on normalized vectors.
inline VecmapResult vecmap_selflearn(const WordVectors& xv, const WordVectors& zv,
                                     const MatchState& init, const AlignConfig& cfg) {
  cfg.validate();
  if (xv.dim() != zv.dim()) throw ValidationError("vecmap: vector dimensions differ");
  validate_state(init, xv.data.rows(), zv.data.rows());
  const DenseMatrix xn = normalize(xv.data);
  const DenseMatrix zn = normalize(zv.data);
  VecmapResult r;
  MatchState cur = init;
  double best = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    const DenseMatrix w = procrustes(xn(cur.s, Eigen::all),
                                     zn(cur.t, Eigen::all));
    const DenseMatrix d = sim_matrix(xn * w, zn, Metric::cosine);
    const double obj = objective(d);
    MatchState next = match_bidirectional(csls(d, detail::effective_k(cfg.csls_k, d)));
    next.objective = obj;
    r.objectives.push_back(obj);
    ++r.iterations;
    const double prev = best;
    if (obj > best) {
      best = obj;
      r.state = next;
      r.W = w;
    }
    if (it > 0 && !(obj - prev >= cfg.tol)) break;
    cur = std::move(next);
  }
  return r;
}

using AssocBuilder = std::function<AssocMatrix(const CoocMatrix&)>;

struct CoocmapRun {
  MatchState state;
  AssocMatrix x;  // association matrices of the last stage run
  AssocMatrix z;
  RunTrace trace;
};

/// Stage 1 association: builder (default normalize(C^(1/2))), optionally
/// truncated to cfg.trunc_dim, then optionally clipped.
inline AssocMatrix stage1_assoc(const CoocMatrix& c, const AlignConfig& cfg,
                                const AssocBuilder& builder) {
  AssocMatrix a = builder ? builder(c) : coocmap_assoc(c);
  if (cfg.trunc_dim) a = apply_pipeline(a, {Transform::trunc(*cfg.trunc_dim)});
  if (cfg.stage1_clip) a = apply_pipeline(a, {Transform::clip(cfg.stage1_clip->p_lo, cfg.stage1_clip->p_hi)});
  return a;
}

inline AssocMatrix stage2_assoc(const CoocMatrix& c, const AlignConfig& cfg,
                                const AssocBuilder& builder) {
  AssocMatrix a = builder ? builder(c) : coocmap_assoc(c);
  if (cfg.trunc_dim) a = apply_pipeline(a, {Transform::trunc(*cfg.trunc_dim)});
  a = apply_pipeline(a, {Transform::drop(cfg.stage2->drop_r)});
  if (cfg.stage2->clip) a = apply_pipeline(a, {Transform::clip(cfg.stage2->clip->p_lo, cfg.stage2->clip->p_hi)});
  return a;
}

/// Full coocmap procedure. Without a seed the first stage starts from the
/// unsupervised initializer; with a seed (dict-init) it starts from it.
inline CoocmapRun run_coocmap(const CoocMatrix& c1, const CoocMatrix& c2, const AlignConfig& cfg,
                              const std::optional<MatchState>& seed = std::nullopt,
                              const AssocBuilder& builder = {}) {
  cfg.validate();
  CoocmapRun run;
  run.x = stage1_assoc(c1, cfg, builder);
  run.z = stage1_assoc(c2, cfg, builder);
  MatchState init;
  if (seed) {
    init = *seed;
  } else {
    init = unsupervised_init(run.x, run.z, cfg);
    run.trace.push_back({"init", {init.objective}});
  }
  auto s1 = coocmap_selflearn(run.x, run.z, init, cfg);
  run.trace.push_back({"stage1", s1.objectives});
  run.state = std::move(s1.state);
  if (cfg.stage2) {
    run.x = stage2_assoc(c1, cfg, builder);
    run.z = stage2_assoc(c2, cfg, builder);
    auto s2 = coocmap_selflearn(run.x, run.z, run.state, cfg);
    run.trace.push_back({"stage2", s2.objectives});
    run.state = std::move(s2.state);
  }
  return run;
}

struct VecmapRun {
  MatchState state;
  DenseMatrix W;
  WordVectors xv;
  WordVectors zv;
  RunTrace trace;
};

/// vecmap on given vectors: initialization through the lifted association
/// normalize((Xv Xv^T)^(1/2)) unless a seed is supplied, then Procrustes
/// self-learning.
inline VecmapRun run_vecmap(const WordVectors& xv, const WordVectors& zv, const AlignConfig& cfg,
                            const std::optional<MatchState>& seed = std::nullopt) {
  cfg.validate();
  VecmapRun run;
  run.xv = xv;
  run.zv = zv;
  MatchState init;
  if (seed) {
    init = *seed;
  } else {
    init = unsupervised_init(assoc_from_vectors(xv), assoc_from_vectors(zv), cfg);
    run.trace.push_back({"init", {init.objective}});
  }
  auto r = vecmap_selflearn(xv, zv, init, cfg);
  run.trace.push_back({"vecmap", r.objectives});
  run.state = std::move(r.state);
  run.W = std::move(r.W);
  return run;
}

}  // namespace coocmap
