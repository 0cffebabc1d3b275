#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "coocmap/align.hpp"
#include "coocmap/corpus.hpp"

namespace coocmap {

struct Dictionary {
  std::map<std::string, std::set<std::string>> entries;

  std::size_t size() const noexcept { return entries.size(); }
};

inline std::string lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) utf8::encode(utf8::to_lower(utf8::decode(s, pos)), out);
  return out;
}

/// "source<ws>target" per line; repeated sources accumulate targets.
inline Dictionary parse_dictionary(std::string_view text, const std::string& source_name) {
  Dictionary d;
  std::size_t lineno = 0, start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    ++lineno;
    std::istringstream ls{std::string(text.substr(start, nl - start))};
    start = nl + 1;
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(std::move(f));
    if (fields.empty()) continue;
    if (fields.size() != 2)
      throw ParseError(source_name, lineno,
                       "expected 2 fields, found " + std::to_string(fields.size()));
    try {
      d.entries[lowercase(fields[0])].insert(lowercase(fields[1]));
    } catch (const DecodeError& e) {
      throw ParseError(source_name, lineno, e.what());
    }
  }
  if (d.entries.empty()) throw ParseError(source_name, lineno, "dictionary has no entries");
  return d;
}

inline Dictionary load_dictionary(const std::filesystem::path& path) {
  return parse_dictionary(read_file(path), path.string());
}

/// Every in-vocabulary dictionary pair as a seed matching (dict-init).
inline MatchState seed_from_dictionary(const Dictionary& d, const Vocabulary& v1,
                                       const Vocabulary& v2) {
  MatchState m;
  for (const auto& [src, tgts] : d.entries) {
    if (!v1.contains(src)) continue;
    for (const auto& tgt : tgts) {
      if (!v2.contains(tgt)) continue;
      m.s.push_back(v1.id(src));
      m.t.push_back(v2.id(tgt));
    }
  }
  if (m.s.empty()) throw ValidationError("dictionary has no pair inside both vocabularies");
  return m;
}

struct Prediction {
  std::string source;
  std::string prediction;
  TokenId source_rank = 0;  // source vocabulary id; smaller is more frequent
  Eigen::Index predicted_id = -1;
};

using Predictions = std::vector<Prediction>;

inline Predictions predictions_from_scores(const DenseMatrix& scores, const Vocabulary& v1,
                                           const Vocabulary& v2) {
  if (scores.rows() != static_cast<Eigen::Index>(v1.size()) ||
      scores.cols() != static_cast<Eigen::Index>(v2.size()))
    throw ValidationError("score matrix shape does not match vocabularies");
  Predictions out;
  out.reserve(v1.size());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index j = 0;
    scores.row(i).maxCoeff(&j);
    out.push_back({v1.token(static_cast<TokenId>(i)), v2.token(static_cast<TokenId>(j)),
                   static_cast<TokenId>(i), j});
  }
  return out;
}

/// Final measurement under the matching, then argmax per source word.
inline Predictions translate(const AssocMatrix& x, const AssocMatrix& z, const MatchState& final_state,
                             const AlignConfig& cfg, const Vocabulary& v1, const Vocabulary& v2) {
  validate_state(final_state, x.data.cols(), z.data.cols());
  const DenseMatrix d = measure(x, z, final_state, cfg.metric);
  return predictions_from_scores(csls(d, detail::effective_k(cfg.csls_k, d)), v1, v2);
}

inline Predictions translate_vectors(const WordVectors& xv, const WordVectors& zv,
                                     const DenseMatrix& w, const AlignConfig& cfg,
                                     const Vocabulary& v1, const Vocabulary& v2) {
  const DenseMatrix d = sim_matrix(normalize(xv.data) * w, normalize(zv.data), Metric::cosine);
  return predictions_from_scores(csls(d, detail::effective_k(cfg.csls_k, d)), v1, v2);
}

struct EvalResult {
  double accuracy = 0;
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  bool no_overlap = false;  // nothing was evaluable; accuracy reported as 0
};

/// Precision@1 over dictionary sources in v1 having at least one target in v2.
inline EvalResult precision_at_1(const Predictions& preds, const Dictionary& dict,
                                 const Vocabulary& v1, const Vocabulary& v2) {
  std::unordered_map<std::string, const std::string*> by_source;
  for (const auto& p : preds) by_source.emplace(p.source, &p.prediction);
  EvalResult r;
  for (const auto& [src, tgts] : dict.entries) {
    if (!v1.contains(src)) continue;
    if (std::none_of(tgts.begin(), tgts.end(), [&](const auto& t) { return v2.contains(t); }))
      continue;
    ++r.evaluated;
    auto it = by_source.find(src);
    if (it != by_source.end() && tgts.count(*it->second)) ++r.correct;
  }
  r.no_overlap = r.evaluated == 0;
  r.accuracy = r.no_overlap ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.evaluated);
  return r;
}

/// Tokens of v1 (in rank order, unknown token excluded) that also occur in v2,
/// capped at top_n (0 = no cap).
inline std::vector<TokenId> shared_tokens(const Vocabulary& v1, const Vocabulary& v2,
                                          std::size_t top_n = 0) {
  std::vector<TokenId> out;
  for (std::size_t i = 1; i < v1.size(); ++i) {
    if (top_n && out.size() >= top_n) break;
    if (v2.contains(v1.tokens()[i])) out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

/// Fraction of the top_n shared tokens predicted as themselves.
inline EvalResult identity_accuracy(const Predictions& preds, const Vocabulary& v1,
                                    const Vocabulary& v2, std::size_t top_n = 0) {
  EvalResult r;
  for (auto id : shared_tokens(v1, v2, top_n)) {
    ++r.evaluated;
    const auto& p = preds.at(static_cast<std::size_t>(id));
    if (p.prediction == p.source) ++r.correct;
  }
  r.no_overlap = r.evaluated == 0;
  r.accuracy = r.no_overlap ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.evaluated);
  return r;
}

/// Correctness column for a dump: 1/0 when evaluable against `dict`, else "-".
inline std::vector<std::optional<bool>> judge(const Predictions& preds, const Dictionary& dict,
                                              const Vocabulary& v2) {
  std::vector<std::optional<bool>> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    auto it = dict.entries.find(p.source);
    if (it == dict.entries.end() ||
        std::none_of(it->second.begin(), it->second.end(), [&](const auto& t) { return v2.contains(t); })) {
      out.emplace_back();
    } else {
      out.emplace_back(it->second.count(p.prediction) > 0);
    }
  }
  return out;
}

inline std::vector<std::optional<bool>> judge_identity(const Predictions& preds, const Vocabulary& v2) {
  std::vector<std::optional<bool>> out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    if (p.source_rank == Vocabulary::kUnkId || !v2.contains(p.source))
      out.emplace_back();
    else
      out.emplace_back(p.prediction == p.source);
  }
  return out;
}

/// "rank\tsource\tprediction\tcorrect?" lines.
inline void save_predictions(const std::filesystem::path& path, const Predictions& preds,
                             const std::vector<std::optional<bool>>& correct) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const char* mark = "-";
    if (i < correct.size() && correct[i]) mark = *correct[i] ? "1" : "0";
    out << p.source_rank << '\t' << p.source << '\t' << p.prediction << '\t' << mark << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed");
}

inline Predictions load_predictions(const std::filesystem::path& path) {
  const auto text = read_file(path);
  Predictions preds;
  std::size_t start = 0, lineno = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    ++lineno;
    std::string line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t a = 0;
    for (;;) {
      auto tab = line.find('\t', a);
      f.push_back(line.substr(a, tab == std::string::npos ? std::string::npos : tab - a));
      if (tab == std::string::npos) break;
      a = tab + 1;
    }
    if (f.size() != 4) throw ParseError(path.string(), lineno, "expected 4 tab-separated fields");
    Prediction p;
    try {
      p.source_rank = static_cast<TokenId>(std::stol(f[0]));
    } catch (const std::exception&) {
      throw ParseError(path.string(), lineno, "bad rank");
    }
    p.source = f[1];
    p.prediction = f[2];
    preds.push_back(std::move(p));
  }
  return preds;
}

enum class ClipSide { full_rank_plus, reduced_plus };

inline std::string to_string(ClipSide s) {
  return s == ClipSide::full_rank_plus ? "full-rank+" : "reduced+";
}

struct ClipDiffRow {
  std::string token_i;
  std::string token_j;
  ClipSide side;
  double magnitude;  // |full - reduced|
  Eigen::Index i;
  Eigen::Index j;
};

/// Pairs clipped in exactly one of the two matrices under shared thresholds,
/// largest difference first.
inline std::vector<ClipDiffRow> clip_diff_report(const AssocMatrix& full, const AssocMatrix& reduced,
                                                 const ClipThresholds& th, const Vocabulary& vocab) {
  if (full.data.rows() != reduced.data.rows() || full.data.cols() != reduced.data.cols())
    throw ValidationError("clip_diff_report: shape mismatch");
  if (full.data.rows() != static_cast<Eigen::Index>(vocab.size()) ||
      full.data.cols() != static_cast<Eigen::Index>(vocab.size()))
    throw ValidationError("clip_diff_report: matrices must be V x V over the vocabulary");
  auto clipped = [&](double v) { return v < th.lower || v > th.upper; };
  std::vector<ClipDiffRow> rows;
  for (Eigen::Index i = 0; i < full.data.rows(); ++i)
    for (Eigen::Index j = 0; j < full.data.cols(); ++j) {
      const double a = full.data(i, j), b = reduced.data(i, j);
      const bool ca = clipped(a), cb = clipped(b);
      if (ca == cb) continue;
      rows.push_back({vocab.token(static_cast<TokenId>(i)), vocab.token(static_cast<TokenId>(j)),
                      ca ? ClipSide::full_rank_plus : ClipSide::reduced_plus, std::abs(a - b), i, j});
    }
  std::sort(rows.begin(), rows.end(), [](const ClipDiffRow& a, const ClipDiffRow& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return std::tie(a.i, a.j) < std::tie(b.i, b.j);
  });
  return rows;
}

}  // namespace coocmap
