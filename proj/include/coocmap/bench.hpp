#pragma once

// Desk-scale verification: a corpus split against itself (ground truth is
// string identity), the same split under a secret relabeling (ground truth is
// the permutation), and sweeps over data size / preset / dimension.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "coocmap/corpus.hpp"
#include "coocmap/cooc.hpp"
#include "coocmap/eval.hpp"
#include "coocmap/pipeline.hpp"

namespace coocmap {

inline constexpr std::size_t kDefaultVocabSize = 5000;
inline constexpr std::size_t kSplitBlockLines = 1000;
inline constexpr double kWorksAccuracy = 0.50;
inline constexpr double kStartsAccuracy = 0.05;

struct BenchConfig {
  std::string preset = "coocmap";
  std::size_t vocab_size = kDefaultVocabSize;
  int window = 5;
  std::size_t top_n = 1000;
  std::size_t block_lines = kSplitBlockLines;
  Overrides overrides;
};

struct RunReport {
  nlohmann::json config;
  RunTrace trace;
  std::string eval_mode;  // identity | cipher | dictionary
  EvalResult eval;
  std::size_t vocab_source = 0;
  std::size_t vocab_target = 0;
  std::uint64_t bytes_source = 0;
  std::uint64_t bytes_target = 0;
  std::optional<std::uint64_t> rng_seed;
  double seconds = 0;  // volatile: excluded from deterministic output
  Predictions predictions;

  /// Deterministic part first; wall clock sits under "volatile".
  nlohmann::json to_json(bool include_volatile = true) const {
    nlohmann::json traces = nlohmann::json::array();
    for (const auto& st : trace) traces.push_back({{"stage", st.stage}, {"objectives", st.objectives}});
    nlohmann::json j = {{"config", config},
                        {"traces", traces},
                        {"eval_mode", eval_mode},
                        {"accuracy", eval.accuracy},
                        {"evaluated", eval.evaluated},
                        {"correct", eval.correct},
                        {"no_overlap", eval.no_overlap},
                        {"vocab_sizes", {vocab_source, vocab_target}},
                        {"data_bytes", {bytes_source, bytes_target}},
                        {"works", eval.accuracy >= kWorksAccuracy}};
    if (rng_seed) j["rng_seed"] = *rng_seed;
    if (include_volatile) j["volatile"] = {{"seconds", seconds}};
    return j;
  }
};

inline nlohmann::json overrides_json(const Overrides& o) {
  nlohmann::json j = nlohmann::json::object();
  if (o.csls_k) j["csls_k"] = *o.csls_k;
  if (o.max_iters) j["max_iters"] = *o.max_iters;
  if (o.tol) j["tol"] = *o.tol;
  if (o.metric) j["metric"] = to_string(*o.metric);
  if (o.clip) j["clip"] = {o.clip->p_lo, o.clip->p_hi};
  if (o.drop_r) j["drop_r"] = *o.drop_r;
  if (o.dim) j["dim"] = *o.dim;
  return j;
}

inline nlohmann::json align_config_json(const AlignConfig& c) {
  nlohmann::json j = {{"csls_k", c.csls_k}, {"max_iters", c.max_iters}, {"tol", c.tol},
                      {"metric", to_string(c.metric)}};
  if (c.stage1_clip) j["stage1_clip"] = {c.stage1_clip->p_lo, c.stage1_clip->p_hi};
  if (c.trunc_dim) j["trunc_dim"] = *c.trunc_dim;
  if (c.stage2) {
    j["stage2"] = {{"drop_r", c.stage2->drop_r}};
    if (c.stage2->clip) j["stage2"]["clip"] = {c.stage2->clip->p_lo, c.stage2->clip->p_hi};
  }
  return j;
}

/// Splits text into two halves by alternating blocks of `block_lines` lines.
inline std::pair<std::string, std::string> split_alternating(std::string_view text,
                                                             std::size_t block_lines) {
  if (block_lines == 0) throw ValidationError("block_lines must be >= 1");
  std::pair<std::string, std::string> out;
  std::size_t start = 0, line = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
    auto& dst = ((line / block_lines) % 2 == 0) ? out.first : out.second;
    dst.append(text.substr(start, end - start));
    start = end;
    ++line;
  }
  return out;
}

/// Tokenize, rank a vocabulary, count windows.
inline Side prepare_side(std::string_view text, std::size_t vocab_size, int window) {
  const auto lines = tokenize(text);
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(lines, vocab_size));
  const auto corpus = encode(lines, vocab);
  return {count_cooc(corpus, window), vocab, std::nullopt};
}

/// Seeded Fisher-Yates with rejection sampling, independent of the standard
/// library's distribution implementations.
inline std::vector<Eigen::Index> seeded_permutation(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> pi(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pi[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    std::swap(pi[static_cast<std::size_t>(i)], pi[static_cast<std::size_t>(r % bound)]);
  }
  return pi;
}

namespace detail {

inline nlohmann::json bench_config_json(const BenchConfig& cfg, const std::string& mode,
                                        std::uint64_t budget) {
  return {{"mode", mode},
          {"preset", cfg.preset},
          {"budget_bytes", budget},
          {"vocab_size", cfg.vocab_size},
          {"window", cfg.window},
          {"top_n", cfg.top_n},
          {"block_lines", cfg.block_lines},
          {"overrides", overrides_json(cfg.overrides)}};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Same-language split benchmark: ground truth is token identity.
inline RunReport split_identity_bench(const std::filesystem::path& corpus, std::uint64_t budget,
                                      const BenchConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& preset = find_preset(cfg.preset);
  const auto text = take_head_bytes(corpus, budget);
  const auto [ta, tb] = split_alternating(text, cfg.block_lines);
  const auto a = prepare_side(ta, cfg.vocab_size, cfg.window);
  const auto b = prepare_side(tb, cfg.vocab_size, cfg.window);
  auto res = run_preset(preset, a, b, cfg.overrides);

  RunReport rep;
  rep.config = detail::bench_config_json(cfg, "identity", budget);
  rep.config["align"] = align_config_json(res.config);
  rep.config["chains"] = res.chains;
  rep.trace = std::move(res.trace);
  rep.eval_mode = "identity";
  rep.eval = identity_accuracy(res.predictions, *a.vocab, *b.vocab, cfg.top_n);
  rep.vocab_source = a.vocab->size();
  rep.vocab_target = b.vocab->size();
  rep.bytes_source = ta.size();
  rep.bytes_target = tb.size();
  rep.predictions = std::move(res.predictions);
  rep.seconds = detail::seconds_since(t0);
  return rep;
}

/// The target half is relabeled by a seeded permutation before matching;
/// accuracy is measured against that permutation.
inline RunReport cipher_bench(const std::filesystem::path& corpus, std::uint64_t budget,
                              std::uint64_t seed, const BenchConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& preset = find_preset(cfg.preset);
  const auto text = take_head_bytes(corpus, budget);
  const auto [ta, tb] = split_alternating(text, cfg.block_lines);
  const auto a = prepare_side(ta, cfg.vocab_size, cfg.window);
  const auto b = prepare_side(tb, cfg.vocab_size, cfg.window);

  const auto vb = static_cast<Eigen::Index>(b.vocab->size());
  const auto pi = seeded_permutation(vb, seed);
  std::vector<std::string> labels{std::string(Vocabulary::kUnk)};
  for (Eigen::Index k = 1; k < vb; ++k) labels.push_back("#" + std::to_string(k));
  Side cipher{permute_cooc(b.cooc, pi), std::make_shared<const Vocabulary>(std::move(labels)),
              std::nullopt};
  auto res = run_preset(preset, a, cipher, cfg.overrides);

  RunReport rep;
  rep.config = detail::bench_config_json(cfg, "cipher", budget);
  rep.config["align"] = align_config_json(res.config);
  rep.config["chains"] = res.chains;
  rep.trace = std::move(res.trace);
  rep.eval_mode = "cipher";
  for (auto id : shared_tokens(*a.vocab, *b.vocab, cfg.top_n)) {
    ++rep.eval.evaluated;
    const auto truth = pi[static_cast<std::size_t>(b.vocab->id(a.vocab->token(id)))];
    if (res.predictions.at(static_cast<std::size_t>(id)).predicted_id == truth) ++rep.eval.correct;
  }
  rep.eval.no_overlap = rep.eval.evaluated == 0;
  rep.eval.accuracy = rep.eval.no_overlap ? 0.0
                                          : static_cast<double>(rep.eval.correct) /
                                                static_cast<double>(rep.eval.evaluated);
  rep.vocab_source = a.vocab->size();
  rep.vocab_target = b.vocab->size();
  rep.bytes_source = ta.size();
  rep.bytes_target = tb.size();
  rep.rng_seed = seed;
  rep.predictions = std::move(res.predictions);
  rep.seconds = detail::seconds_since(t0);
  return rep;
}

/// Two corpora (e.g. two languages), the same byte budget taken from the
/// head of each, scored against a dictionary (or identity when none).
inline RunReport pair_bench(const std::filesystem::path& source, const std::filesystem::path& target,
                            const std::optional<std::filesystem::path>& dict_path,
                            std::uint64_t budget, bool dict_init, const BenchConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Preset preset = find_preset(cfg.preset);
  if (dict_init) preset.dict_init = true;
  std::optional<Dictionary> dict;
  if (dict_path) dict = load_dictionary(*dict_path);
  const auto ta = take_head_bytes(source, budget);
  const auto tb = take_head_bytes(target, budget);
  const auto a = prepare_side(ta, cfg.vocab_size, cfg.window);
  const auto b = prepare_side(tb, cfg.vocab_size, cfg.window);
  auto res = run_preset(preset, a, b, cfg.overrides, dict ? &*dict : nullptr);

  RunReport rep;
  rep.config = detail::bench_config_json(cfg, "pair", budget);
  rep.config["dict_init"] = dict_init;
  rep.config["align"] = align_config_json(res.config);
  rep.config["chains"] = res.chains;
  rep.trace = std::move(res.trace);
  if (dict) {
    rep.eval_mode = "dictionary";
    rep.eval = precision_at_1(res.predictions, *dict, *a.vocab, *b.vocab);
  } else {
    rep.eval_mode = "identity";
    rep.eval = identity_accuracy(res.predictions, *a.vocab, *b.vocab, cfg.top_n);
  }
  rep.vocab_source = a.vocab->size();
  rep.vocab_target = b.vocab->size();
  rep.bytes_source = ta.size();
  rep.bytes_target = tb.size();
  rep.predictions = std::move(res.predictions);
  rep.seconds = detail::seconds_since(t0);
  return rep;
}

struct SweepSpec {
  std::string mode = "identity";  // identity | cipher | pair
  std::filesystem::path source;
  std::optional<std::filesystem::path> target;
  std::optional<std::filesystem::path> dictionary;
  std::vector<std::uint64_t> budgets;
  std::vector<std::string> presets{"coocmap"};
  std::vector<Eigen::Index> dimensions;  // empty: full dimension only
  bool dict_init = false;
  int repetitions = 1;
  std::uint64_t rng_seed = 0;
  BenchConfig bench;

  void validate() const {
    if (mode != "identity" && mode != "cipher" && mode != "pair")
      throw ValidationError("sweep mode must be identity, cipher or pair");
    if (budgets.empty()) throw ValidationError("sweep needs at least one budget");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (budgets[i] == 0) throw ValidationError("budgets must be positive");
      if (i && budgets[i] <= budgets[i - 1]) throw ValidationError("budgets must be ascending");
    }
    if (presets.empty()) throw ValidationError("sweep needs at least one preset");
    for (const auto& p : presets) find_preset(p);
    for (auto d : dimensions)
      if (d < 1) throw ValidationError("dimensions must be >= 1");
    if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (mode == "pair" && !target) throw ValidationError("pair mode needs a target corpus");
    if (dict_init && !dictionary) throw ValidationError("dict-init needs a dictionary");
  }
};

inline SweepSpec parse_sweep_spec(const nlohmann::json& j) {
  SweepSpec s;
  try {
    s.mode = j.value("mode", s.mode);
    s.source = j.at("source").get<std::string>();
    if (j.contains("target")) s.target = j.at("target").get<std::string>();
    if (j.contains("dictionary")) s.dictionary = j.at("dictionary").get<std::string>();
    s.budgets = j.at("budgets").get<std::vector<std::uint64_t>>();
    s.presets = j.value("presets", s.presets);
    s.dimensions = j.value("dimensions", s.dimensions);
    s.dict_init = j.value("seed_mode", std::string("unsupervised")) == "dict-init";
    s.repetitions = j.value("repetitions", s.repetitions);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    s.bench.vocab_size = j.value("vocab_size", s.bench.vocab_size);
    s.bench.window = j.value("window", s.bench.window);
    s.bench.top_n = j.value("top_n", s.bench.top_n);
    s.bench.block_lines = j.value("block_lines", s.bench.block_lines);
    if (j.contains("csls_k")) s.bench.overrides.csls_k = j.at("csls_k").get<int>();
    if (j.contains("max_iters")) s.bench.overrides.max_iters = j.at("max_iters").get<int>();
    if (j.contains("tol")) s.bench.overrides.tol = j.at("tol").get<double>();
    const auto seed_mode = j.value("seed_mode", std::string("unsupervised"));
    if (seed_mode != "unsupervised" && seed_mode != "dict-init")
      throw ValidationError("seed_mode must be unsupervised or dict-init");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad sweep spec: ") + e.what());
  }
  s.validate();
  return s;
}

struct SweepPoint {
  std::uint64_t budget;
  std::string preset;
  std::optional<Eigen::Index> dimension;
  int repetition;
};

struct SweepRow {
  SweepPoint point;
  std::optional<RunReport> report;
  std::string error;
};

inline std::vector<SweepPoint> sweep_points(const SweepSpec& s) {
  std::vector<SweepPoint> pts;
  std::vector<std::optional<Eigen::Index>> dims;
  if (s.dimensions.empty()) dims.emplace_back();
  for (auto d : s.dimensions) dims.emplace_back(d);
  for (auto b : s.budgets)
    for (const auto& p : s.presets)
      for (const auto& d : dims)
        for (int r = 0; r < s.repetitions; ++r) pts.push_back({b, p, d, r});
  return pts;
}

inline RunReport run_sweep_point(const SweepSpec& s, const SweepPoint& pt) {
  BenchConfig cfg = s.bench;
  cfg.preset = pt.preset;
  if (pt.dimension) cfg.overrides.dim = *pt.dimension;
  if (s.mode == "identity") return split_identity_bench(s.source, pt.budget, cfg);
  if (s.mode == "cipher")
    return cipher_bench(s.source, pt.budget, s.rng_seed + static_cast<std::uint64_t>(pt.repetition), cfg);
  return pair_bench(s.source, *s.target, s.dictionary, pt.budget, s.dict_init, cfg);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

inline constexpr const char* kSweepCsvHeader =
    "budget_bytes,preset,dimension,accuracy,evaluated,seconds,error";

/// One CSV row per run in spec order. Without timing the seconds column is
/// left empty so identical specs give identical bytes.
inline std::string sweep_csv(const std::vector<SweepRow>& rows, bool timing) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.point.budget << ',' << csv_escape(r.point.preset) << ',';
    if (r.point.dimension) os << *r.point.dimension;
    os << ',';
    if (r.report) {
      os << nlohmann::json(r.report->eval.accuracy).dump() << ',' << r.report->eval.evaluated << ',';
      if (timing) os << nlohmann::json(r.report->seconds).dump();
    } else {
      os << ",,";
    }
    os << ',' << csv_escape(r.error) << '\n';
  }
  return os.str();
}

/// Runs every point, up to `workers` at a time; a failing point records its
/// error and the sweep continues. Rows come back in spec order.
inline std::vector<SweepRow> run_sweep(const SweepSpec& s, unsigned workers = 1) {
  s.validate();
  const auto pts = sweep_points(s);
  std::vector<SweepRow> rows(pts.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pts.size();) {
      rows[i].point = pts[i];
      try {
        rows[i].report = run_sweep_point(s, pts[i]);
        rows[i].report->predictions.clear();
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  workers = std::max(1u, workers);
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  return rows;
}

struct ThresholdSummary {
  std::string preset;
  std::optional<Eigen::Index> dimension;
  std::optional<std::uint64_t> starts;  // smallest budget with accuracy >= 5%
  std::optional<std::uint64_t> works;   // smallest budget with accuracy >= 50%
};

/// Per preset/dimension, the smallest budgets crossing the starts and works
/// accuracies (averaged over repetitions; failed runs are ignored).
inline std::vector<ThresholdSummary> threshold_budgets(const std::vector<SweepRow>& rows) {
  struct Acc {
    double sum = 0;
    int n = 0;
  };
  std::map<std::tuple<std::string, Eigen::Index, std::uint64_t>, Acc> mean;
  std::vector<std::pair<std::string, std::optional<Eigen::Index>>> keys;
  for (const auto& r : rows) {
    std::pair<std::string, std::optional<Eigen::Index>> key{r.point.preset, r.point.dimension};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    if (!r.report) continue;
    auto& a = mean[{r.point.preset, r.point.dimension.value_or(-1), r.point.budget}];
    a.sum += r.report->eval.accuracy;
    ++a.n;
  }
  std::vector<ThresholdSummary> out;
  for (const auto& [preset, dim] : keys) {
    ThresholdSummary t{preset, dim, std::nullopt, std::nullopt};
    for (const auto& [k, a] : mean) {
      if (std::get<0>(k) != preset || std::get<1>(k) != dim.value_or(-1)) continue;
      const double acc = a.sum / a.n;
      if (!t.starts && acc >= kStartsAccuracy) t.starts = std::get<2>(k);
      if (!t.works && acc >= kWorksAccuracy) t.works = std::get<2>(k);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace coocmap
