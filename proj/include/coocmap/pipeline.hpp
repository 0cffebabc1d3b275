#pragma once

// Named method presets and a single entry point that runs any of them on two
// prepared sides (counts + vocabulary, optionally imported vectors).

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coocmap/align.hpp"
#include "coocmap/assoc.hpp"
#include "coocmap/cooc.hpp"
#include "coocmap/eval.hpp"

namespace coocmap {

enum class AssocKind { coocmap, log1p, rapp, fung, ppmi, glove };
enum class Method { coocmap, vecmap };
enum class VectorSource { none, svd, imported };

struct Preset {
  std::string name;
  Method method = Method::coocmap;
  AssocKind assoc = AssocKind::coocmap;
  VectorSource vectors = VectorSource::none;
  Metric metric = Metric::cosine;
  std::optional<ClipParams> stage1_clip;
  std::optional<Stage2> stage2;
  std::optional<Eigen::Index> default_dim;
  bool dict_init = false;
  double ppmi_k = 1.0;
};

inline const std::map<std::string, Preset>& preset_registry() {
  static const std::map<std::string, Preset> registry = [] {
    std::map<std::string, Preset> r;
    auto add = [&](Preset p) { r.emplace(p.name, p); };
    const ClipParams c1{1.0, 99.0};
    const ClipParams c15{1.5, 98.5};

    add({.name = "coocmap"});
    add({.name = "coocmap-clip", .stage1_clip = c1});
    add({.name = "coocmap-drop", .stage1_clip = c1, .stage2 = Stage2{c1, 20}});
    add({.name = "coocmap-clip-1.5", .stage1_clip = c15});
    add({.name = "clip-1.5", .stage1_clip = c15});
    add({.name = "coocmap-drop-1.5", .stage1_clip = c15, .stage2 = Stage2{c15, 20}});
    add({.name = "dict-init", .dict_init = true});
    add({.name = "log1p", .assoc = AssocKind::log1p});
    add({.name = "rapp", .assoc = AssocKind::rapp, .metric = Metric::neg_l1});
    add({.name = "fung", .assoc = AssocKind::fung, .metric = Metric::neg_l1});
    add({.name = "ppmi", .assoc = AssocKind::ppmi, .metric = Metric::neg_l2});
    add({.name = "glove", .assoc = AssocKind::glove, .metric = Metric::neg_l2});
    add({.name = "vecmap-raw", .method = Method::vecmap, .vectors = VectorSource::svd,
         .default_dim = 300});
    add({.name = "vecmap-vectors", .method = Method::vecmap, .vectors = VectorSource::imported});
    add({.name = "coocmap-vectors", .vectors = VectorSource::imported});
    add({.name = "coocmap-vectors-clip", .vectors = VectorSource::imported, .stage1_clip = c1});
    return r;
  }();
  return registry;
}

inline const Preset& find_preset(const std::string& name) {
  const auto& reg = preset_registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw ValidationError("unknown preset: " + name);
  return it->second;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [n, _] : preset_registry()) names.push_back(n);
  return names;
}

inline AssocBuilder assoc_builder(const Preset& p) {
  switch (p.assoc) {
    case AssocKind::coocmap: return coocmap_assoc;
    case AssocKind::log1p: return log1p_assoc;
    case AssocKind::rapp: return rapp_assoc;
    case AssocKind::fung: return fung_assoc;
    case AssocKind::ppmi: return [k = p.ppmi_k](const CoocMatrix& c) { return ppmi_assoc(c, k); };
    case AssocKind::glove: return glove_assoc;
  }
  return coocmap_assoc;
}

/// Per-run overrides of preset parameters (unset fields keep the preset value).
struct Overrides {
  std::optional<int> csls_k;
  std::optional<int> max_iters;
  std::optional<double> tol;
  std::optional<Metric> metric;
  std::optional<ClipParams> clip;
  std::optional<Eigen::Index> drop_r;
  std::optional<Eigen::Index> dim;
};

/// Resolves preset + overrides into an AlignConfig. A dimension on coocmap
/// presets truncates the association; drop then follows min(20, 20 d / 400).
inline AlignConfig resolve_config(const Preset& p, const Overrides& o) {
  AlignConfig cfg;
  cfg.metric = p.metric;
  cfg.stage1_clip = p.stage1_clip;
  cfg.stage2 = p.stage2;
  if (o.csls_k) cfg.csls_k = *o.csls_k;
  if (o.max_iters) cfg.max_iters = *o.max_iters;
  if (o.tol) cfg.tol = *o.tol;
  if (o.metric) cfg.metric = *o.metric;
  if (o.clip) {
    if (cfg.stage1_clip) cfg.stage1_clip = o.clip;
    if (cfg.stage2 && cfg.stage2->clip) cfg.stage2->clip = o.clip;
  }
  if (p.method == Method::coocmap && p.vectors == VectorSource::none && o.dim) {
    cfg.trunc_dim = *o.dim;
    if (cfg.stage2) cfg.stage2->drop_r = drop_schedule(*o.dim);
  }
  if (o.drop_r && cfg.stage2) cfg.stage2->drop_r = *o.drop_r;
  cfg.validate();
  return cfg;
}

struct Side {
  CoocMatrix cooc;
  std::shared_ptr<const Vocabulary> vocab;
  std::optional<WordVectors> vectors;  // imported vectors, when the preset needs them
};

struct PipelineResult {
  MatchState state;
  Predictions predictions;
  RunTrace trace;
  AlignConfig config;
  std::vector<std::string> chains;  // source and target association chains
};

/// Runs `preset` from side1 to side2. `dict` is required by dict-init.
inline PipelineResult run_preset(const Preset& p, const Side& a, const Side& b, const Overrides& o,
                                 const Dictionary* dict = nullptr) {
  if (!a.vocab || !b.vocab) throw ValidationError("run_preset: missing vocabulary");
  PipelineResult res;
  res.config = resolve_config(p, o);
  const auto& cfg = res.config;

  std::optional<MatchState> seed;
  if (p.dict_init) {
    if (!dict) throw ValidationError("preset " + p.name + " requires a dictionary");
    seed = seed_from_dictionary(*dict, *a.vocab, *b.vocab);
  }

  if (p.method == Method::vecmap) {
    WordVectors xv, zv;
    if (p.vectors == VectorSource::svd) {
      const auto d = o.dim.value_or(p.default_dim.value_or(300));
      xv = svd_vectors(a.cooc, d);
      zv = svd_vectors(b.cooc, d);
      const auto common = std::min(xv.dim(), zv.dim());
      xv.data = xv.data.leftCols(common).eval();
      zv.data = zv.data.leftCols(common).eval();
    } else {
      if (!a.vectors || !b.vectors) throw ValidationError("preset " + p.name + " requires vectors");
      xv = *a.vectors;
      zv = *b.vectors;
    }
    auto run = run_vecmap(xv, zv, cfg, seed);
    res.predictions = translate_vectors(run.xv, run.zv, run.W, cfg, *a.vocab, *b.vocab);
    res.state = std::move(run.state);
    res.trace = std::move(run.trace);
    res.chains = {"vectors(" + std::to_string(xv.dim()) + ")", "vectors(" + std::to_string(zv.dim()) + ")"};
    return res;
  }

  if (p.vectors == VectorSource::imported) {
    if (!a.vectors || !b.vectors) throw ValidationError("preset " + p.name + " requires vectors");
    AssocMatrix x = assoc_from_vectors(*a.vectors);
    AssocMatrix z = assoc_from_vectors(*b.vectors);
    if (cfg.stage1_clip) {
      x = apply_pipeline(x, {Transform::clip(cfg.stage1_clip->p_lo, cfg.stage1_clip->p_hi)});
      z = apply_pipeline(z, {Transform::clip(cfg.stage1_clip->p_lo, cfg.stage1_clip->p_hi)});
    }
    MatchState init;
    if (seed) {
      init = *seed;
    } else {
      init = unsupervised_init(x, z, cfg);
      res.trace.push_back({"init", {init.objective}});
    }
    auto r = coocmap_selflearn(x, z, init, cfg);
    res.trace.push_back({"stage1", r.objectives});
    res.predictions = translate(x, z, r.state, cfg, *a.vocab, *b.vocab);
    res.state = std::move(r.state);
    res.chains = {chain_string(x.chain), chain_string(z.chain)};
    return res;
  }

  auto run = run_coocmap(a.cooc, b.cooc, cfg, seed, assoc_builder(p));
  res.predictions = translate(run.x, run.z, run.state, cfg, *a.vocab, *b.vocab);
  res.state = std::move(run.state);
  res.trace = std::move(run.trace);
  res.chains = {chain_string(run.x.chain), chain_string(run.z.chain)};
  return res;
}

}  // namespace coocmap
