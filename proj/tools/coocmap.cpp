// coocmap command-line tool: count, induce, eval, bench, sweep.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coocmap/coocmap.hpp"

namespace fs = std::filesystem;
using namespace coocmap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat "key = value" lines; "#" starts a comment line.
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  const auto text = read_file(path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::size_t start = 0, lineno = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    ++lineno;
    auto line = trim(text.substr(start, nl - start));
    start = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), lineno, "expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789-_") != std::string::npos)
      throw ParseError(path.string(), lineno, "bad key '" + key + "'");
    std::replace(key.begin(), key.end(), '_', '-');
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

/// Expands --config FILE into explicit flags appended after the command line,
/// skipping keys the command line already sets. Unknown keys then surface as
/// unknown flags.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> cfg;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
  }
  if (!cfg) return args;
  auto given = [&](const std::string& key) {
    const auto flag = "--" + key;
    for (std::size_t i = 1; i < args.size(); ++i)
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config_file(*cfg)) {
    if (key == "config") throw ParseError(*cfg, 0, "config files cannot include other config files");
    if (given(key)) continue;
    if (value == "true") {
      extra.push_back("--" + key);
    } else if (value != "false") {
      extra.push_back("--" + key + "=" + value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::optional<unsigned> thread_cap() {
  const char* env = std::getenv("COOCMAP_THREADS");
  if (!env || !*env) return std::nullopt;
  try {
    const long n = std::stol(env);
    if (n < 1) throw std::invalid_argument("");
    return static_cast<unsigned>(n);
  } catch (const std::exception&) {
    throw UsageError(std::string("COOCMAP_THREADS must be a positive integer, got '") + env + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

fs::path vocab_path(const fs::path& cooc) { return fs::path(cooc.string() + ".vocab"); }

struct OverrideFlags {
  std::optional<int> csls_k, max_iters;
  std::optional<double> tol;
  std::optional<std::string> metric;
  std::vector<double> clip;
  std::optional<Eigen::Index> drop_r, dim;

  void add(CLI::App* app) {
    app->add_option("--csls-k", csls_k, "CSLS neighborhood size");
    app->add_option("--max-iters", max_iters, "Self-learning iteration cap per stage");
    app->add_option("--tol", tol, "Minimum objective improvement to continue");
    app->add_option("--metric", metric, "cosine | dot | neg_l2 | neg_l1");
    app->add_option("--clip", clip, "Clip percentiles LO,HI (presets that clip)")
        ->expected(2)
        ->delimiter(',');
    app->add_option("--drop-r", drop_r, "Singular directions removed in stage 2");
    app->add_option("--dim", dim, "Truncation dimension / vector dimension");
  }

  Overrides resolve() const {
    Overrides o;
    o.csls_k = csls_k;
    o.max_iters = max_iters;
    o.tol = tol;
    if (metric) o.metric = parse_metric(*metric);
    if (!clip.empty()) o.clip = ClipParams{clip.at(0), clip.at(1)};
    o.drop_r = drop_r;
    o.dim = dim;
    return o;
  }
};

int cmd_count(const fs::path& input, std::uint64_t bytes, std::size_t vocab_size, int window,
              const fs::path& out) {
  const auto text = bytes ? take_head_bytes(input, bytes) : read_file(input);
  const auto lines = tokenize(text);
  TokenCounts counts;
  counts.add(lines);
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(counts, vocab_size));
  const auto corpus = encode(lines, vocab);
  const auto shards = thread_cap().value_or(1);
  const auto cooc = shards > 1 ? count_cooc_sharded(corpus, window, shards) : count_cooc(corpus, window);
  save_cooc(cooc, out);
  vocab->save(vocab_path(out));
  std::cout << "tokens " << counts.total() << "\n"
            << "types " << counts.distinct() << "\n"
            << "vocab " << vocab->size() << "\n";
  return kExitOk;
}

struct InduceArgs {
  fs::path cooc1, cooc2, out_report, out_preds;
  std::string preset;
  std::optional<fs::path> dict, vectors1, vectors2;
  bool no_timing = false;
  OverrideFlags ov;
};

int cmd_induce(const InduceArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& preset = find_preset(a.preset);
  auto load_side = [](const fs::path& cooc, const std::optional<fs::path>& vec) {
    auto vocab = std::make_shared<const Vocabulary>(Vocabulary::load(vocab_path(cooc)));
    Side s{load_cooc(cooc, vocab.get()), vocab, std::nullopt};
    if (vec) {
      auto lv = load_vectors(*vec, *vocab);
      if (!lv.missing.empty())
        std::cerr << "warning: " << lv.missing.size() << " vocabulary words have no vector in " << *vec
                  << "; using zero rows\n";
      s.vectors = std::move(lv.vectors);
    }
    return s;
  };
  if (a.vectors1.has_value() != a.vectors2.has_value())
    throw ValidationError("--vectors1 and --vectors2 must be given together");
  const auto s1 = load_side(a.cooc1, a.vectors1);
  const auto s2 = load_side(a.cooc2, a.vectors2);
  std::optional<Dictionary> dict;
  if (a.dict) dict = load_dictionary(*a.dict);
  const auto overrides = a.ov.resolve();
  auto res = run_preset(preset, s1, s2, overrides, dict ? &*dict : nullptr);

  RunReport rep;
  rep.config = {{"command", "induce"},
                {"preset", a.preset},
                {"cooc1", a.cooc1.string()},
                {"cooc2", a.cooc2.string()},
                {"dict", a.dict ? nlohmann::json(a.dict->string()) : nlohmann::json(nullptr)},
                {"vectors1", a.vectors1 ? nlohmann::json(a.vectors1->string()) : nlohmann::json(nullptr)},
                {"vectors2", a.vectors2 ? nlohmann::json(a.vectors2->string()) : nlohmann::json(nullptr)},
                {"window", {s1.cooc.window, s2.cooc.window}},
                {"overrides", overrides_json(overrides)},
                {"align", align_config_json(res.config)},
                {"chains", res.chains}};
  rep.trace = res.trace;
  std::vector<std::optional<bool>> marks;
  if (dict) {
    rep.eval_mode = "dictionary";
    rep.eval = precision_at_1(res.predictions, *dict, *s1.vocab, *s2.vocab);
    marks = judge(res.predictions, *dict, *s2.vocab);
  } else {
    rep.eval_mode = "identity";
    rep.eval = identity_accuracy(res.predictions, *s1.vocab, *s2.vocab);
    marks = judge_identity(res.predictions, *s2.vocab);
  }
  rep.vocab_source = s1.vocab->size();
  rep.vocab_target = s2.vocab->size();
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto j = rep.to_json(!a.no_timing);
  j.erase("data_bytes");
  j["token_counts"] = {s1.cooc.token_count, s2.cooc.token_count};
  write_text(a.out_report, j.dump(2) + "\n");
  save_predictions(a.out_preds, res.predictions, marks);
  std::cout << "accuracy " << rep.eval.accuracy << "\nevaluated " << rep.eval.evaluated << "\ncorrect "
            << rep.eval.correct << "\n";
  return kExitOk;
}

int cmd_eval(const fs::path& preds_path, const fs::path& dict_path, const fs::path& v1p,
             const fs::path& v2p) {
  const auto preds = load_predictions(preds_path);
  const auto dict = load_dictionary(dict_path);
  const auto v1 = Vocabulary::load(v1p);
  const auto v2 = Vocabulary::load(v2p);
  const auto r = precision_at_1(preds, dict, v1, v2);
  std::cout << "accuracy " << r.accuracy << "\nevaluated " << r.evaluated << "\ncorrect " << r.correct
            << "\n";
  if (r.no_overlap) std::cerr << "warning: no dictionary entry is evaluable\n";
  return kExitOk;
}

struct BenchArgs {
  fs::path corpus;
  std::uint64_t budget = 0;
  std::string mode = "identity";
  std::uint64_t seed = 0;
  BenchConfig cfg;
  std::optional<fs::path> out_report, out_preds;
  bool no_timing = false;
  OverrideFlags ov;
};

int cmd_bench(BenchArgs a) {
  a.cfg.overrides = a.ov.resolve();
  RunReport rep;
  if (a.mode == "identity") rep = split_identity_bench(a.corpus, a.budget, a.cfg);
  else if (a.mode == "cipher") rep = cipher_bench(a.corpus, a.budget, a.seed, a.cfg);
  else throw ValidationError("--mode must be identity or cipher");
  if (a.out_report) write_text(*a.out_report, rep.to_json(!a.no_timing).dump(2) + "\n");
  if (a.out_preds) save_predictions(*a.out_preds, rep.predictions, {});
  std::cout << "accuracy " << rep.eval.accuracy << "\nevaluated " << rep.eval.evaluated << "\ncorrect "
            << rep.eval.correct << "\n";
  if (!a.no_timing) std::cout << "seconds " << rep.seconds << "\n";
  return kExitOk;
}

int cmd_sweep(const fs::path& spec_path, const fs::path& out_csv, unsigned workers, bool no_timing,
              const std::optional<fs::path>& report_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(spec_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(spec_path.string(), 0, e.what());
  }
  const auto spec = parse_sweep_spec(j);
  const auto rows = run_sweep(spec, std::min(workers, thread_cap().value_or(workers)));
  write_text(out_csv, sweep_csv(rows, !no_timing));
  if (report_dir) {
    fs::create_directories(*report_dir);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].report) continue;
      char name[32];
      std::snprintf(name, sizeof name, "run_%04zu.json", i);
      write_text(*report_dir / name, rows[i].report->to_json(!no_timing).dump(2) + "\n");
    }
  }
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.report ? 0 : 1;
  for (const auto& t : threshold_budgets(rows)) {
    std::cout << t.preset;
    if (t.dimension) std::cout << " dim=" << *t.dimension;
    std::cout << " starts=" << (t.starts ? std::to_string(*t.starts) : "none")
              << " works=" << (t.works ? std::to_string(*t.works) : "none") << "\n";
  }
  std::cout << rows.size() << " runs, " << failed << " failed\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Unsupervised word translation from co-occurrence counts"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_unused;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_unused, "key = value file; explicit flags win");
  };

  auto* count = app.add_subcommand("count", "Count co-occurrences of a text file");
  fs::path c_input, c_out;
  std::uint64_t c_bytes = 0;
  std::size_t c_vocab = kDefaultVocabSize;
  int c_window = 5;
  count->add_option("--input", c_input, "Plain-text corpus")->required();
  count->add_option("--bytes", c_bytes, "Use only the first N bytes (0: whole file)");
  count->add_option("--vocab-size", c_vocab, "Vocabulary size including the unknown token")->check(CLI::PositiveNumber);
  count->add_option("--window", c_window, "Window size m")->check(CLI::PositiveNumber);
  count->add_option("--out", c_out, "Output matrix path; vocabulary goes to PATH.vocab")->required();
  add_config(count);

  auto* induce = app.add_subcommand("induce", "Induce a translation between two count matrices");
  InduceArgs ia;
  induce->add_option("--cooc1", ia.cooc1, "Source counts")->required();
  induce->add_option("--cooc2", ia.cooc2, "Target counts")->required();
  induce->add_option("--preset", ia.preset, "Method preset")->required();
  induce->add_option("--dict", ia.dict, "Evaluation / seed dictionary");
  induce->add_option("--vectors1", ia.vectors1, "Source word vectors (text format)");
  induce->add_option("--vectors2", ia.vectors2, "Target word vectors (text format)");
  induce->add_option("--out-report", ia.out_report, "RunReport JSON")->required();
  induce->add_option("--out-preds", ia.out_preds, "Predictions dump")->required();
  induce->add_flag("--no-timing", ia.no_timing, "Omit wall-clock fields");
  ia.ov.add(induce);
  add_config(induce);

  auto* eval = app.add_subcommand("eval", "Score a predictions dump against a dictionary");
  fs::path e_preds, e_dict, e_v1, e_v2;
  eval->add_option("--preds", e_preds)->required();
  eval->add_option("--dict", e_dict)->required();
  eval->add_option("--vocab1", e_v1)->required();
  eval->add_option("--vocab2", e_v2)->required();
  add_config(eval);

  auto* bench = app.add_subcommand("bench", "Split a corpus in two and match the halves");
  BenchArgs ba;
  bench->add_option("--corpus", ba.corpus)->required();
  bench->add_option("--budget", ba.budget, "Bytes taken from the head of the corpus")->required()->check(CLI::PositiveNumber);
  bench->add_option("--mode", ba.mode, "identity | cipher")->check(CLI::IsMember({"identity", "cipher"}));
  bench->add_option("--seed", ba.seed, "Permutation seed (cipher)");
  bench->add_option("--preset", ba.cfg.preset, "Method preset");
  bench->add_option("--vocab-size", ba.cfg.vocab_size)->check(CLI::PositiveNumber);
  bench->add_option("--window", ba.cfg.window)->check(CLI::PositiveNumber);
  bench->add_option("--top-n", ba.cfg.top_n, "Shared tokens evaluated");
  bench->add_option("--block-lines", ba.cfg.block_lines, "Lines per alternating split block")->check(CLI::PositiveNumber);
  bench->add_option("--out-report", ba.out_report);
  bench->add_option("--out-preds", ba.out_preds);
  bench->add_flag("--no-timing", ba.no_timing);
  ba.ov.add(bench);
  add_config(bench);

  auto* sweep = app.add_subcommand("sweep", "Run a grid of benchmarks from a JSON spec");
  fs::path s_spec, s_csv;
  unsigned s_workers = 1;
  bool s_no_timing = false;
  std::optional<fs::path> s_reports;
  sweep->add_option("--spec", s_spec)->required();
  sweep->add_option("--out-csv", s_csv)->required();
  sweep->add_option("--workers", s_workers)->check(CLI::PositiveNumber);
  sweep->add_option("--report-dir", s_reports, "Write one RunReport JSON per run here");
  sweep->add_flag("--no-timing", s_no_timing, "Leave the seconds column empty");
  add_config(sweep);

  std::vector<std::string> args(argv, argv + argc);
  args = expand_config(std::move(args));
  std::vector<const char*> cargs;
  for (const auto& s : args) cargs.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (const auto n = thread_cap()) Eigen::setNbThreads(static_cast<int>(*n));
  if (*count) return cmd_count(c_input, c_bytes, c_vocab, c_window, c_out);
  if (*induce) return cmd_induce(ia);
  if (*eval) return cmd_eval(e_preds, e_dict, e_v1, e_v2);
  if (*bench) return cmd_bench(ba);
  return cmd_sweep(s_spec, s_csv, s_workers, s_no_timing, s_reports);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
