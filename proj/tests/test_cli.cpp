#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "coocmap/cooc.hpp"
#include "oracles.hpp"

using namespace coocmap;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(COOCMAP_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  Result r{-1, {}};
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path dir() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / "coocmap_cli_test";
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string path(const std::string& name) { return (dir() / name).string(); }

fs::path write(const std::string& name, const std::string& content) {
  std::ofstream(dir() / name, std::ios::binary) << content;
  return dir() / name;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string& markov() {
  static const std::string p = write("markov.txt", oracle::synthetic_text(60, 3000, 61)).string();
  return p;
}

}  // namespace

TEST(CliCount, ThreeTokenCorpus) {
  write("aba.txt", "a b a\n");
  const auto r = run("count --input " + path("aba.txt") + " --vocab-size 3 --window 1 --out " + path("aba.cooc"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "tokens 3\ntypes 2\nvocab 3\n");
  const auto v = Vocabulary::load(path("aba.cooc.vocab"));
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"[UNK]", "a", "b"}));
  const auto c = load_cooc(path("aba.cooc"), &v);
  EXPECT_EQ(c.counts, (DenseMatrix{{0, 0, 0}, {0, 0, 2}, {0, 2, 0}}));
}

TEST(CliInduce, IdenticalCountsGiveFullAccuracy) {
  ASSERT_EQ(run("count --input " + markov() + " --vocab-size 80 --window 3 --out " + path("m.cooc")).code, 0);
  const auto r = run("induce --cooc1 " + path("m.cooc") + " --cooc2 " + path("m.cooc") +
                     " --preset coocmap --out-report " + path("m.json") + " --out-preds " + path("m.tsv"));
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(slurp(path("m.json")));
  EXPECT_EQ(j["accuracy"], 1.0);
  EXPECT_EQ(j["config"]["preset"], "coocmap");
  EXPECT_TRUE(j.contains("volatile"));
  EXPECT_EQ(r.out.substr(0, 11), "accuracy 1\n");
}

TEST(CliInduce, ByteIdenticalOutputsWithoutTiming) {
  ASSERT_EQ(run("count --input " + markov() + " --vocab-size 80 --window 3 --out " + path("d.cooc")).code, 0);
  std::string reports[2], preds[2];
  for (int k = 0; k < 2; ++k) {
    const auto tag = std::to_string(k);
    ASSERT_EQ(run("induce --cooc1 " + path("d.cooc") + " --cooc2 " + path("d.cooc") +
                  " --preset coocmap-clip --no-timing --out-report " + path("d" + tag + ".json") +
                  " --out-preds " + path("d" + tag + ".tsv"))
                  .code,
              0);
    reports[k] = slurp(path("d" + tag + ".json"));
    preds[k] = slurp(path("d" + tag + ".tsv"));
  }
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(preds[0], preds[1]);
  EXPECT_EQ(reports[0].find("volatile"), std::string::npos);
}

TEST(CliEval, HandWrittenPredictions) {
  write("p.tsv", "1\ta\tx\t-\n2\tb\ty\t-\n3\tc\tx\t-\n");
  write("p.dict", "a x\nb y\nc y\n");
  write("v1.vocab", "[UNK]\na\nb\nc\n");
  write("v2.vocab", "[UNK]\nx\ny\n");
  const auto r = run("eval --preds " + path("p.tsv") + " --dict " + path("p.dict") + " --vocab1 " +
                     path("v1.vocab") + " --vocab2 " + path("v2.vocab"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("evaluated 3\ncorrect 2"), std::string::npos);
  EXPECT_EQ(r.out.substr(0, 14), "accuracy 0.666");
}

TEST(CliExitCodes, UsageInputAndSuccess) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("count --input " + markov()).code, 1);
  EXPECT_EQ(run("count --input " + markov() + " --out x --bogus 1").code, 1);
  EXPECT_EQ(run("count --input /nonexistent/file.txt --out " + path("x.cooc")).code, 2);
  write("garbage.cooc", "not a matrix");
  write("garbage.cooc.vocab", "[UNK]\na\n");
  EXPECT_EQ(run("induce --cooc1 " + path("garbage.cooc") + " --cooc2 " + path("garbage.cooc") +
                " --preset coocmap --out-report " + path("g.json") + " --out-preds " + path("g.tsv"))
                .code,
            2);
  ASSERT_EQ(run("count --input " + markov() + " --vocab-size 80 --window 3 --out " + path("e.cooc")).code, 0);
  EXPECT_EQ(run("induce --cooc1 " + path("e.cooc") + " --cooc2 " + path("e.cooc") +
                " --preset nosuch --out-report " + path("g.json") + " --out-preds " + path("g.tsv"))
                .code,
            2);
  EXPECT_EQ(run("induce --cooc1 " + path("e.cooc") + " --cooc2 " + path("e.cooc") +
                " --preset dict-init --out-report " + path("g.json") + " --out-preds " + path("g.tsv"))
                .code,
            2);
  EXPECT_EQ(run("count --help").code, 0);
}

TEST(CliConfig, FileFillsUnsetFlagsAndFlagsWin) {
  write("c.conf", "# counting setup\nvocab_size = 3\nwindow = 4\nout = " + path("cfg.cooc") + "\n");
  write("aba2.txt", "a b a\n");
  auto r = run("count --config " + path("c.conf") + " --input " + path("aba2.txt") + " --window 1");
  ASSERT_EQ(r.code, 0);
  auto v = Vocabulary::load(path("cfg.cooc.vocab"));
  EXPECT_EQ(load_cooc(path("cfg.cooc"), &v).window, 1);
  EXPECT_EQ(v.size(), 3u);
  write("bad.conf", "no_such_key = 1\n");
  EXPECT_EQ(run("count --config " + path("bad.conf") + " --input " + path("aba2.txt") + " --out " + path("b.cooc")).code,
            1);
  write("broken.conf", "just words\n");
  EXPECT_EQ(run("count --config " + path("broken.conf") + " --input " + path("aba2.txt") + " --out " + path("b.cooc")).code,
            2);
}

TEST(CliBenchAndSweep, ReproducibleOutputs) {
  const auto bench = "bench --corpus " + markov() + " --budget 100000 --vocab-size 80 --window 3 --top-n 40 "
                     "--block-lines 100 --no-timing --out-report ";
  ASSERT_EQ(run(bench + path("b0.json")).code, 0);
  ASSERT_EQ(run(bench + path("b1.json")).code, 0);
  EXPECT_EQ(slurp(path("b0.json")), slurp(path("b1.json")));
  const auto cipher = run("bench --corpus " + markov() +
                          " --budget 100000 --mode cipher --seed 7 --vocab-size 80 --window 3 --block-lines 100 "
                          "--no-timing --out-report " + path("c.json"));
  ASSERT_EQ(cipher.code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("c.json")))["rng_seed"], 7);

  write("spec.json", R"({"source":")" + markov() +
                         R"(","budgets":[50000,100000],"presets":["coocmap","log1p"],"vocab_size":80,"window":3,"block_lines":100})");
  for (const char* w : {"1", "2"}) {
    ASSERT_EQ(run("sweep --spec " + path("spec.json") + " --no-timing --workers " + w + " --out-csv " +
                  path(std::string("s") + w + ".csv"))
                  .code,
              0);
  }
  const auto csv = slurp(path("s1.csv"));
  EXPECT_EQ(csv, slurp(path("s2.csv")));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "budget_bytes,preset,dimension,accuracy,evaluated,seconds,error");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  write("badspec.json", R"({"source":"x","budgets":[2,1]})");
  EXPECT_EQ(run("sweep --spec " + path("badspec.json") + " --out-csv " + path("bad.csv")).code, 2);
}
