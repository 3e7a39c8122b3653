#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "feffect/cli.hpp"
#include "feffect/corpus.hpp"

namespace fs = std::filesystem;
using feffect::cli::dispatch;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("feffect_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: gen ss writes a corpus with the requested meta") {
  TempDir tmp;
  const std::string out = tmp.file("c.jsonl");
  const int code = dispatch({"gen", "ss", "--tau", "0.5", "--eps", "0.05", "--n", "200",
                             "--seed", "0", "--out", out});
  CHECK(code == 0);
  const feffect::Corpus c = feffect::read_jsonl(out);
  CHECK(c.size() == 200);
  CHECK(*c.meta.true_tau == 0.5);
  CHECK(fs::exists(out + ".run_config.json"));
}

TEST_CASE("cli: estimate emits a csv with three method rows") {
  TempDir tmp;
  const std::string corpus = tmp.file("c.jsonl");
  REQUIRE(dispatch({"gen", "ss", "--tau", "0.3", "--eps", "0.1", "--n", "600", "--seed", "1",
                    "--out", corpus}) == 0);
  const int code =
      dispatch({"estimate", "--corpus", corpus, "--feature", "prefix:treated,untreated",
                "--seeds", "0,11,44", "--epochs", "4", "--out-dir", tmp.file("est")});
  CHECK(code == 0);
  const std::string csv = slurp(tmp.file("est/effects.csv"));
  CHECK(csv.find("direct") != std::string::npos);
  CHECK(csv.find("dr_propensity") != std::string::npos);
  CHECK(csv.find("dr_riesz") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
}

TEST_CASE("cli: unknown flags and commands exit 2") {
  CHECK(dispatch({"estimate", "--no-such-flag"}) == 2);
  CHECK(dispatch({"frobnicate"}) == 2);
  CHECK(dispatch({"gen", "unknown"}) == 2);
  CHECK(dispatch({}) == 2);
}

TEST_CASE("cli: missing input file exits 1") {
  TempDir tmp;
  CHECK(dispatch({"estimate", "--corpus", tmp.file("missing.jsonl"), "--out-dir",
                  tmp.file("x")}) == 1);
}

TEST_CASE("cli: train/eval round trip across the five modes") {
  TempDir tmp;
  const std::string corpus = tmp.file("c.jsonl");
  REQUIRE(dispatch({"gen", "ss", "--tau", "0.4", "--eps", "0.1", "--n", "800", "--seed", "2",
                    "--out", corpus}) == 0);
  for (const std::string mode : {"erm", "feag", "reg", "remove-token", "subsample"}) {
    const std::string dir = tmp.file("m_" + mode);
    const int code = dispatch({"train", "--mode", mode, "--corpus", corpus, "--epochs", "4",
                               "--seed", "0", "--tau-source", "manual:0.4", "--out-dir", dir});
    REQUIRE(code == 0);
    REQUIRE(fs::exists(dir + "/model.json"));
    const int eval_code = dispatch(
        {"eval", "--model", dir + "/model.json", "--corpus", corpus, "--out-dir", dir + "/ev"});
    CHECK(eval_code == 0);
    CHECK(fs::exists(dir + "/ev/metrics.json"));
    CHECK(fs::exists(dir + "/ev/metrics.csv"));
  }
  CHECK(fs::exists(tmp.file("m_feag/augmented.jsonl")));
}

TEST_CASE("cli: feag with estimated tau runs the two-phase pipeline") {
  TempDir tmp;
  const std::string corpus = tmp.file("c.jsonl");
  REQUIRE(dispatch({"gen", "ss", "--tau", "0.3", "--eps", "0.1", "--n", "600", "--seed", "3",
                    "--out", corpus}) == 0);
  const int code = dispatch({"train", "--mode", "feag", "--corpus", corpus, "--epochs", "4",
                             "--seed", "0", "--tau-source", "estimate", "--out-dir",
                             tmp.file("m")});
  CHECK(code == 0);
  CHECK(fs::exists(tmp.file("m/model.json")));
}

TEST_CASE("cli: bias-scan writes csv and json reports") {
  TempDir tmp;
  const std::string corpus = tmp.file("c.jsonl");
  REQUIRE(dispatch({"gen", "ss", "--tau", "0.3", "--eps", "0.1", "--n", "800", "--seed", "4",
                    "--effect-token", "boost", "--effect-delta", "0.2", "--out", corpus}) == 0);
  const int code = dispatch({"bias-scan", "--corpus", corpus, "--tokens", "boost,na",
                             "--seeds", "0", "--epochs", "4", "--out-dir", tmp.file("bs")});
  CHECK(code == 0);
  CHECK(fs::exists(tmp.file("bs/bias_report.csv")));
  CHECK(fs::exists(tmp.file("bs/bias_report.json")));
}

TEST_CASE("cli: sweep rerun from its emitted config is byte-identical") {
  TempDir tmp;
  const int code = dispatch({"sweep", "--taus", "0.3", "--eps", "0.1,0.2", "--seeds", "0,11",
                             "--n", "400", "--epochs", "3", "--out-dir", tmp.file("a")});
  REQUIRE(code == 0);
  const int code2 = dispatch({"sweep", "--config", tmp.file("a/run_config.json"), "--out-dir",
                              tmp.file("b")});
  REQUIRE(code2 == 0);
  CHECK(slurp(tmp.file("a/sweep_mae.csv")) == slurp(tmp.file("b/sweep_mae.csv")));
  CHECK(slurp(tmp.file("a/sweep_cells.csv")) == slurp(tmp.file("b/sweep_cells.csv")));
  CHECK(!slurp(tmp.file("a/sweep_mae.csv")).empty());
}

TEST_CASE("cli: estimate rerun from config matches, flags override config") {
  TempDir tmp;
  const std::string corpus = tmp.file("c.jsonl");
  REQUIRE(dispatch({"gen", "ss", "--tau", "0.3", "--eps", "0.1", "--n", "500", "--seed", "5",
                    "--out", corpus}) == 0);
  REQUIRE(dispatch({"estimate", "--corpus", corpus, "--seeds", "0,11", "--epochs", "3",
                    "--out-dir", tmp.file("a")}) == 0);
  REQUIRE(dispatch({"estimate", "--config", tmp.file("a/run_config.json"), "--out-dir",
                    tmp.file("b")}) == 0);
  CHECK(slurp(tmp.file("a/effects.csv")) == slurp(tmp.file("b/effects.csv")));
  // an explicit flag overrides the config value
  REQUIRE(dispatch({"estimate", "--config", tmp.file("a/run_config.json"), "--seeds", "44",
                    "--out-dir", tmp.file("d")}) == 0);
  CHECK(slurp(tmp.file("d/effects.csv")) != slurp(tmp.file("a/effects.csv")));
}
