#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dialret/config.h"
#include "dialret/dialogue.h"
#include "dialret/eval.h"
#include "dialret/rerank.h"
#include "dialret/retrieval.h"
#include "dialret/weaklabel.h"

using namespace dialret;
namespace fs = std::filesystem;

namespace {

const fs::path kData = DIALRET_TESTDATA;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

struct Result {
  int exit_code = -1;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    char tmpl[] = "/tmp/dialret-cli-XXXXXX";
    ASSERT_NE(mkdtemp(tmpl), nullptr);
    dir_ = tmpl;
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path tmp(const std::string& name) const { return dir_ / name; }

  // Runs the command line tool; stderr is captured, stdout goes to `out`.
  Result cli(const std::vector<std::string>& args, const std::string& out = "/dev/null",
             const std::string& env = "") {
    std::string cmd = env + " " + quote(DIALRET_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    const fs::path err = tmp("stderr.txt");
    cmd += " >" + quote(out) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
  }

  std::vector<std::string> corpus_flags() const {
    return {"--corpus", (kData / "corpus.jsonl").string(), "--stopwords",
            (kData / "stopwords.txt").string()};
  }

  std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) const {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }

  Corpus corpus() const {
    AnalyzerConfig a;
    a.stopwords = load_stopwords((kData / "stopwords.txt").string());
    return ingest_corpus((kData / "corpus.jsonl").string(), a);
  }

  fs::path dir_;
};

std::string run_bytes(const Run& run) {
  std::ostringstream out;
  write_run(out, run);
  return out.str();
}

}  // namespace

TEST_F(CliTest, ShippedDataIsReproducibleFromTheGenerator) {
  ASSERT_EQ(std::system((quote(DIALRET_MAKE_TESTDATA) + " " + quote(dir_.string())).c_str()), 0);
  for (const char* name : {"corpus.jsonl", "threads.jsonl", "train_threads.jsonl", "qrels.txt", "stopwords.txt"})
    EXPECT_TRUE(slurp(tmp(name)) == slurp(kData / name)) << name;
}

TEST_F(CliTest, DistillMatchesShippedDialogues) {
  const Result r = cli({"distill", "--threads", (kData / "threads.jsonl").string(), "--stopwords",
                        (kData / "stopwords.txt").string(), "--min-tokens", "1", "-o",
                        tmp("d.jsonl").string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(slurp(tmp("d.jsonl")) == slurp(kData / "dialogues.jsonl"));
  EXPECT_NE(r.err.find("kept=40"), std::string::npos) << r.err;
}

TEST_F(CliTest, RetrieveMatchesGoldenRunAndInProcessRanking) {
  const Result r = cli(with({"retrieve", "--dialogues", (kData / "dialogues.jsonl").string(), "-o",
                             tmp("init.txt").string()},
                            corpus_flags()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string bytes = slurp(tmp("init.txt"));
  EXPECT_TRUE(bytes == slurp(kData / "run.init.golden.txt"));

  const Corpus c = corpus();
  dialret::Run in_process;
  for (const auto& d : load_dialogues((kData / "dialogues.jsonl").string()))
    in_process[d.dialogue_id] = final_rank(d, InitialRankerParams{}, c);
  EXPECT_TRUE(run_bytes(in_process) == bytes);
}

TEST_F(CliTest, IndexFileGivesTheSameRun) {
  ASSERT_EQ(cli(with({"index", "-o", tmp("c.idx").string()}, corpus_flags())).exit_code, 0);
  const Result r = cli({"retrieve", "--index", tmp("c.idx").string(), "--dialogues",
                        (kData / "dialogues.jsonl").string(), "-o", tmp("init.txt").string()});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(slurp(tmp("init.txt")) == slurp(kData / "run.init.golden.txt"));
}

TEST_F(CliTest, PipelineThroughFilesMatchesInProcessAndGoldenReport) {
  const std::string dialogues = (kData / "dialogues.jsonl").string();
  const std::string init = (kData / "run.init.golden.txt").string();
  const Corpus c = corpus();
  const auto ds = load_dialogues(dialogues);
  const dialret::Run candidates = load_run(init);
  OverlapScorer scorer;

  std::vector<std::string> eval = {"evaluate", "--run", "init=" + init};
  for (const std::string method : {"lm", "bm25", "extfuse"}) {
    const fs::path out = tmp(method + ".txt");
    const Result r = cli(with({"rerank", "--method", method, "--dialogues", dialogues, "--run", init,
                               "-o", out.string()},
                              corpus_flags()));
    ASSERT_EQ(r.exit_code, 0) << method << ": " << r.err;
    dialret::Run expected;
    for (const auto& d : ds) {
      const RankedList& cand = candidates.at(d.dialogue_id);
      const std::string& last = d.turns.back().text;
      if (method == "lm") expected[d.dialogue_id] = rerank_lm(last, cand, 1000, c);
      if (method == "bm25") expected[d.dialogue_id] = rerank_bm25(last, cand, {}, c);
      if (method == "extfuse") expected[d.dialogue_id] = ext_fuse(d.turns, cand, scorer, {}, c);
    }
    EXPECT_TRUE(run_bytes(expected) == slurp(out)) << method;
    eval.insert(eval.end(), {"--run", method + "=" + out.string()});
  }
  eval.insert(eval.end(), {"--qrels", (kData / "qrels.txt").string(), "--dialogues", dialogues,
                           "--by-type", "-o", tmp("report.txt").string()});
  const Result r = cli(eval);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(slurp(tmp("report.txt")), slurp(kData / "evaluate.golden.txt"));
}

TEST_F(CliTest, ExternalScorerProcessMatchesBuiltin) {
  const std::string dialogues = (kData / "dialogues.jsonl").string();
  const std::string init = (kData / "run.init.golden.txt").string();
  auto rerank = [&](const std::string& scorer, const std::string& out) {
    return cli(with({"rerank", "--method", "extfuse", "--dialogues", dialogues, "--run", init, "--scorer",
                     scorer, "-o", tmp(out).string()},
                    corpus_flags()));
  };
  ASSERT_EQ(rerank("builtin:overlap", "a.txt").exit_code, 0);
  const Result r = rerank(std::string(DIALRET_STUB) + " --reverse", "b.txt");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(slurp(tmp("a.txt")) == slurp(tmp("b.txt")));

  const Result broken = rerank(std::string(DIALRET_STUB) + " --fault drop-id", "c.txt");
  EXPECT_NE(broken.exit_code, 0);
  EXPECT_NE(broken.err.find("no response for request"), std::string::npos) << broken.err;

  const Result weak = cli(with({"weaklabel", "--threads", (kData / "train_threads.jsonl").string(),
                                "--scorer", std::string(DIALRET_STUB) + " --fault bad-json", "-o",
                                tmp("t.jsonl").string()},
                               corpus_flags()));
  EXPECT_NE(weak.exit_code, 0);
  EXPECT_NE(weak.err.find("malformed response line"), std::string::npos) << weak.err;
}

TEST_F(CliTest, WeaklabelMatchesGoldenAndInProcess) {
  const Result r = cli(with({"weaklabel", "--threads", (kData / "train_threads.jsonl").string(), "-o",
                             tmp("train.jsonl").string()},
                            corpus_flags()));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const std::string bytes = slurp(tmp("train.jsonl"));
  EXPECT_TRUE(bytes == slurp(kData / "training.golden.jsonl"));

  OverlapScorer scorer;
  HashingEmbedder embedder(64);
  const auto threads = load_threads((kData / "train_threads.jsonl").string());
  const TrainingSet set = build_training_set(threads, corpus(), scorer, embedder, Config().weak_label());
  std::string lines;
  for (const auto& rec : set.records) lines += training_record_to_json_line(rec) + "\n";
  EXPECT_TRUE(lines == bytes);
}

TEST_F(CliTest, MissingCorpusNamesTheFlag) {
  const Result r = cli({"retrieve", "--dialogues", (kData / "dialogues.jsonl").string(), "-o",
                        tmp("x.txt").string()});
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("--index or --corpus is required"), std::string::npos) << r.err;

  const Result bad = cli({"retrieve", "--corpus", "/no/such/corpus.jsonl", "--dialogues",
                          (kData / "dialogues.jsonl").string(), "-o", tmp("x.txt").string()});
  EXPECT_NE(bad.exit_code, 0);
  EXPECT_NE(bad.err.find("--corpus"), std::string::npos) << bad.err;
}

TEST_F(CliTest, ConfigPrecedenceFlagOverSetOverFileOverDefault) {
  {
    std::ofstream cfg(tmp("run.cfg"));
    cfg << "mu = 2000\nbeta = 0.5\n";
  }
  auto resolved = [&](std::vector<std::string> global, std::vector<std::string> local = {},
                      const std::string& env = "") {
    std::vector<std::string> args = with({"--log-level", "info"}, global);
    args = with(args, {"retrieve", "--dialogues", (kData / "dialogues.jsonl").string(), "-o",
                       tmp("x.txt").string()});
    const Result r = cli(with(with(args, local), corpus_flags()), "/dev/null", env);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    return r.err;
  };
  auto has = [](const std::string& log, const std::string& line) {
    return log.find("\n" + line + "\n") != std::string::npos;
  };
  const std::string cfg = tmp("run.cfg").string();
  EXPECT_TRUE(has(resolved({}), "mu=1000"));
  const std::string from_file = resolved({"--config", cfg});
  EXPECT_TRUE(has(from_file, "mu=2000"));
  EXPECT_TRUE(has(from_file, "beta=0.5"));
  EXPECT_NE(from_file.find("resolved config from " + cfg), std::string::npos);
  EXPECT_TRUE(has(resolved({"--config", cfg, "--set", "mu=1500"}), "mu=1500"));
  const std::string flagged = resolved({"--config", cfg, "--set", "mu=1500"}, {"--mu", "1200"});
  EXPECT_TRUE(has(flagged, "mu=1200"));
  EXPECT_TRUE(has(flagged, "beta=0.5"));
  EXPECT_TRUE(has(resolved({}, {}, std::string(kConfigEnv) + "=" + quote(cfg)), "mu=2000"));
  // An explicit --config wins over the environment.
  {
    std::ofstream other(tmp("other.cfg"));
    other << "mu = 3000\n";
  }
  EXPECT_TRUE(has(resolved({"--config", tmp("other.cfg").string()}, {},
                           std::string(kConfigEnv) + "=" + quote(cfg)),
                  "mu=3000"));
}

TEST_F(CliTest, BadConfigReportsSourceAndLine) {
  {
    std::ofstream cfg(tmp("bad.cfg"));
    cfg << "# fine\nmu = lots\n";
  }
  const Result r = cli(with({"--config", tmp("bad.cfg").string(), "retrieve", "--dialogues",
                             (kData / "dialogues.jsonl").string(), "-o", tmp("x.txt").string()},
                            corpus_flags()));
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("bad.cfg:2: config key 'mu': not a number: 'lots'"), std::string::npos) << r.err;

  const Result unknown = cli(with({"--set", "nope=1", "retrieve", "--dialogues",
                                   (kData / "dialogues.jsonl").string()},
                                  corpus_flags()));
  EXPECT_NE(unknown.exit_code, 0);
  EXPECT_NE(unknown.err.find("unknown config key: 'nope'"), std::string::npos) << unknown.err;
}
