#include <gtest/gtest.h>

#include <sstream>

#include "dialret/config.h"
#include "dialret/error.h"

using namespace dialret;

namespace {

std::string apply_error(const std::string& text) {
  Config c;
  std::istringstream in(text);
  try {
    apply_config(in, c, "run.cfg");
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const Config c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.get("mu"), "1000");
  EXPECT_EQ(c.get("beta"), "0.3");
  EXPECT_EQ(c.get("gamma"), "0.75");
  EXPECT_EQ(c.get("delta"), "0.01");
  EXPECT_EQ(c.get("bm25.k1"), "1.2");
  EXPECT_EQ(c.get("rrf.nu"), "60");
  EXPECT_EQ(c.get("weak.lambda"), "0.3");
  EXPECT_EQ(c.get("weak.m_future"), "4");
  EXPECT_EQ(c.get("weak.label_k"), "3");
  EXPECT_EQ(c.get("eval.splits"), "50");
  EXPECT_EQ(c.get("eval.permutations"), "10000");
  EXPECT_EQ(c.get("scorer.max_query_tokens"), "64");
  EXPECT_EQ(c.get("scorer.max_text_tokens"), "112");
}

TEST(Config, EveryKeyRoundTripsThroughGetAndSet) {
  const Config original;
  Config copy;
  for (const auto& key : Config::keys()) {
    EXPECT_NO_THROW(copy.set(key, original.get(key))) << key;
    EXPECT_EQ(copy.get(key), original.get(key)) << key;
  }
  EXPECT_EQ(copy.resolved(), original.resolved());
}

TEST(Config, FileThenOverridesWin) {
  Config c;
  std::istringstream file("# tuned\nmu = 2000\n\nbm25.b=0.5\nstemmer = none\n");
  apply_config(file, c, "f.cfg");
  EXPECT_EQ(c.ranker.mu, 2000.0);
  EXPECT_EQ(c.bm25.b, 0.5);
  EXPECT_EQ(c.stemmer, StemmerKind::none);
  EXPECT_EQ(c.ranker.beta, 0.3);  // untouched default
  c.set("mu", "1500");
  EXPECT_EQ(c.ranker.mu, 1500.0);
  EXPECT_EQ(c.bm25.b, 0.5);
}

TEST(Config, ErrorsNameSourceLineAndKey) {
  EXPECT_EQ(apply_error("mu=1\nnot_a_key = 3\n"), "run.cfg:2: unknown config key: 'not_a_key'");
  EXPECT_EQ(apply_error("\n\nmu = abc\n"), "run.cfg:3: config key 'mu': not a number: 'abc'");
  EXPECT_EQ(apply_error("k_docs = 1.5"), "run.cfg:1: config key 'k_docs': not an integer: '1.5'");
  EXPECT_EQ(apply_error("just words"), "run.cfg:1: expected key=value");
  EXPECT_NE(apply_error("stemmer = porter").find("run.cfg:1:"), std::string::npos);
  EXPECT_NE(apply_error("weak.idf = corpus").find("expected sentence or document"), std::string::npos);
  EXPECT_EQ(apply_error("# only a comment\n   \n"), "");
  Config c;
  EXPECT_THROW(apply_config_file("/no/such/config", c), Error);
}

TEST(Config, ValidationRejectsOutOfRangeValues) {
  const std::pair<const char*, const char*> bad[] = {
      {"beta", "1.5"},        {"gamma", "-0.1"},          {"mu", "-1"},
      {"bm25.b", "2"},        {"rrf.nu", "0"},            {"weak.lambda", "1.1"},
      {"weak.m_future", "0"}, {"weak.label_k", "0"},      {"eval.alpha", "1"},
      {"eval.splits", "0"},   {"scorer.timeout_ms", "0"}, {"filter.min_tokens", "1000"},
  };
  for (const auto& [key, value] : bad) {
    Config c;
    c.set(key, value);
    EXPECT_THROW(c.validate(), Error) << key << "=" << value;
  }
}

TEST(Config, DerivedSettings) {
  Config c;
  c.set("weak.k_sents", "500");
  c.set("k_sents", "50");
  c.set("weak.label_k", "2");
  c.set("weak.idf", "document");
  const WeakLabelConfig w = c.weak_label();
  EXPECT_EQ(w.ranker.k_sents, 500u);
  EXPECT_EQ(w.k, 2u);
  EXPECT_EQ(w.idf_granularity, FrequencyGranularity::document);
  c.set("scorer.timeout_ms", "250");
  c.set("scorer.max_text_tokens", "10");
  const ExternalScorerHandle h = c.handle("python3 -m 'scorer plugin'");
  EXPECT_EQ(h.command, (std::vector<std::string>{"python3", "-m", "scorer plugin"}));
  EXPECT_EQ(h.timeout.count(), 250);
  EXPECT_EQ(h.budget.max_text_tokens, 10u);
}

TEST(Config, ResolvedListsEveryKeyOnce) {
  const std::string text = Config().resolved();
  std::istringstream in(text);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines)
    EXPECT_EQ(line.substr(0, line.find('=')), Config::keys()[lines]);
  EXPECT_EQ(lines, Config::keys().size());
}
