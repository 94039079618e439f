#include <gtest/gtest.h>

#include <sstream>

#include "dialret/analysis.h"
#include "dialret/error.h"
#include "synthetic.h"

using namespace dialret;
namespace synth = dialret::testing;

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

}  // namespace

TEST(Analyze, EmptyInputGivesNoTokens) {
  EXPECT_TRUE(analyze("", {}, true).empty());
  EXPECT_TRUE(analyze("", {}, false).empty());
}

TEST(Analyze, StopwordsRemovedCaseInsensitively) {
  AnalyzerConfig c;
  c.stopwords = {"the"};
  EXPECT_TRUE(analyze("The THE the", c, true).empty());
  EXPECT_EQ(analyze("The THE the", c, false).size(), 3u);
}

TEST(Analyze, DefaultStemmerGolden) {
  EXPECT_EQ(join(analyze("Dogs running quickly", {}, false)), "dog run quickly");
}

TEST(LightStemmer, FrozenOutputs) {
  const LightStemmer s;
  const std::pair<const char*, const char*> cases[] = {
      {"ponies", "pony"},   {"classes", "class"}, {"boxes", "box"},     {"churches", "church"},
      {"cats", "cat"},      {"glass", "glass"},   {"status", "status"}, {"thesis", "thesis"},
      {"hopping", "hop"},   {"falling", "fall"},  {"sing", "sing"},     {"bring", "bring"},
      {"studied", "study"}, {"jumped", "jump"},   {"agreed", "agreed"}, {"red", "red"},
      {"bus", "bus"},       {"gas", "gas"},       {"mp3s", "mp3s"},     {"café", "café"},
  };
  for (const auto& [in, out] : cases) EXPECT_EQ(s.stem(in), out) << in;
}

TEST(Tokenize, SplitsOnPunctuationAndKeepsUtf8) {
  EXPECT_EQ(tokenize("Hello, world!  It's 2020.", true),
            (std::vector<std::string>{"hello", "world", "it", "s", "2020"}));
  EXPECT_EQ(tokenize("naïve Zürich", true), (std::vector<std::string>{"naïve", "zürich"}));
  EXPECT_EQ(tokenize("MiXeD", false), (std::vector<std::string>{"MiXeD"}));
}

TEST(Stopwords, ReadSkipsCommentsAndBlankLines) {
  std::istringstream in("# comment\nthe\n\nAnd\n  of  \n");
  EXPECT_EQ(read_stopwords(in), (std::set<std::string>{"the", "and", "of"}));
  EXPECT_THROW(load_stopwords("/no/such/stopwords"), Error);
}

TEST(Stemmer, KindRoundTrip) {
  EXPECT_EQ(stemmer_from_string(to_string(StemmerKind::none)), StemmerKind::none);
  EXPECT_EQ(stemmer_from_string(to_string(StemmerKind::light)), StemmerKind::light);
  EXPECT_THROW(stemmer_from_string("krovetz"), Error);
}

TEST(AnalyzeProperty, DeterministicAndIdempotentWithIdentityStemmer) {
  synth::Rng rng(11);
  AnalyzerConfig identity;
  identity.stemmer = StemmerKind::none;
  const std::vector<std::string> pieces = {"Alpha", "beta,", "GAMMA", "d3lta", "naïve",
                                           "--",    "x",     "Ünï",   "a.b"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (std::size_t i = 0, n = rng.below(12); i < n; ++i) text += rng.pick(pieces) + " ";
    const auto once = analyze(text, identity, false);
    EXPECT_EQ(once, analyze(text, identity, false));
    EXPECT_EQ(analyze(join(once), identity, false), once);
  }
}
