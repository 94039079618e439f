#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dialret/analysis.h"
#include "dialret/corpus.h"
#include "dialret/dialogue.h"
#include "dialret/rerank.h"
#include "dialret/retrieval.h"
#include "dialret/scorer.h"
#include "dialret/weaklabel.h"

namespace dialret {

// Every tunable of the command-line tool. Keys are the dotted names accepted
// by config files and by `--set key=value`.
struct Config {
  std::string corpus;
  std::string index;
  std::string threads;
  std::string stopwords;
  std::string blocklist;

  StemmerKind stemmer = StemmerKind::light;
  InitialRankerParams ranker;
  std::size_t weak_k_sents = 1000;
  Bm25Params bm25;
  double rrf_nu = 60.0;
  FusedLmParams fused;
  double annotator_mu = 1000.0;
  std::size_t label_k = 3;
  FrequencyGranularity idf_granularity = FrequencyGranularity::sentence;
  TestFilterConfig filters;
  TrainingSelectionConfig selection;

  std::size_t n_splits = 50;
  std::size_t permutations = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 0;

  // "builtin:overlap" / "builtin:hashing" select the in-process stubs;
  // anything else is a command line for a protocol child process.
  std::string scorer = "builtin:overlap";
  std::string embedder = "builtin:hashing";
  std::size_t embed_dimension = 64;
  std::int64_t scorer_timeout_ms = 30000;
  TokenBudget budget;

  // Throws on an unknown key or an unparsable value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  // Range checks on every parameter.
  void validate() const;

  AnalyzerConfig analyzer() const;
  WeakLabelConfig weak_label() const;
  ExternalScorerHandle handle(const std::string& command) const;

  // `key=value` per line, in key order.
  std::string resolved() const;
};

// `key = value` lines; blank lines and lines starting with '#' are skipped.
void apply_config(std::istream& in, Config& config, std::string_view source);
void apply_config_file(const std::string& path, Config& config);

// Environment variable naming a config file to read when no --config flag
// is given.
inline constexpr const char* kConfigEnv = "DIALRET_CONFIG";

}  // namespace dialret
