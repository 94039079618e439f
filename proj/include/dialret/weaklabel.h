#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialret/corpus.h"
#include "dialret/dialogue.h"
#include "dialret/ranked_list.h"
#include "dialret/rerank.h"
#include "dialret/retrieval.h"
#include "dialret/scorer.h"

namespace dialret {

struct FusedLmParams {
  double lambda = 0.3;
  double nu = 60.0;
  double delta = 0.01;
  std::size_t m_future = 4;  // future turns consumed; longer futures are cut

  void validate() const;
};

// A training conversation (history, target, future) with the initial
// ranker's candidates and the annotator pool: those candidates that lie in a
// pointed document, in candidate order.
struct TrainingExample {
  Dialogue conversation;
  std::vector<GroundedLink> pointed_links;
  RankedList candidates;
  RankedList pool;
};

// Resolves the target's links and restricts `candidates` to pointed
// documents. Unresolvable links are ignored.
TrainingExample make_training_example(Dialogue conversation, RankedList candidates,
                                      const Corpus& corpus);

// True when some candidate lies inside a pointed section.
bool has_pointed_hit(const TrainingExample& example, const Corpus& corpus);

struct TfidfSimilarity {
  double value = 0.0;
  bool zero_vector = false;  // one side had no weighted term; value is 0
};

// Cosine of raw-tf x RSJ-idf vectors over analyzed tokens.
TfidfSimilarity tfidf_cosine(std::span<const std::string> target,
                             std::span<const std::string> sentence,
                             const CollectionStats& stats,
                             FrequencyGranularity granularity = FrequencyGranularity::sentence);

// Throws on a dimension mismatch; a zero vector yields 0.
double cosine(std::span<const double> a, std::span<const double> b);

double embed_cosine(std::string_view target, std::string_view sentence, Embedder& embedder);

// (lambda/2)/(nu + r_h) + (1 - lambda)/(nu + r_t) + (lambda/2)/(nu + r_f).
double weakly_fused_score(std::size_t rank_history, std::size_t rank_target,
                          std::size_t rank_future, double lambda, double nu);

// Applies weakly_fused_score over three lists; an item absent from a list
// gets no contribution from it.
RankedList weakly_fuse(const RankedList& history, const RankedList& target,
                       const RankedList& future, const FusedLmParams& params,
                       std::string query_id, std::string tag);

// Annotators. Each ranks example.pool and returns a list tagged with its name.
RankedList tfidf_annotator(const TrainingExample& example, const Corpus& corpus,
                           FrequencyGranularity granularity = FrequencyGranularity::sentence);
RankedList embed_annotator(const TrainingExample& example, Embedder& embedder,
                           const Corpus& corpus);
RankedList fused_lm(const TrainingExample& example, const FusedLmParams& params,
                    double mu, const Corpus& corpus);
RankedList fused_scorer(const TrainingExample& example, Scorer& scorer,
                        const FusedLmParams& params, const Corpus& corpus);

// Uniform RRF across annotator lists; every list must rank the same items.
RankedList fuse_annotators(std::span<const RankedList> lists, double nu);

enum class LabelKind { pseudo_relevant, pseudo_nonrelevant };
std::string_view to_string(LabelKind kind);  // "pos" / "neg"

struct PseudoLabel {
  SentenceRef sentence;
  LabelKind label = LabelKind::pseudo_relevant;
  double fused_score = 0.0;
  std::map<std::string, std::size_t> annotator_ranks;  // tag -> rank
};

// Top-k of the fused list inside pointed sections are relevant; bottom-k of
// the rest of the pointed documents are non-relevant.
std::vector<PseudoLabel> select_pseudo_labels(const TrainingExample& example,
                                              const RankedList& fused, std::size_t k,
                                              const Corpus& corpus);

struct WeakLabelConfig {
  InitialRankerParams ranker{0.3, 0.75, 1000.0, 0.01, 1000, 1000};
  FusedLmParams fused;
  double annotator_mu = 1000.0;
  std::size_t k = 3;
  FrequencyGranularity idf_granularity = FrequencyGranularity::sentence;
  TrainingSelectionConfig selection;
};

struct TrainingRecord {
  Dialogue conversation;
  std::vector<PseudoLabel> labels;
};

struct WeakLabelCounters {
  std::size_t threads = 0;
  std::size_t conversations = 0;      // after conversation selection
  std::size_t no_pointed_hit = 0;     // skipped: no candidate in a pointed section
  std::size_t failed = 0;             // skipped: an annotator or the ranker threw
  std::size_t emitted = 0;
};

struct TrainingSet {
  std::vector<TrainingRecord> records;  // ordered by conversation id
  WeakLabelCounters counters;
  std::vector<std::string> failures;    // "conv_id: message"
};

// Full pipeline: conversation selection, initial ranking, pointed-hit
// filter, the four annotators, fusion and label selection.
TrainingSet build_training_set(std::span<const Thread> threads, const Corpus& corpus,
                               Scorer& scorer, Embedder& embedder,
                               const WeakLabelConfig& config);

// {"conv_id","history","target","future","labels":[{"sentence","label","score","ranks"}]}
std::string training_record_to_json_line(const TrainingRecord& record);

}  // namespace dialret
