#pragma once

#include <span>
#include <string>
#include <vector>

#include "dialret/corpus.h"
#include "dialret/dialogue.h"
#include "dialret/lm.h"
#include "dialret/ranked_list.h"

namespace dialret {

struct InitialRankerParams {
  double beta = 0.3;
  double gamma = 0.75;
  double mu = 1000.0;
  double delta = 0.01;
  std::size_t k_docs = 1000;
  std::size_t k_sents = 50;

  void validate() const;
};

// A query distribution projected onto the collection vocabulary and
// renormalized. Terms the collection has never seen are dropped.
struct QueryModel {
  std::vector<TermId> terms;
  std::vector<double> probs;
  bool empty() const { return terms.empty(); }
};

QueryModel project_query(const TermDist& dist, const CollectionStats& stats);

// -CE(query || Dirichlet(text)) for a text given by its term counts. Returns
// -infinity when mu = 0 and the text misses a query term.
double query_likelihood_score(const QueryModel& query,
                              std::span<const std::uint32_t> term_counts,
                              std::size_t text_length, double mu,
                              const CollectionStats& stats);

double score_sentence(const QueryModel& query, const SentenceEntry& sentence,
                      double mu, const CollectionStats& stats);

// Analyzed (stopworded, stemmed) turn texts.
std::vector<TurnTokens> analyze_turns(std::span<const Turn> turns,
                                      const Corpus& corpus);

RankedList retrieve_documents(std::string query_id,
                              std::span<const TurnTokens> turns,
                              const InitialRankerParams& params,
                              const Corpus& corpus);
RankedList retrieve_documents(const Dialogue& dialogue,
                              const InitialRankerParams& params,
                              const Corpus& corpus);

struct SentenceScore {
  SentenceIndex sentence;
  double doc_score;
  double direct_score;
};

// Every non-empty sentence of the retrieved documents, in document rank
// order, with its ambient document score and direct score.
std::vector<SentenceScore> score_sentences(std::span<const TurnTokens> turns,
                                           const RankedList& docs,
                                           const InitialRankerParams& params,
                                           const Corpus& corpus);

// (x - min) / (max - min); a constant input maps to 0.5. -infinity maps to 0
// and is excluded from the min/max.
std::vector<double> minmax_normalize(std::span<const double> values);

RankedList final_rank(std::string query_id, std::span<const TurnTokens> turns,
                      const InitialRankerParams& params, const Corpus& corpus);
RankedList final_rank(const Dialogue& dialogue, const InitialRankerParams& params,
                      const Corpus& corpus);

}  // namespace dialret
