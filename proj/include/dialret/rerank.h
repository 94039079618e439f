#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialret/corpus.h"
#include "dialret/dialogue.h"
#include "dialret/ranked_list.h"
#include "dialret/scorer.h"

namespace dialret {

// Reranks candidates by -CE(MLE(t_n) || Dirichlet(s)).
RankedList rerank_lm(std::string_view last_turn, const RankedList& candidates,
                     double mu, const Corpus& corpus);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  void validate() const;
};

// RSJ idf clamped at zero: max(0, ln((N - df + 0.5) / (df + 0.5))).
double rsj_idf(std::uint64_t n, std::uint64_t df);

double bm25_term_weight(double tf, double length, double avg_length,
                        const Bm25Params& params);

// Sentence-granularity statistics: N = sentence count, df = sentence
// frequency, length normalized by the collection's average sentence length.
RankedList rerank_bm25(std::string_view last_turn, const RankedList& candidates,
                       const Bm25Params& params, const Corpus& corpus);

struct RrfParams {
  double nu = 60.0;
  std::vector<double> weights;  // per list; empty means uniform 1.0
  void validate(std::size_t list_count) const;
};

// score(s) = sum_i weight_i / (nu + rank(L_i, s)); lists missing s add 0.
RankedList rrf(std::span<const RankedList> lists, const RrfParams& params,
               std::string query_id = {}, std::string tag = "rrf");

// Scores every candidate against `query` through the scorer. `query` may be
// any text, e.g. an externally expanded last turn.
RankedList rerank_external(std::string_view query, const RankedList& candidates,
                           Scorer& scorer, const Corpus& corpus);

// One external list per non-empty turn, fused by RRF.
RankedList ext_fuse(std::span<const Turn> turns, const RankedList& candidates,
                    Scorer& scorer, const RrfParams& params, const Corpus& corpus);

}  // namespace dialret
