#include "dialret/rerank.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "dialret/error.h"
#include "dialret/lm.h"
#include "dialret/retrieval.h"

namespace dialret {

namespace {

SentenceIndex resolve_candidate(const Corpus& corpus, const std::string& id) {
  auto s = corpus.resolve(id);
  if (!s) throw Error("candidate sentence not in corpus: " + id);
  return *s;
}

}  // namespace

RankedList rerank_lm(std::string_view last_turn, const RankedList& candidates,
                     double mu, const Corpus& corpus) {
  const auto tokens = corpus.analyze_query_text(last_turn);
  if (tokens.empty()) throw Error("last turn empty after analysis");
  const QueryModel query = project_query(mle(tokens), corpus.stats());
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(candidates.size());
  for (const auto& item : candidates.items()) {
    const SentenceEntry& s = corpus.sentence(resolve_candidate(corpus, item.id));
    const double score = query.empty() ? 0.0 : score_sentence(query, s, mu, corpus.stats());
    scores.emplace_back(item.id, score);
  }
  return RankedList::from_scores(candidates.query_id(), std::move(scores), "lm");
}

void Bm25Params::validate() const {
  if (!(k1 > 0.0)) throw Error("BM25 k1 must be positive");
  if (!(b >= 0.0 && b <= 1.0)) throw Error("BM25 b must lie in [0,1]");
}

double rsj_idf(std::uint64_t n, std::uint64_t df) {
  const double idf = std::log((static_cast<double>(n) - static_cast<double>(df) + 0.5) /
                              (static_cast<double>(df) + 0.5));
  return std::max(0.0, idf);
}

double bm25_term_weight(double tf, double length, double avg_length,
                        const Bm25Params& p) {
  if (tf <= 0.0) return 0.0;
  const double norm = avg_length > 0.0 ? length / avg_length : 1.0;
  return tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

RankedList rerank_bm25(std::string_view last_turn, const RankedList& candidates,
                       const Bm25Params& params, const Corpus& corpus) {
  params.validate();
  const auto tokens = corpus.analyze_query_text(last_turn);
  if (tokens.empty()) throw Error("last turn empty after analysis");
  const CollectionStats& stats = corpus.stats();

  struct QueryTerm {
    TermId term;
    double qtf;
    double idf;
  };
  std::map<std::string, double> qtf;
  for (const auto& t : tokens) qtf[t] += 1.0;
  std::vector<QueryTerm> query;
  for (const auto& [term, count] : qtf) {
    auto id = stats.vocabulary.find(term);
    if (!id) continue;
    query.push_back({*id, count, rsj_idf(stats.sentence_count, stats.sf[*id])});
  }

  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(candidates.size());
  for (const auto& item : candidates.items()) {
    const SentenceEntry& s = corpus.sentence(resolve_candidate(corpus, item.id));
    double score = 0.0;
    for (const auto& q : query)
      score += q.qtf * q.idf *
               bm25_term_weight(s.count(q.term), s.length, stats.avg_sentence_len, params);
    scores.emplace_back(item.id, score);
  }
  return RankedList::from_scores(candidates.query_id(), std::move(scores), "bm25");
}

void RrfParams::validate(std::size_t list_count) const {
  if (!(nu > 0.0)) throw Error("RRF nu must be positive");
  if (weights.empty()) return;
  if (weights.size() != list_count)
    throw Error("RRF: " + std::to_string(weights.size()) + " weights for " +
                std::to_string(list_count) + " lists");
  bool any = false;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("RRF weights must be non-negative");
    any |= w > 0.0;
  }
  if (!any) throw Error("RRF weights are all zero");
}

RankedList rrf(std::span<const RankedList> lists, const RrfParams& params,
               std::string query_id, std::string tag) {
  if (lists.empty()) throw Error("RRF needs at least one list");
  params.validate(lists.size());
  if (query_id.empty()) query_id = lists.front().query_id();
  std::unordered_map<std::string, double> fused;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const double w = params.weights.empty() ? 1.0 : params.weights[i];
    for (const auto& item : lists[i].items())
      fused[item.id] += w / (params.nu + static_cast<double>(item.rank));
  }
  std::vector<std::pair<std::string, double>> scores(fused.begin(), fused.end());
  return RankedList::from_scores(std::move(query_id), std::move(scores), std::move(tag));
}

RankedList rerank_external(std::string_view query, const RankedList& candidates,
                           Scorer& scorer, const Corpus& corpus) {
  const TokenBudget budget = scorer.budget();
  const std::string q = truncate_tokens(query, budget.max_query_tokens);
  std::vector<ScoreRequest> requests;
  requests.reserve(candidates.size());
  for (const auto& item : candidates.items()) {
    const std::string& text = corpus.sentence_text(resolve_candidate(corpus, item.id));
    requests.push_back({item.id, q, truncate_tokens(text, budget.max_text_tokens)});
  }
  if (requests.empty()) return RankedList(candidates.query_id(), "external");
  const auto scores = scorer.score(requests);
  if (scores.size() != requests.size())
    throw Error("external scorer returned " + std::to_string(scores.size()) +
                " scores for " + std::to_string(requests.size()) + " requests");
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scored.emplace_back(requests[i].id, scores[i]);
  return RankedList::from_scores(candidates.query_id(), std::move(scored), "external");
}

RankedList ext_fuse(std::span<const Turn> turns, const RankedList& candidates,
                    Scorer& scorer, const RrfParams& params, const Corpus& corpus) {
  if (!params.weights.empty() && params.weights.size() != turns.size())
    throw Error("ext_fuse: one weight per turn required");
  std::vector<RankedList> lists;
  RrfParams p{params.nu, {}};
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (corpus.analyze_query_text(turns[i].text).empty()) continue;
    lists.push_back(rerank_external(turns[i].text, candidates, scorer, corpus));
    if (!params.weights.empty()) p.weights.push_back(params.weights[i]);
  }
  if (lists.empty()) throw Error("ext_fuse: every turn is empty after analysis");
  return rrf(lists, p, candidates.query_id(), "extfuse");
}

}  // namespace dialret
