#include "dialret/retrieval.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "dialret/error.h"

namespace dialret {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<TurnTokens> dialogue_tokens(const Dialogue& dialogue,
                                        const Corpus& corpus) {
  return analyze_turns(dialogue.turns, corpus);
}

}  // namespace

void InitialRankerParams::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error("beta must lie in [0,1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("gamma must lie in [0,1]");
  if (!(mu >= 0.0)) throw Error("mu must be non-negative");
  if (!(delta > 0.0)) throw Error("delta must be positive");
  if (k_docs < 1) throw Error("k_docs must be >= 1");
  if (k_sents < 1) throw Error("k_sents must be >= 1");
}

QueryModel project_query(const TermDist& dist, const CollectionStats& stats) {
  QueryModel q;
  double mass = 0.0;
  for (const auto& [term, p] : dist) {
    auto id = stats.vocabulary.find(term);
    if (!id || stats.cf[*id] == 0) continue;
    q.terms.push_back(*id);
    q.probs.push_back(p);
    mass += p;
  }
  for (double& p : q.probs) p /= mass;
  return q;
}

double query_likelihood_score(const QueryModel& query,
                              std::span<const std::uint32_t> term_counts,
                              std::size_t text_length, double mu,
                              const CollectionStats& stats) {
  const double denom = static_cast<double>(text_length) + mu;
  double score = 0.0;
  for (std::size_t i = 0; i < query.terms.size(); ++i) {
    const double numer =
        static_cast<double>(term_counts[i]) +
        (mu > 0.0 ? mu * stats.collection_prob(query.terms[i]) : 0.0);
    if (!(numer > 0.0) || !(denom > 0.0)) return kNegInf;
    score += query.probs[i] * std::log(numer / denom);
  }
  return score;
}

double score_sentence(const QueryModel& query, const SentenceEntry& sentence,
                      double mu, const CollectionStats& stats) {
  std::vector<std::uint32_t> counts(query.terms.size());
  for (std::size_t i = 0; i < query.terms.size(); ++i)
    counts[i] = sentence.count(query.terms[i]);
  return query_likelihood_score(query, counts, sentence.length, mu, stats);
}

std::vector<TurnTokens> analyze_turns(std::span<const Turn> turns,
                                      const Corpus& corpus) {
  std::vector<TurnTokens> out;
  out.reserve(turns.size());
  for (const auto& t : turns) out.push_back(corpus.analyze_query_text(t.text));
  return out;
}

RankedList retrieve_documents(std::string query_id,
                              std::span<const TurnTokens> turns,
                              const InitialRankerParams& params,
                              const Corpus& corpus) {
  params.validate();
  TermDist doc_model;
  try {
    doc_model = doc_mixture(turns, params.beta);
  } catch (const Error&) {
    throw Error("dialogue empty after analysis: " + query_id);
  }
  const CollectionStats& stats = corpus.stats();
  const QueryModel query = project_query(doc_model, stats);
  if (query.empty()) return RankedList(std::move(query_id), "docs");

  // Term-at-a-time accumulation of per-candidate term counts.
  std::unordered_map<DocIndex, std::vector<std::uint32_t>> candidates;
  for (std::size_t i = 0; i < query.terms.size(); ++i) {
    for (const Posting& p : corpus.index().postings(query.terms[i])) {
      auto& counts = candidates[p.doc];
      if (counts.empty()) counts.assign(query.terms.size(), 0);
      counts[i] = p.tf;
    }
  }

  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(candidates.size());
  for (const auto& [doc, counts] : candidates) {
    scores.emplace_back(corpus.documents()[doc].doc_id,
                        query_likelihood_score(query, counts,
                                               corpus.index().doc_length(doc),
                                               params.mu, stats));
  }
  return RankedList::from_scores(std::move(query_id), std::move(scores), "docs",
                                 params.k_docs);
}

RankedList retrieve_documents(const Dialogue& dialogue,
                              const InitialRankerParams& params,
                              const Corpus& corpus) {
  const auto turns = dialogue_tokens(dialogue, corpus);
  return retrieve_documents(dialogue.dialogue_id, turns, params, corpus);
}

std::vector<SentenceScore> score_sentences(std::span<const TurnTokens> turns,
                                           const RankedList& docs,
                                           const InitialRankerParams& params,
                                           const Corpus& corpus) {
  const CollectionStats& stats = corpus.stats();
  const QueryModel query =
      project_query(sent_mixture(turns, params.beta, params.delta), stats);
  std::vector<SentenceScore> out;
  for (const auto& item : docs.items()) {
    const auto doc = corpus.find_document(item.id);
    if (!doc) throw Error("retrieved document not in corpus: " + item.id);
    const auto [first, last] = corpus.document_sentences(*doc);
    for (SentenceIndex s = first; s < last; ++s) {
      const SentenceEntry& entry = corpus.sentence(s);
      if (entry.length == 0) continue;
      // An all-OOV query carries no evidence; every sentence ties.
      const double direct =
          query.empty() ? 0.0 : score_sentence(query, entry, params.mu, stats);
      out.push_back({s, item.score, direct});
    }
  }
  return out;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw Error("min-max normalization of an empty list");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (std::isinf(v) && v < 0) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) {
    if (std::isinf(v) && v < 0) {
      out.push_back(lo > hi ? 0.5 : 0.0);
    } else if (hi == lo) {
      out.push_back(0.5);
    } else {
      out.push_back(std::clamp((v - lo) / (hi - lo), 0.0, 1.0));
    }
  }
  return out;
}

RankedList final_rank(std::string query_id, std::span<const TurnTokens> turns,
                      const InitialRankerParams& params, const Corpus& corpus) {
  const RankedList docs = retrieve_documents(query_id, turns, params, corpus);
  if (docs.empty()) return RankedList(std::move(query_id), "initial");

  std::vector<double> doc_raw;
  doc_raw.reserve(docs.size());
  for (const auto& item : docs.items()) doc_raw.push_back(item.score);
  const auto doc_norm = minmax_normalize(doc_raw);
  std::unordered_map<std::string, double> doc_norm_by_id;
  for (std::size_t i = 0; i < docs.size(); ++i) doc_norm_by_id[docs[i].id] = doc_norm[i];

  const auto sentences = score_sentences(turns, docs, params, corpus);
  if (sentences.empty()) return RankedList(std::move(query_id), "initial");
  std::vector<double> direct_raw;
  direct_raw.reserve(sentences.size());
  for (const auto& s : sentences) direct_raw.push_back(s.direct_score);
  const auto direct_norm = minmax_normalize(direct_raw);

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const SentenceEntry& entry = corpus.sentence(sentences[i].sentence);
    const double doc_part = doc_norm_by_id.at(corpus.documents()[entry.doc].doc_id);
    scored.emplace_back(corpus.sentence_ref(sentences[i].sentence).str(),
                        (1.0 - params.gamma) * doc_part +
                            params.gamma * direct_norm[i]);
  }
  return RankedList::from_scores(std::move(query_id), std::move(scored), "initial",
                                 params.k_sents);
}

RankedList final_rank(const Dialogue& dialogue, const InitialRankerParams& params,
                      const Corpus& corpus) {
  const auto turns = dialogue_tokens(dialogue, corpus);
  return final_rank(dialogue.dialogue_id, turns, params, corpus);
}

}  // namespace dialret
