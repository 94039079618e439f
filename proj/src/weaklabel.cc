#include "dialret/weaklabel.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "dialret/error.h"
#include "dialret/lm.h"

namespace dialret {

namespace {

struct PointedScope {
  std::set<DocIndex> docs;
  std::set<std::pair<DocIndex, std::uint32_t>> sections;

  bool in_doc(const SentenceEntry& s) const { return docs.count(s.doc) > 0; }
  bool in_section(const SentenceEntry& s) const {
    return sections.count({s.doc, s.section}) > 0;
  }
};

PointedScope pointed_scope(std::span<const GroundedLink> links, const Corpus& corpus) {
  PointedScope scope;
  for (const auto& link : links) {
    auto doc = corpus.find_document(link.doc_id);
    if (!doc) continue;
    auto section = corpus.find_section(*doc, link.section_id);
    if (!section) continue;
    scope.docs.insert(*doc);
    scope.sections.insert({*doc, *section});
  }
  return scope;
}

SentenceIndex resolve_or_throw(const Corpus& corpus, const std::string& id) {
  auto s = corpus.resolve(id);
  if (!s) throw Error("sentence not in corpus: " + id);
  return *s;
}

std::vector<Turn> capped_future(const Dialogue& d, std::size_t m_future) {
  const std::size_t n = std::min(d.future.size(), m_future);
  return {d.future.begin(), d.future.begin() + static_cast<std::ptrdiff_t>(n)};
}

const Turn& target_of(const TrainingExample& example) {
  if (!example.conversation.target)
    throw Error("training conversation has no target: " + example.conversation.dialogue_id);
  return *example.conversation.target;
}

RankedList lm_list(const TermDist& query_dist, const TrainingExample& example, double mu,
                   const Corpus& corpus, const char* tag) {
  const QueryModel query = project_query(query_dist, corpus.stats());
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(example.pool.size());
  for (const auto& item : example.pool.items()) {
    const SentenceEntry& s = corpus.sentence(resolve_or_throw(corpus, item.id));
    scores.emplace_back(item.id,
                        query.empty() ? 0.0 : score_sentence(query, s, mu, corpus.stats()));
  }
  return RankedList::from_scores(example.pool.query_id(), std::move(scores), tag);
}

// sum_i alpha_i / (nu + rank(L_i, s)) over the given per-turn lists.
RankedList decayed_rrf(std::span<const RankedList> lists, const DecayParams& decay,
                       double nu, const std::string& query_id, const char* tag) {
  const auto alpha = decay_weights(decay);
  std::unordered_map<std::string, double> fused;
  for (std::size_t i = 0; i < lists.size(); ++i)
    for (const auto& item : lists[i].items())
      fused[item.id] += alpha[i] / (nu + static_cast<double>(item.rank));
  return RankedList::from_scores(query_id, {fused.begin(), fused.end()}, tag);
}

}  // namespace

void FusedLmParams::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda must lie in [0,1]");
  if (!(nu > 0.0)) throw Error("nu must be positive");
  if (!(delta > 0.0)) throw Error("delta must be positive");
  if (m_future == 0) throw Error("m_future must be at least 1");
}

TrainingExample make_training_example(Dialogue conversation, RankedList candidates,
                                      const Corpus& corpus) {
  TrainingExample ex;
  if (conversation.target) ex.pointed_links = conversation.target->links;
  const PointedScope scope = pointed_scope(ex.pointed_links, corpus);
  std::vector<std::pair<std::string, double>> kept;
  for (const auto& item : candidates.items()) {
    auto s = corpus.resolve(item.id);
    if (s && scope.in_doc(corpus.sentence(*s))) kept.emplace_back(item.id, item.score);
  }
  ex.pool = RankedList::from_scores(candidates.query_id(), std::move(kept), "pool");
  ex.conversation = std::move(conversation);
  ex.candidates = std::move(candidates);
  return ex;
}

bool has_pointed_hit(const TrainingExample& example, const Corpus& corpus) {
  const PointedScope scope = pointed_scope(example.pointed_links, corpus);
  for (const auto& item : example.candidates.items()) {
    auto s = corpus.resolve(item.id);
    if (s && scope.in_section(corpus.sentence(*s))) return true;
  }
  return false;
}

TfidfSimilarity tfidf_cosine(std::span<const std::string> target,
                             std::span<const std::string> sentence,
                             const CollectionStats& stats, FrequencyGranularity granularity) {
  const std::uint64_t n = stats.unit_count(granularity);
  auto idf = [&](const std::string& term) {
    auto id = stats.vocabulary.find(term);
    return rsj_idf(n, id ? stats.unit_frequency(*id, granularity) : 0);
  };
  std::map<std::string, double> a, b;
  for (const auto& t : target) a[t] += 1.0;
  for (const auto& t : sentence) b[t] += 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (auto& [term, tf] : a) {
    const double w = tf * idf(term);
    tf = w;
    na += w * w;
  }
  for (auto& [term, tf] : b) {
    const double w = tf * idf(term);
    tf = w;
    nb += w * w;
    auto it = a.find(term);
    if (it != a.end()) dot += it->second * w;
  }
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  return {dot / (std::sqrt(na) * std::sqrt(nb)), false};
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double embed_cosine(std::string_view target, std::string_view sentence, Embedder& embedder) {
  const TokenBudget budget = embedder.budget();
  const EmbedRequest requests[] = {
      {"q", truncate_tokens(target, budget.max_query_tokens)},
      {"s", truncate_tokens(sentence, budget.max_text_tokens)}};
  const auto vectors = embedder.embed(requests);
  if (vectors.size() != 2) throw Error("embedder returned a wrong number of vectors");
  return cosine(vectors[0], vectors[1]);
}

double weakly_fused_score(std::size_t rank_history, std::size_t rank_target,
                          std::size_t rank_future, double lambda, double nu) {
  return lambda / 2.0 / (nu + static_cast<double>(rank_history)) +
         (1.0 - lambda) / (nu + static_cast<double>(rank_target)) +
         lambda / 2.0 / (nu + static_cast<double>(rank_future));
}

RankedList weakly_fuse(const RankedList& history, const RankedList& target,
                       const RankedList& future, const FusedLmParams& params,
                       std::string query_id, std::string tag) {
  params.validate();
  const double weights[] = {params.lambda / 2.0, 1.0 - params.lambda, params.lambda / 2.0};
  const RankedList* lists[] = {&history, &target, &future};
  std::unordered_map<std::string, double> fused;
  for (int i = 0; i < 3; ++i)
    for (const auto& item : lists[i]->items())
      fused[item.id] += weights[i] / (params.nu + static_cast<double>(item.rank));
  return RankedList::from_scores(std::move(query_id), {fused.begin(), fused.end()},
                                 std::move(tag));
}

RankedList tfidf_annotator(const TrainingExample& example, const Corpus& corpus,
                           FrequencyGranularity granularity) {
  const auto target = corpus.analyze_query_text(target_of(example).text);
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(example.pool.size());
  for (const auto& item : example.pool.items()) {
    const auto tokens =
        corpus.analyze_query_text(corpus.sentence_text(resolve_or_throw(corpus, item.id)));
    scores.emplace_back(item.id, tfidf_cosine(target, tokens, corpus.stats(), granularity).value);
  }
  return RankedList::from_scores(example.pool.query_id(), std::move(scores), "tfidf");
}

RankedList embed_annotator(const TrainingExample& example, Embedder& embedder,
                           const Corpus& corpus) {
  const TokenBudget budget = embedder.budget();
  std::vector<EmbedRequest> requests;
  requests.reserve(example.pool.size() + 1);
  // Sentence ids always contain '#', so "q" cannot collide.
  requests.push_back({"q", truncate_tokens(target_of(example).text, budget.max_query_tokens)});
  for (const auto& item : example.pool.items())
    requests.push_back(
        {item.id, truncate_tokens(corpus.sentence_text(resolve_or_throw(corpus, item.id)),
                                  budget.max_text_tokens)});
  const auto vectors = embedder.embed(requests);
  if (vectors.size() != requests.size())
    throw Error("embedder returned a wrong number of vectors");
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(example.pool.size());
  for (std::size_t i = 1; i < requests.size(); ++i)
    scores.emplace_back(requests[i].id, cosine(vectors[0], vectors[i]));
  return RankedList::from_scores(example.pool.query_id(), std::move(scores), "embed");
}

RankedList fused_lm(const TrainingExample& example, const FusedLmParams& params, double mu,
                    const Corpus& corpus) {
  params.validate();
  const Dialogue& d = example.conversation;
  const auto history = analyze_turns(d.turns, corpus);
  const auto target = corpus.analyze_query_text(target_of(example).text);
  if (target.empty()) throw Error("target empty after analysis: " + d.dialogue_id);
  const auto future_turns = capped_future(d, params.m_future);
  if (future_turns.empty()) throw Error("no future turns: " + d.dialogue_id);
  const auto future = analyze_turns(future_turns, corpus);

  const auto models = history_future_mixtures(history, future, params.delta);
  const RankedList lh = lm_list(models.history, example, mu, corpus, "history");
  const RankedList lt = lm_list(mle(target), example, mu, corpus, "target");
  const RankedList lf = lm_list(models.future, example, mu, corpus, "future");
  return weakly_fuse(lh, lt, lf, params, example.pool.query_id(), "fused_lm");
}

RankedList fused_scorer(const TrainingExample& example, Scorer& scorer,
                        const FusedLmParams& params, const Corpus& corpus) {
  params.validate();
  const Dialogue& d = example.conversation;
  if (d.turns.empty()) throw Error("no history turns: " + d.dialogue_id);
  const auto future_turns = capped_future(d, params.m_future);
  if (future_turns.empty()) throw Error("no future turns: " + d.dialogue_id);
  const std::string& qid = example.pool.query_id();

  std::vector<RankedList> history;
  for (const auto& t : d.turns) history.push_back(rerank_external(t.text, example.pool, scorer, corpus));
  const RankedList lt = rerank_external(target_of(example).text, example.pool, scorer, corpus);
  std::vector<RankedList> future;
  for (const auto& t : future_turns)
    future.push_back(rerank_external(t.text, example.pool, scorer, corpus));

  const int n = static_cast<int>(history.size());
  const int f = static_cast<int>(future.size());
  const RankedList lh = decayed_rrf(history, {params.delta, n, 1, n}, params.nu, qid, "history");
  const RankedList lf =
      decayed_rrf(future, {params.delta, n + 2, n + 2, n + 1 + f}, params.nu, qid, "future");
  return weakly_fuse(lh, lt, lf, params, qid, "fused_scorer");
}

RankedList fuse_annotators(std::span<const RankedList> lists, double nu) {
  if (lists.empty()) throw Error("no annotator lists to fuse");
  std::set<std::string> pool;
  for (const auto& item : lists.front().items()) pool.insert(item.id);
  for (std::size_t i = 1; i < lists.size(); ++i) {
    std::set<std::string> other;
    for (const auto& item : lists[i].items()) {
      if (!pool.count(item.id))
        throw Error("annotator pool mismatch: '" + item.id + "' only in list '" +
                    lists[i].tag() + "'");
      other.insert(item.id);
    }
    for (const auto& id : pool)
      if (!other.count(id))
        throw Error("annotator pool mismatch: '" + id + "' missing from list '" +
                    lists[i].tag() + "'");
  }
  return rrf(lists, RrfParams{nu, {}}, lists.front().query_id(), "fused");
}

std::string_view to_string(LabelKind kind) {
  return kind == LabelKind::pseudo_relevant ? "pos" : "neg";
}

std::vector<PseudoLabel> select_pseudo_labels(const TrainingExample& example,
                                              const RankedList& fused, std::size_t k,
                                              const Corpus& corpus) {
  const PointedScope scope = pointed_scope(example.pointed_links, corpus);
  std::vector<const RankedItem*> inside, outside;
  for (const auto& item : fused.items()) {
    auto s = corpus.resolve(item.id);
    if (!s) continue;
    const SentenceEntry& e = corpus.sentence(*s);
    if (scope.in_section(e))
      inside.push_back(&item);
    else if (scope.in_doc(e))
      outside.push_back(&item);
  }
  std::vector<PseudoLabel> labels;
  for (std::size_t i = 0; i < std::min(k, inside.size()); ++i)
    labels.push_back({SentenceRef::parse(inside[i]->id), LabelKind::pseudo_relevant,
                      inside[i]->score, {}});
  for (std::size_t i = 0; i < std::min(k, outside.size()); ++i) {
    const RankedItem* item = outside[outside.size() - 1 - i];
    labels.push_back(
        {SentenceRef::parse(item->id), LabelKind::pseudo_nonrelevant, item->score, {}});
  }
  return labels;
}

TrainingSet build_training_set(std::span<const Thread> threads, const Corpus& corpus,
                               Scorer& scorer, Embedder& embedder,
                               const WeakLabelConfig& config) {
  config.ranker.validate();
  config.fused.validate();
  TrainingSet out;
  out.counters.threads = threads.size();

  std::vector<Thread> enriched;
  enriched.reserve(threads.size());
  for (const auto& t : threads) enriched.push_back(enrich_first_turn(t));
  const LinkResolver resolver = [&corpus](const GroundedLink& link) {
    auto doc = corpus.find_document(link.doc_id);
    return doc && corpus.find_section(*doc, link.section_id).has_value();
  };
  auto conversations = select_training_conversations(enriched, resolver, config.selection);
  std::sort(conversations.begin(), conversations.end(),
            [](const Dialogue& a, const Dialogue& b) { return a.dialogue_id < b.dialogue_id; });
  out.counters.conversations = conversations.size();

  for (auto& conv : conversations) {
    const std::string id = conv.dialogue_id;
    try {
      const auto turns = analyze_turns(conv.turns, corpus);
      RankedList candidates = final_rank(id, turns, config.ranker, corpus);
      TrainingExample ex = make_training_example(std::move(conv), std::move(candidates), corpus);
      if (!has_pointed_hit(ex, corpus)) {
        ++out.counters.no_pointed_hit;
        continue;
      }
      const RankedList lists[] = {
          tfidf_annotator(ex, corpus, config.idf_granularity),
          embed_annotator(ex, embedder, corpus),
          fused_lm(ex, config.fused, config.annotator_mu, corpus),
          fused_scorer(ex, scorer, config.fused, corpus)};
      const RankedList fused = fuse_annotators(lists, config.fused.nu);
      auto labels = select_pseudo_labels(ex, fused, config.k, corpus);
      for (auto& label : labels)
        for (const auto& list : lists)
          label.annotator_ranks[list.tag()] = *list.rank_of(label.sentence.str());
      out.records.push_back({std::move(ex.conversation), std::move(labels)});
      ++out.counters.emitted;
    } catch (const ScorerError&) {
      throw;
    } catch (const Error& e) {
      ++out.counters.failed;
      out.failures.push_back(id + ": " + e.what());
    }
  }
  return out;
}

std::string training_record_to_json_line(const TrainingRecord& record) {
  nlohmann::ordered_json j;
  const Dialogue& d = record.conversation;
  j["conv_id"] = d.dialogue_id;
  j["history"] = nlohmann::json::array();
  for (const auto& t : d.turns) j["history"].push_back(t.text);
  j["target"] = d.target ? d.target->text : std::string();
  j["future"] = nlohmann::json::array();
  for (const auto& t : d.future) j["future"].push_back(t.text);
  j["labels"] = nlohmann::json::array();
  for (const auto& l : record.labels) {
    nlohmann::ordered_json lj;
    lj["sentence"] = l.sentence.str();
    lj["label"] = to_string(l.label);
    lj["score"] = l.fused_score;
    lj["ranks"] = l.annotator_ranks;
    j["labels"].push_back(std::move(lj));
  }
  return j.dump();
}

}  // namespace dialret
