// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails or overruns its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dialret/eval.h"
#include "dialret/lm.h"
#include "dialret/rerank.h"
#include "dialret/retrieval.h"
#include "dialret/scorer.h"
#include "dialret/weaklabel.h"
#include "reference.h"
#include "synthetic.h"

using namespace dialret;
namespace synth = dialret::testing;

namespace {

class Check {
 public:
  void that(bool ok, const std::string& what) {
    if (ok) return;
    if (failed_++ < 5) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(12);
    s << what << ": got " << got << ", want " << want;
    that(std::abs(got - want) <= tol, s.str());
  }
  bool ok() const { return failed_ == 0; }
  std::string failures() const {
    std::string out = std::to_string(failed_) + " failed check(s)";
    for (const auto& f : failures_) out += "; " + f;
    return out;
  }
  std::string detail;  // printed after PASS/FAIL

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

AnalyzerConfig synthetic_analyzer() {
  AnalyzerConfig a;
  a.stopwords = {synth::synthetic_stopwords().begin(), synth::synthetic_stopwords().end()};
  return a;
}

// A test dialogue is every turn of the thread but the last.
Dialogue as_dialogue(const Thread& thread) {
  Dialogue d;
  d.dialogue_id = thread.thread_id;
  d.turns.assign(thread.turns.begin(), thread.turns.end() - 1);
  d.target = thread.turns.back();
  d.grounded = !thread.turns.back().links.empty();
  return d;
}

std::vector<std::string> turn_texts(const Dialogue& d) {
  std::vector<std::string> out;
  for (const auto& t : d.turns) out.push_back(t.text);
  return out;
}

SubprocessScorer stub_scorer() {
  ExternalScorerHandle h;
  h.command = {DIALRET_STUB, "--reverse"};
  h.timeout = std::chrono::seconds(30);
  return SubprocessScorer(std::move(h));
}

std::string run_bytes(const Run& run) {
  std::ostringstream out;
  write_run(out, run);
  return out.str();
}

// ---------------------------------------------------------------------------

void formula_oracles(Check& c) {
  {
    // 100 collection tokens, one of them w, so p(w|C) = 0.01.
    std::string text = "w";
    for (int i = 0; i < 99; ++i) text += " f" + std::to_string(i);
    AnalyzerConfig a;
    a.stemmer = StemmerKind::none;
    const Corpus corpus = Corpus::build({Document{"D", "", {{"S", "", {text}}}}}, a);
    const std::vector<std::string> x = {"w", "w", "a", "b", "c", "d", "e", "g", "h", "i"};
    const DirichletModel smoothed(x, 1000, corpus.stats());
    c.near(smoothed.prob("w"), 0.0118812, 1e-6, "dirichlet");
    c.near(smoothed.prob("w"), 12.0 / 1010.0, 1e-15, "dirichlet exact");
    c.near(smoothed.prob("f3"), 10.0 / 1010.0, 1e-15, "dirichlet c=0");
    c.near(DirichletModel(x, 0, corpus.stats()).prob("w"), 0.2, 1e-15, "dirichlet mu=0");
  }
  {
    const TermDist p = TermDist::from_weights({{"a", 0.5}, {"b", 0.5}});
    const TermDist q = TermDist::from_weights({{"a", 0.25}, {"b", 0.75}});
    c.near(cross_entropy(p, q), 0.836988, 1e-6, "cross_entropy");
    const TermDist one = TermDist::from_weights({{"a", 1}});
    c.near(cross_entropy(one, one), 0.0, 1e-15, "cross_entropy p=q");
  }
  {
    const auto w = decay_weights({0.01, 3, 1, 3});
    c.that(w.size() == 3, "decay_weights size");
    if (w.size() == 3) {
      const double z = std::exp(-0.02) + std::exp(-0.01) + 1.0;
      c.near(w[0], 0.330006, 1e-6, "decay alpha_1");
      c.near(w[1], 0.333323, 1e-6, "decay alpha_2");
      // Closed form for the anchor weight.
      c.near(w[2], 1.0 / z, 1e-15, "decay alpha_3");
      c.near(w[2], 0.3366722, 1e-6, "decay alpha_3 rounded");
    }
    const auto future = decay_weights({0.01, 4, 4, 5});
    c.near(future[0], 0.5025, 1e-6, "future decay first");
    c.near(future[1], 0.4975, 1e-6, "future decay second");
    c.near(decay_weights({0.01, 7, 7, 7})[0], 1.0, 1e-15, "decay single");
  }
  {
    const std::vector<TurnTokens> turns = {{"x", "x", "y"}, {"y"}};
    const TermDist g = doc_mixture(turns, 0.3);
    c.near(g.prob("x"), 0.466667, 1e-6, "doc_mixture x");
    c.near(g.prob("y"), 0.533333, 1e-6, "doc_mixture y");
  }
  {
    const std::vector<TurnTokens> turns = {{"a"}, {"b"}, {"a"}};
    const TermDist g = sent_mixture(turns, 0.3, 0.01);
    const double a1 = std::exp(-0.01) / (1.0 + std::exp(-0.01));
    c.near(g.prob("a"), 0.7 + 0.3 * a1, 1e-15, "sent_mixture a");
    c.near(g.prob("a"), 0.84925, 1e-6, "sent_mixture a rounded");
    c.near(g.prob("b"), 0.15075, 1e-6, "sent_mixture b rounded");
  }
  {
    const RankedList first = RankedList::from_scores("q", {{"x", 2}, {"y", 1}}, "l");
    const RankedList second = RankedList::from_scores("q", {{"y", 2}, {"x", 1}}, "l");
    const RankedList one[] = {first};
    c.near(rrf(one, {})[0].score, 0.0163934, 1e-6, "rrf single");
    const RankedList both[] = {first, second};
    const RankedList fused = rrf(both, {});
    c.near(fused[0].score, 0.0325232, 1e-6, "rrf two lists");
    c.near(fused[0].score, 1.0 / 61 + 1.0 / 62, 1e-15, "rrf two lists exact");
  }
  {
    c.near(weakly_fused_score(2, 1, 5, 0.3, 60), 0.0162025, 1e-6, "fused_lm");
    c.near(weakly_fused_score(2, 1, 5, 0.3, 60), 0.15 / 62 + 0.7 / 61 + 0.15 / 65, 1e-15,
           "fused_lm exact");
  }
  {
    const double tf_part = bm25_term_weight(2, 7, 7, {1.2, 0.75});
    c.near(tf_part, 1.375, 1e-12, "bm25 tf");
    c.near(rsj_idf(10, 2), 1.223775, 1e-6, "bm25 idf");
    c.near(tf_part * rsj_idf(10, 2), 1.682691, 1e-6, "bm25 weight");
    c.near(rsj_idf(10, 9), 0.0, 0.0, "bm25 idf clamp");
  }
  {
    Qrels q;
    q.add("q", "r1", 1);
    q.add("q", "r2", 1);
    q.add("q", "n1", 0);
    const RankedList run = RankedList::from_scores(
        "q", {{"r1", 5}, {"n1", 4}, {"r2", 3}, {"n2", 2}}, "run");
    c.near(average_precision(run, q, "q"), 0.833333, 1e-6, "AP");
    c.near(ndcg_at_k(run, q, "q", 5), 0.919721, 1e-6, "NDCG@5");
    Qrels late;
    late.add("q", "d", 1);
    const RankedList fourth =
        RankedList::from_scores("q", {{"a", 4}, {"b", 3}, {"c", 2}, {"d", 1}}, "run");
    c.near(reciprocal_rank(fourth, late, "q"), 0.25, 1e-12, "MRR");
  }
}

void pipeline_oracle(Check& c) {
  const synth::World w = synth::make_world({});
  const AnalyzerConfig a = synthetic_analyzer();
  const Corpus corpus = Corpus::build(w.documents, a);
  c.that(w.documents.size() <= 50 && corpus.sentence_count() <= 300, "world exceeds size limits");
  const reference::World ref(w.documents, a);
  const InitialRankerParams p;
  std::size_t items = 0;
  for (const Thread& thread : w.threads) {
    const Dialogue d = as_dialogue(thread);
    const RankedList got = final_rank(d, p, corpus);
    const auto want = ref.final_rank(turn_texts(d), {p.beta, p.gamma, p.mu, p.delta, p.k_docs, p.k_sents});
    c.that(got.size() == want.size(), d.dialogue_id + ": length differs");
    for (std::size_t r = 0; r < std::min(got.size(), want.size()); ++r) {
      c.that(got[r].id == want[r].first, d.dialogue_id + ": order differs at rank " + std::to_string(r + 1));
      c.near(got[r].score, want[r].second, 1e-9, d.dialogue_id + " score");
    }
    items += got.size();
  }
  c.detail = std::to_string(w.threads.size()) + " dialogues, " + std::to_string(items) +
             " ranked sentences, " + std::to_string(corpus.sentence_count()) + " in corpus";
}

void weak_label_oracle(Check& c) {
  synth::WorldSpec spec;
  spec.topics = 3;
  spec.threads = 6;
  spec.thread_turns = 6;
  spec.grounded_fraction = 1.0;
  const synth::World w = synth::make_world(spec);
  c.that(w.documents.size() == 6, "mini-world should have 6 documents");
  const AnalyzerConfig a = synthetic_analyzer();
  const Corpus corpus = Corpus::build(w.documents, a);
  OverlapScorer scorer;
  HashingEmbedder embedder(64);
  const TrainingSet set = build_training_set(w.threads, corpus, scorer, embedder, {});
  c.that(set.failures.empty(), "pipeline reported failures");
  c.that(!set.records.empty(), "no training records");
  reference::LabelSets got;
  std::size_t labels = 0;
  for (const auto& r : set.records) {
    auto& mine = got[r.conversation.dialogue_id];
    for (const auto& l : r.labels) mine.emplace(l.sentence.str(), std::string(to_string(l.label)));
    labels += r.labels.size();
  }
  const reference::LabelSets want = reference::weak_labels(reference::World(w.documents, a), w.threads, {});
  c.that(got == want, "label sets differ from the reference");
  c.detail = std::to_string(set.records.size()) + " conversations, " + std::to_string(labels) + " labels";
}

void distribution_invariants(Check& c) {
  synth::Rng rng(2024);
  const std::vector<std::string> vocab = {"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7"};
  std::string all;
  for (const auto& v : vocab) all += v + " ";
  AnalyzerConfig a;
  a.stemmer = StemmerKind::none;
  const Corpus corpus = Corpus::build({Document{"D", "", {{"S", "", {all, "w0 w0 w1"}}}}}, a);

  auto random_turn = [&] {
    TurnTokens t(1 + rng.below(8));
    for (auto& tok : t) tok = vocab[rng.below(3 + rng.below(vocab.size() - 2))];
    return t;
  };
  auto random_turns = [&](std::size_t max) {
    std::vector<TurnTokens> turns(1 + rng.below(max));
    for (auto& t : turns) t = random_turn();
    return turns;
  };
  auto sums_to_one = [&](const TermDist& d, const char* what) { c.near(d.total(), 1.0, 1e-9, what); };

  const std::size_t cases = 10000;
  for (std::size_t i = 0; i < cases; ++i) {
    const auto turns = random_turns(6);
    const double beta = rng.unit();
    const double delta = rng.below(4) == 0 ? 1e-9 : rng.unit() * 2;
    const TermDist m = mle(turns[0]);
    sums_to_one(m, "mle");
    const TermDist g_doc = doc_mixture(turns, beta);
    const TermDist g_sent = sent_mixture(turns, beta, delta);
    sums_to_one(g_doc, "doc_mixture");
    sums_to_one(g_sent, "sent_mixture");
    const auto future = random_turns(4);
    const auto hf = history_future_mixtures(turns, future, delta);
    sums_to_one(hf.history, "history mixture");
    sums_to_one(hf.future, "future mixture");

    DecayParams dp;
    dp.delta = delta;
    dp.first = 1 + static_cast<int>(rng.below(5));
    dp.last = dp.first + static_cast<int>(rng.below(8));
    dp.pivot = static_cast<int>(rng.below(16));
    const auto alpha = decay_weights(dp);
    double total = 0;
    for (double x : alpha) total += x;
    c.near(total, 1.0, 1e-9, "decay weights");
    for (int p = dp.first; p < dp.last; ++p)
      for (int q = p + 1; q <= dp.last; ++q)
        if (std::abs(dp.pivot - p) < std::abs(dp.pivot - q))
          c.that(alpha[p - dp.first] >= alpha[q - dp.first], "decay not monotone");

    // Gibbs: CE(p, q) >= H(p) = CE(p, p) for every q covering p.
    const double h = entropy(g_doc);
    c.near(cross_entropy(g_doc, g_doc), h, 1e-12, "CE(p,p) = H(p)");
    const DirichletModel q(random_turn(), 1 + rng.unit() * 2000, corpus.stats());
    c.that(cross_entropy(g_doc, q) >= h - 1e-12, "Gibbs (Dirichlet q)");
    const bool covered = std::all_of(g_sent.begin(), g_sent.end(),
                                     [&](const auto& kv) { return g_doc.prob(kv.first) > 0; });
    if (covered)
      c.that(cross_entropy(g_sent, g_doc) >= entropy(g_sent) - 1e-12, "Gibbs (mixture q)");

    std::vector<double> values(1 + rng.below(12));
    for (auto& v : values)
      v = rng.below(10) == 0 ? -std::numeric_limits<double>::infinity() : (rng.unit() - 0.5) * 100;
    if (rng.below(5) == 0) std::fill(values.begin(), values.end(), values[0]);
    for (double v : minmax_normalize(values)) c.that(v >= 0.0 && v <= 1.0, "minmax out of [0,1]");
  }
  c.detail = std::to_string(cases) + " cases";
}

void permutation_calibration(Check& c) {
  const std::size_t trials = 1000;
  const std::size_t pairs = 20;
  std::size_t rejected = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    synth::Rng rng(1000 + t);
    std::vector<double> a(pairs), b(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
      a[i] = rng.unit();
      b[i] = rng.unit();
    }
    if (permutation_test(a, b, {10000, t}) <= 0.05) ++rejected;
  }
  const double rate = static_cast<double>(rejected) / trials;
  c.near(rate, 0.05, 0.02, "rejection rate");
  std::ostringstream s;
  s << "rejection rate " << rate << " over " << trials << " null trials";
  c.detail = s.str();
}

// Ranks by (score desc, id asc), computed without the library's list code.
std::map<std::string, std::size_t> brute_ranks(std::vector<std::pair<std::string, double>> scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < scored.size(); ++i) out[scored[i].first] = i + 1;
  return out;
}

std::vector<std::pair<std::string, double>> brute_order(std::map<std::string, double> scores) {
  std::vector<std::pair<std::string, double>> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  return v;
}

void protocol_conformance(Check& c) {
  const synth::World w = synth::make_world({});
  const Corpus corpus = Corpus::build(w.documents, synthetic_analyzer());
  SubprocessScorer stub = stub_scorer();
  const InitialRankerParams params;

  auto stub_overlap = [&](const std::string& query, const std::string& id) {
    const std::string text = corpus.sentence_text(*corpus.resolve(id));
    return OverlapScorer::overlap(truncate_tokens(query, 64), truncate_tokens(text, 112));
  };

  Run fused_a;
  std::size_t lists = 0;
  for (const Thread& thread : w.threads) {
    const Dialogue d = as_dialogue(thread);
    const RankedList candidates = final_rank(d, params, corpus);

    // Single-turn reranking against a hand-sorted stub ranking.
    const std::string& last = d.turns.back().text;
    std::map<std::string, double> expected;
    for (const auto& item : candidates.items()) expected[item.id] = stub_overlap(last, item.id);
    const RankedList ext = rerank_external(last, candidates, stub, corpus);
    const auto want_ext = brute_order(expected);
    c.that(ext.size() == want_ext.size(), d.dialogue_id + ": external length");
    for (std::size_t r = 0; r < std::min(ext.size(), want_ext.size()); ++r) {
      c.that(ext[r].id == want_ext[r].first, d.dialogue_id + ": external order");
      c.that(ext[r].score == want_ext[r].second, d.dialogue_id + ": external score");
    }

    // Per-turn RRF computed from scratch.
    std::map<std::string, double> rrf_scores;
    for (const auto& item : candidates.items()) rrf_scores[item.id] = 0.0;
    for (const Turn& turn : d.turns) {
      if (corpus.analyze_query_text(turn.text).empty()) continue;
      std::vector<std::pair<std::string, double>> scored;
      for (const auto& item : candidates.items()) scored.emplace_back(item.id, stub_overlap(turn.text, item.id));
      for (const auto& [id, rank] : brute_ranks(scored)) rrf_scores[id] += 1.0 / (60.0 + rank);
    }
    const RankedList fused = ext_fuse(d.turns, candidates, stub, {}, corpus);
    const auto want_fused = brute_order(rrf_scores);
    c.that(fused.size() == want_fused.size(), d.dialogue_id + ": ext_fuse length");
    for (std::size_t r = 0; r < std::min(fused.size(), want_fused.size()); ++r) {
      c.that(fused[r].id == want_fused[r].first, d.dialogue_id + ": ext_fuse order");
      c.near(fused[r].score, want_fused[r].second, 1e-15, d.dialogue_id + ": ext_fuse score");
    }
    fused_a[d.dialogue_id] = fused;
    ++lists;
  }

  // Determinism: fresh scorer process, fresh ranking, same bytes.
  SubprocessScorer again = stub_scorer();
  Run fused_b, init_a, init_b;
  for (const Thread& thread : w.threads) {
    const Dialogue d = as_dialogue(thread);
    init_a[d.dialogue_id] = final_rank(d, params, corpus);
    init_b[d.dialogue_id] = final_rank(d, params, corpus);
    fused_b[d.dialogue_id] = ext_fuse(d.turns, init_b[d.dialogue_id], again, {}, corpus);
  }
  c.that(run_bytes(init_a) == run_bytes(init_b), "initial run not byte-identical");
  c.that(run_bytes(fused_a) == run_bytes(fused_b), "ext_fuse run not byte-identical");

  std::vector<QueryInfo> queries;
  for (const Thread& thread : w.threads) queries.push_back({thread.thread_id, as_dialogue(thread).grounded});
  auto split_bytes = [&](std::uint64_t seed) {
    std::ostringstream out;
    for (const Split& s : make_splits(queries, {50, seed})) {
      for (const auto& id : s.validation) out << id << ' ';
      out << "| ";
      for (const auto& id : s.test) out << id << ' ';
      out << '\n';
    }
    return out.str();
  };
  c.that(split_bytes(11) == split_bytes(11), "splits differ under the same seed");
  c.that(split_bytes(11) != split_bytes(12), "splits ignore the seed");
  c.detail = std::to_string(lists) + " dialogues via the stub scorer process";
}

void context_echo(Check& c) {
  double init_map = 0, lm_map = 0, bm25_map = 0, ext_map = 0;
  SubprocessScorer stub = stub_scorer();
  const int seeds = 10;
  for (int seed = 1; seed <= seeds; ++seed) {
    synth::WorldSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.threads = 120;
    const synth::World w = synth::make_world(spec);
    const Corpus corpus = Corpus::build(w.documents, synthetic_analyzer());
    Run init, lm, bm25, ext;
    std::vector<std::string> queries;
    for (const Dialogue& d : distill_test_dialogues(w.threads)) {
      if (w.qrels.relevant_count(d.dialogue_id) == 0) continue;
      queries.push_back(d.dialogue_id);
      const RankedList candidates = final_rank(d, {}, corpus);
      const std::string& last = d.turns.back().text;
      init[d.dialogue_id] = candidates;
      lm[d.dialogue_id] = rerank_lm(last, candidates, 1000, corpus);
      bm25[d.dialogue_id] = rerank_bm25(last, candidates, {}, corpus);
      ext[d.dialogue_id] = ext_fuse(d.turns, candidates, stub, {}, corpus);
    }
    c.that(!queries.empty(), "seed " + std::to_string(seed) + ": no judged dialogues");
    init_map += mean_metric(Metric::map, init, w.qrels, queries) / seeds;
    lm_map += mean_metric(Metric::map, lm, w.qrels, queries) / seeds;
    bm25_map += mean_metric(Metric::map, bm25, w.qrels, queries) / seeds;
    ext_map += mean_metric(Metric::map, ext, w.qrels, queries) / seeds;
  }
  c.that(lm_map < init_map, "LM rerank does not degrade the initial ranker");
  c.that(bm25_map < init_map, "BM25 rerank does not degrade the initial ranker");
  c.that(ext_map > init_map, "ext_fuse does not improve the initial ranker");
  std::ostringstream s;
  s.precision(4);
  s << std::fixed << "mean MAP over " << seeds << " worlds: lm " << lm_map << ", bm25 " << bm25_map
    << " < init " << init_map << " < ext_fuse " << ext_map;
  c.detail = s.str();
}

struct Criterion {
  const char* name;
  double budget_seconds;
  void (*body)(Check&);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"formula-oracles", 1, formula_oracles},
      {"pipeline-oracle", 5, pipeline_oracle},
      {"weak-label-oracle", 5, weak_label_oracle},
      {"distribution-invariants", 30, distribution_invariants},
      {"permutation-calibration", 60, permutation_calibration},
      {"protocol-conformance", 60, protocol_conformance},
      {"context-echo", 120, context_echo},
  };
  int failed = 0;
  for (const auto& criterion : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.body(check);
    } catch (const std::exception& e) {
      check.that(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check.that(seconds <= criterion.budget_seconds,
               "took " + std::to_string(seconds) + " s, budget " +
                   std::to_string(criterion.budget_seconds) + " s");
    std::ostringstream line;
    line.precision(3);
    line << (check.ok() ? "PASS " : "FAIL ") << criterion.name << " (" << std::fixed << seconds << " s)";
    if (!check.detail.empty()) line << ": " << check.detail;
    if (!check.ok()) line << " | " << check.failures();
    std::cout << line.str() << std::endl;
    if (!check.ok()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
