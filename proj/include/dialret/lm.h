#pragma once

#include <cmath>
#include <concepts>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dialret/corpus.h"
#include "dialret/error.h"

namespace dialret {

// Sparse unigram distribution. Every stored probability is > 0 and the
// values sum to one. Iteration order is lexicographic by term.
class TermDist {
 public:
  TermDist() = default;

  // Normalizes non-negative weights; zero weights are dropped.
  static TermDist from_weights(const std::map<std::string, double>& weights);

  double prob(std::string_view term) const;
  std::size_t size() const { return probs_.size(); }
  bool empty() const { return probs_.empty(); }
  auto begin() const { return probs_.begin(); }
  auto end() const { return probs_.end(); }
  double total() const;

 private:
  std::map<std::string, double, std::less<>> probs_;
};

TermDist mle(std::span<const std::string> tokens);

double entropy(const TermDist& p);

// Dirichlet-smoothed language model of a text:
// p(w|x) = (c(w,x) + mu * p(w|C)) / (|x| + mu).
class DirichletModel {
 public:
  DirichletModel(std::span<const std::string> tokens, double mu,
                 const CollectionStats& stats);

  double prob(std::string_view term) const;
  double mu() const { return mu_; }
  std::size_t length() const { return length_; }

 private:
  std::unordered_map<std::string, std::uint32_t> counts_;
  std::size_t length_ = 0;
  double mu_ = 0.0;
  const CollectionStats* stats_ = nullptr;
};

// -sum_{w in support(p)} p(w) log q(w), natural log.
template <typename Q>
  requires std::invocable<Q&, const std::string&>
double cross_entropy(const TermDist& p, Q&& q) {
  double ce = 0.0;
  for (const auto& [term, pw] : p) {
    const double qw = q(term);
    if (!(qw > 0.0))
      throw Error("zero probability under target model for term '" + term + "'");
    ce -= pw * std::log(qw);
  }
  return ce;
}

inline double cross_entropy(const TermDist& p, const TermDist& q) {
  return cross_entropy(p, [&q](const std::string& w) { return q.prob(w); });
}

inline double cross_entropy(const TermDist& p, const DirichletModel& q) {
  return cross_entropy(p, [&q](const std::string& w) { return q.prob(w); });
}

// Exponential decay over the turn positions [first, last] around `pivot`:
// alpha_i = delta e^{-delta |pivot - i|} / sum_j delta e^{-delta |pivot - j|}.
struct DecayParams {
  double delta = 0.01;
  int pivot = 1;
  int first = 1;
  int last = 1;
};

std::vector<double> decay_weights(const DecayParams& params);

using TurnTokens = std::vector<std::string>;

// Weighted mixture of per-component MLEs. Empty components are dropped and
// the remaining weights renormalized; throws if nothing with positive
// weight remains.
TermDist mixture(std::span<const std::pair<double, const TurnTokens*>> components,
                 std::string_view what);

// (1-beta) p(w|t_1) + beta/(n-1) sum_{i=2..n} p(w|t_i); n = 1 collapses to t_1.
TermDist doc_mixture(std::span<const TurnTokens> turns, double beta);

// (1-beta) p(w|t_n) + beta sum_{i<n} alpha_i p(w|t_i), alphas decaying away
// from pivot n-1 over {1..n-1}.
TermDist sent_mixture(std::span<const TurnTokens> turns, double beta,
                      double delta);

// History turns t_1..t_n weighted around pivot n.
TermDist history_mixture(std::span<const TurnTokens> history, double delta);
// Future turns t_{n+2}..t_m weighted around pivot n+2.
TermDist future_mixture(std::span<const TurnTokens> future, double delta);

struct HistoryFutureModels {
  TermDist history;
  TermDist future;
};

HistoryFutureModels history_future_mixtures(std::span<const TurnTokens> history,
                                            std::span<const TurnTokens> future,
                                            double delta);

}  // namespace dialret
