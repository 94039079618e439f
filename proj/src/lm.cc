#include "dialret/lm.h"

#include <numeric>

namespace dialret {

TermDist TermDist::from_weights(const std::map<std::string, double>& weights) {
  double total = 0.0;
  for (const auto& [term, w] : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw Error("invalid weight for term '" + term + "'");
    total += w;
  }
  TermDist dist;
  if (total <= 0.0) return dist;
  for (const auto& [term, w] : weights)
    if (w > 0.0) dist.probs_.emplace(term, w / total);
  return dist;
}

double TermDist::prob(std::string_view term) const {
  auto it = probs_.find(term);
  return it == probs_.end() ? 0.0 : it->second;
}

double TermDist::total() const {
  double sum = 0.0;
  for (const auto& [term, p] : probs_) sum += p;
  return sum;
}

TermDist mle(std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error("empty text for MLE");
  std::map<std::string, double> counts;
  for (const auto& t : tokens) counts[t] += 1.0;
  return TermDist::from_weights(counts);
}

double entropy(const TermDist& p) {
  double h = 0.0;
  for (const auto& [term, pw] : p) h -= pw * std::log(pw);
  return h;
}

DirichletModel::DirichletModel(std::span<const std::string> tokens, double mu,
                               const CollectionStats& stats)
    : length_(tokens.size()), mu_(mu), stats_(&stats) {
  if (mu < 0.0) throw Error("Dirichlet mu must be non-negative");
  if (mu == 0.0 && tokens.empty())
    throw Error("Dirichlet model undefined for empty text with mu = 0");
  for (const auto& t : tokens) ++counts_[t];
}

double DirichletModel::prob(std::string_view term) const {
  auto it = counts_.find(std::string(term));
  const double c = it == counts_.end() ? 0.0 : it->second;
  const double background = mu_ > 0.0 ? mu_ * stats_->collection_prob(term) : 0.0;
  return (c + background) / (static_cast<double>(length_) + mu_);
}

std::vector<double> decay_weights(const DecayParams& p) {
  if (p.last < p.first) throw Error("decay index set is empty");
  if (!(p.delta > 0.0)) throw Error("decay rate must be positive");
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(p.last - p.first + 1));
  for (int i = p.first; i <= p.last; ++i)
    w.push_back(p.delta * std::exp(-p.delta * std::abs(p.pivot - i)));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

TermDist mixture(std::span<const std::pair<double, const TurnTokens*>> components,
                 std::string_view what) {
  double mass = 0.0;
  for (const auto& [weight, tokens] : components)
    if (!tokens->empty()) mass += weight;
  if (!(mass > 0.0)) throw Error(std::string(what) + ": all turns empty after analysis");

  std::map<std::string, double> weights;
  for (const auto& [weight, tokens] : components) {
    if (tokens->empty() || weight <= 0.0) continue;
    const double per_token = weight / mass / static_cast<double>(tokens->size());
    for (const auto& t : *tokens) weights[t] += per_token;
  }
  return TermDist::from_weights(weights);
}

TermDist doc_mixture(std::span<const TurnTokens> turns, double beta) {
  if (turns.empty()) throw Error("doc mixture: dialogue has no turns");
  std::vector<std::pair<double, const TurnTokens*>> parts;
  if (turns.size() == 1) {
    parts.emplace_back(1.0, &turns[0]);
  } else {
    parts.emplace_back(1.0 - beta, &turns[0]);
    const double rest = beta / static_cast<double>(turns.size() - 1);
    for (std::size_t i = 1; i < turns.size(); ++i) parts.emplace_back(rest, &turns[i]);
  }
  return mixture(parts, "doc mixture");
}

TermDist sent_mixture(std::span<const TurnTokens> turns, double beta,
                      double delta) {
  if (turns.empty()) throw Error("sentence mixture: dialogue has no turns");
  const int n = static_cast<int>(turns.size());
  std::vector<std::pair<double, const TurnTokens*>> parts;
  if (n == 1) {
    parts.emplace_back(1.0, &turns[0]);
  } else {
    parts.emplace_back(1.0 - beta, &turns[n - 1]);
    const auto alpha = decay_weights({delta, n - 1, 1, n - 1});
    for (int i = 1; i <= n - 1; ++i) parts.emplace_back(beta * alpha[i - 1], &turns[i - 1]);
  }
  return mixture(parts, "sentence mixture");
}

TermDist history_mixture(std::span<const TurnTokens> history, double delta) {
  if (history.empty()) throw Error("history mixture: no history turns");
  const int n = static_cast<int>(history.size());
  const auto alpha = decay_weights({delta, n, 1, n});
  std::vector<std::pair<double, const TurnTokens*>> parts;
  for (int i = 0; i < n; ++i) parts.emplace_back(alpha[i], &history[i]);
  return mixture(parts, "history mixture");
}

TermDist future_mixture(std::span<const TurnTokens> future, double delta) {
  if (future.empty()) throw Error("future mixture: no future turns");
  // Positions n+2..m relative to the pivot n+2; only the offsets matter.
  const int m = static_cast<int>(future.size());
  const auto alpha = decay_weights({delta, 0, 0, m - 1});
  std::vector<std::pair<double, const TurnTokens*>> parts;
  for (int i = 0; i < m; ++i) parts.emplace_back(alpha[i], &future[i]);
  return mixture(parts, "future mixture");
}

HistoryFutureModels history_future_mixtures(std::span<const TurnTokens> history,
                                            std::span<const TurnTokens> future,
                                            double delta) {
  return {history_mixture(history, delta), future_mixture(future, delta)};
}

}  // namespace dialret
