#include "dialret/eval.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dialret/error.h"

namespace dialret {

namespace {

std::size_t require_relevant(const Qrels& qrels, const std::string& query_id) {
  const std::size_t r = qrels.relevant_count(query_id);
  if (r == 0) throw Error("query has no relevant items: " + query_id);
  return r;
}

// Uniform integer in [0, bound) from raw 64-bit engine output by rejection,
// so splits are identical across standard library implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

void shuffle(std::vector<std::string>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void Qrels::add(const std::string& query_id, const std::string& item_id, int relevance) {
  judgments_[query_id][item_id] = relevance > 0 ? 1 : 0;
}

int Qrels::relevance(const std::string& query_id, const std::string& item_id) const {
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return 0;
  auto it = q->second.find(item_id);
  return it == q->second.end() ? 0 : it->second;
}

std::size_t Qrels::relevant_count(const std::string& query_id) const {
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return 0;
  std::size_t n = 0;
  for (const auto& [item, rel] : q->second) n += rel > 0;
  return n;
}

std::vector<std::string> Qrels::queries() const {
  std::vector<std::string> out;
  for (const auto& [q, items] : judgments_) out.push_back(q);
  return out;
}

const std::map<std::string, int>& Qrels::judged(const std::string& query_id) const {
  static const std::map<std::string, int> kEmpty;
  auto q = judgments_.find(query_id);
  return q == judgments_.end() ? kEmpty : q->second;
}

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string qid, iter, item, extra;
    int rel = 0;
    if (!(fields >> qid >> iter >> item >> rel) || (fields >> extra))
      throw Error("qrels line " + std::to_string(line_no) + ": expected 4 columns");
    qrels.add(qid, item, rel);
  }
  return qrels;
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open qrels file: " + path);
  return read_qrels(in);
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& q : qrels.queries())
    for (const auto& [item, rel] : qrels.judged(q)) out << q << " 0 " << item << ' ' << rel << '\n';
}

double average_precision(const RankedList& run, const Qrels& qrels,
                         const std::string& query_id) {
  const std::size_t r = require_relevant(qrels, query_id);
  double sum = 0.0;
  std::size_t hits = 0;
  for (const auto& item : run.items()) {
    if (qrels.relevance(query_id, item.id) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(item.rank);
    }
  }
  return sum / static_cast<double>(r);
}

double ndcg_at_k(const RankedList& run, const Qrels& qrels,
                 const std::string& query_id, std::size_t k) {
  const std::size_t r = require_relevant(qrels, query_id);
  double dcg = 0.0;
  for (const auto& item : run.items()) {
    if (item.rank > k) break;
    if (qrels.relevance(query_id, item.id) > 0)
      dcg += 1.0 / std::log2(static_cast<double>(item.rank) + 1.0);
  }
  double ideal = 0.0;
  for (std::size_t i = 1; i <= std::min(k, r); ++i)
    ideal += 1.0 / std::log2(static_cast<double>(i) + 1.0);
  return dcg / ideal;
}

double reciprocal_rank(const RankedList& run, const Qrels& qrels,
                       const std::string& query_id) {
  require_relevant(qrels, query_id);
  for (const auto& item : run.items())
    if (qrels.relevance(query_id, item.id) > 0) return 1.0 / static_cast<double>(item.rank);
  return 0.0;
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::map: return "MAP";
    case Metric::ndcg5: return "NDCG@5";
    case Metric::mrr: return "MRR";
  }
  return "?";
}

Metric metric_from_string(std::string_view name) {
  std::string n(name);
  for (char& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (n == "map") return Metric::map;
  if (n == "ndcg@5" || n == "ndcg5" || n == "ndcg") return Metric::ndcg5;
  if (n == "mrr") return Metric::mrr;
  throw Error("unknown metric: " + std::string(name));
}

double metric_value(Metric metric, const RankedList& run, const Qrels& qrels,
                    const std::string& query_id) {
  switch (metric) {
    case Metric::map: return average_precision(run, qrels, query_id);
    case Metric::ndcg5: return ndcg_at_k(run, qrels, query_id, 5);
    case Metric::mrr: return reciprocal_rank(run, qrels, query_id);
  }
  throw Error("unknown metric");
}

double mean_metric(Metric metric, const Run& run, const Qrels& qrels,
                   std::span<const std::string> queries) {
  if (queries.empty()) throw Error("mean metric over an empty query set");
  static const RankedList kEmpty;
  double sum = 0.0;
  for (const auto& q : queries) {
    auto it = run.find(q);
    sum += metric_value(metric, it == run.end() ? kEmpty : it->second, qrels, q);
  }
  return sum / static_cast<double>(queries.size());
}

std::vector<Split> make_splits(std::span<const QueryInfo> queries, const SplitSpec& spec) {
  std::vector<std::string> strata[2];
  std::set<std::string> seen;
  for (const auto& q : queries) {
    if (!seen.insert(q.id).second) throw Error("duplicate query id in split input: " + q.id);
    strata[q.grounded ? 0 : 1].push_back(q.id);
  }
  for (int j = 0; j < 2; ++j) {
    if (strata[j].size() < 2)
      throw Error(std::string(j == 0 ? "grounded" : "ungrounded") +
                  " stratum needs at least 2 queries");
    std::sort(strata[j].begin(), strata[j].end());
  }

  std::vector<Split> splits;
  splits.reserve(spec.n_splits);
  for (std::size_t s = 0; s < spec.n_splits; ++s) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                      static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    Split split;
    for (int j = 0; j < 2; ++j) {
      std::vector<std::string> ids = strata[j];
      shuffle(ids, rng);
      std::size_t half = ids.size() / 2;
      if (ids.size() % 2 == 1 && (s + static_cast<std::size_t>(j)) % 2 == 0) ++half;
      split.validation.insert(split.validation.end(), ids.begin(),
                              ids.begin() + static_cast<std::ptrdiff_t>(half));
      split.test.insert(split.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(half),
                        ids.end());
    }
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

double permutation_test(std::span<const double> a, std::span<const double> b,
                        const PermutationOptions& options) {
  if (a.size() != b.size())
    throw Error("permutation test: vectors differ in length");
  if (a.empty()) throw Error("permutation test: empty input");
  if (options.permutations == 0) throw Error("permutation test: zero permutations");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double observed = std::abs(std::accumulate(d.begin(), d.end(), 0.0)) /
                          static_cast<double>(n);
  // Relative slack so floating-point reassociation cannot break exact ties.
  const double threshold = observed - 1e-12 * std::max(1.0, observed);

  std::size_t extreme = 0;
  const std::uint64_t key = splitmix64(options.seed);
  for (std::size_t p = 0; p < options.permutations; ++p) {
    std::uint64_t state = key ^ splitmix64(p + 1);
    std::uint64_t bits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) {
        state = splitmix64(state);
        bits = state;
      }
      sum += (bits & 1ULL) ? -d[i] : d[i];
      bits >>= 1;
    }
    if (std::abs(sum) / static_cast<double>(n) >= threshold) ++extreme;
  }
  return static_cast<double>(extreme + 1) / static_cast<double>(options.permutations + 1);
}

std::vector<double> bonferroni(std::span<const double> raw_p) {
  std::vector<double> out;
  out.reserve(raw_p.size());
  const double m = static_cast<double>(raw_p.size());
  for (double p : raw_p) out.push_back(std::min(1.0, p * m));
  return out;
}

SignificanceReport compare_systems(const std::map<std::string, std::vector<double>>& per_split,
                                   double alpha, const PermutationOptions& options) {
  SignificanceReport report;
  report.alpha = alpha;
  std::vector<double> raw;
  for (auto a = per_split.begin(); a != per_split.end(); ++a) {
    for (auto b = std::next(a); b != per_split.end(); ++b) {
      PairComparison c;
      c.system_a = a->first;
      c.system_b = b->first;
      if (a->second.size() != b->second.size())
        throw Error("systems " + a->first + " and " + b->first +
                    " have different split counts");
      double diff = 0.0;
      for (std::size_t i = 0; i < a->second.size(); ++i) diff += a->second[i] - b->second[i];
      c.mean_difference = diff / static_cast<double>(a->second.size());
      c.raw_p = permutation_test(a->second, b->second, options);
      raw.push_back(c.raw_p);
      report.comparisons.push_back(std::move(c));
    }
  }
  const auto adjusted = bonferroni(raw);
  for (std::size_t i = 0; i < adjusted.size(); ++i) {
    report.comparisons[i].adjusted_p = adjusted[i];
    report.comparisons[i].reject = adjusted[i] <= alpha;
  }
  return report;
}

std::vector<GridPoint> make_grid(
    const std::vector<std::pair<std::string, std::vector<double>>>& axes) {
  std::vector<GridPoint> grid{GridPoint{}};
  for (const auto& [name, values] : axes) {
    if (values.empty()) throw Error("grid axis '" + name + "' has no values");
    std::vector<GridPoint> next;
    for (const auto& point : grid) {
      for (double v : values) {
        GridPoint p = point;
        p[name] = v;
        next.push_back(std::move(p));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

TuneResult tune(std::span<const GridPoint> grid,
                const std::function<double(const GridPoint&)>& objective) {
  if (grid.empty()) throw Error("tuning grid is empty");
  TuneResult result;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = objective(grid[i]);
    result.values.push_back(v);
    if (i == 0 || v > result.best_value) {
      result.best_value = v;
      result.best_index = i;
    }
  }
  result.best = grid[result.best_index];
  return result;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) throw Error("summary of an empty sample");
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) {
    // A constant sample would otherwise pick up rounding noise.
    s.mean = *lo;
  } else {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::string format_report_table(std::span<const ReportRow> rows) {
  std::vector<std::string> systems, metrics;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  for (const auto& r : rows) {
    if (std::find(systems.begin(), systems.end(), r.system) == systems.end())
      systems.push_back(r.system);
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end())
      metrics.push_back(r.metric);
    cells[{r.system, r.metric}] =
        fixed(r.summary.mean, 4) + "±" + fixed(r.summary.stddev, 4);
  }
  std::size_t name_width = 6;
  for (const auto& s : systems) name_width = std::max(name_width, s.size());
  std::size_t cell_width = 15;
  for (const auto& m : metrics) cell_width = std::max(cell_width, m.size());

  auto pad = [](std::string s, std::size_t w) {
    // "±" is two bytes but one column wide.
    std::size_t visible = s.size();
    if (s.find("±") != std::string::npos) --visible;
    if (visible < w) s.append(w - visible, ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("system", name_width);
  for (const auto& m : metrics) out << "  " << pad(m, cell_width);
  out << '\n';
  for (const auto& s : systems) {
    out << pad(s, name_width);
    for (const auto& m : metrics) {
      auto it = cells.find({s, m});
      out << "  " << pad(it == cells.end() ? "-" : it->second, cell_width);
    }
    out << '\n';
  }
  std::string text = out.str();
  // Trailing spaces are noise in golden files.
  std::string trimmed;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line + '\n';
  }
  return trimmed;
}

std::string format_report_jsonl(std::span<const ReportRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["system"] = r.system;
    j["metric"] = r.metric;
    j["mean"] = r.summary.mean;
    j["std"] = r.summary.stddev;
    j["n"] = r.summary.n;
    out += j.dump() + '\n';
  }
  return out;
}

std::string format_significance(const SignificanceReport& report) {
  std::ostringstream out;
  out << "system_a system_b mean_diff raw_p adjusted_p reject(alpha="
      << fixed(report.alpha, 2) << ")\n";
  for (const auto& c : report.comparisons)
    out << c.system_a << ' ' << c.system_b << ' ' << fixed(c.mean_difference, 6) << ' '
        << fixed(c.raw_p, 6) << ' ' << fixed(c.adjusted_p, 6) << ' '
        << (c.reject ? "yes" : "no") << '\n';
  return out.str();
}

Distribution describe(std::vector<double> values) {
  Distribution d;
  d.n = values.size();
  if (values.empty()) return d;
  const Summary s = summarize(values);
  d.mean = s.mean;
  d.stddev = s.stddev;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  d.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
  return d;
}

DatasetStats dataset_stats(std::span<const Dialogue> dialogues, const Qrels& qrels,
                           const Run& run) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> samples;
  DatasetStats stats;
  for (const auto& d : dialogues) {
    const std::string type = d.grounded ? "grounded" : "ungrounded";
    auto& [counts, ranks] = samples[type];
    DialogueTypeStats& t = stats[type];
    ++t.dialogues;
    counts.push_back(static_cast<double>(qrels.relevant_count(d.dialogue_id)));
    std::optional<std::size_t> first;
    if (auto it = run.find(d.dialogue_id); it != run.end()) {
      for (const auto& item : it->second.items()) {
        if (qrels.relevance(d.dialogue_id, item.id) > 0) {
          first = item.rank;
          break;
        }
      }
    }
    if (first)
      ranks.push_back(static_cast<double>(*first));
    else
      ++t.no_relevant_retrieved;
  }
  for (auto& [type, s] : samples) {
    stats[type].relevant_count = describe(std::move(s.first));
    stats[type].first_relevant_rank = describe(std::move(s.second));
  }
  return stats;
}

std::string format_dataset_stats(const DatasetStats& stats) {
  std::ostringstream out;
  out << "type dialogues rel_avg rel_median rel_std first_rank_avg first_rank_median "
         "first_rank_std no_relevant_retrieved\n";
  for (const auto& [type, t] : stats)
    out << type << ' ' << t.dialogues << ' ' << fixed(t.relevant_count.mean, 4) << ' '
        << fixed(t.relevant_count.median, 4) << ' ' << fixed(t.relevant_count.stddev, 4) << ' '
        << fixed(t.first_relevant_rank.mean, 4) << ' '
        << fixed(t.first_relevant_rank.median, 4) << ' '
        << fixed(t.first_relevant_rank.stddev, 4) << ' ' << t.no_relevant_retrieved << '\n';
  return out.str();
}

}  // namespace dialret
