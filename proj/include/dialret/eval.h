#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dialret/dialogue.h"
#include "dialret/ranked_list.h"

namespace dialret {

// Binary relevance judgments keyed by (query_id, item_id).
class Qrels {
 public:
  void add(const std::string& query_id, const std::string& item_id, int relevance);
  // 0 for unjudged items.
  int relevance(const std::string& query_id, const std::string& item_id) const;
  std::size_t relevant_count(const std::string& query_id) const;
  bool has_query(const std::string& query_id) const { return judgments_.count(query_id) > 0; }
  std::vector<std::string> queries() const;
  const std::map<std::string, int>& judged(const std::string& query_id) const;

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

// `query_id 0 item_id rel` per line.
Qrels read_qrels(std::istream& in);
Qrels load_qrels(const std::string& path);
void write_qrels(std::ostream& out, const Qrels& qrels);

// R counts relevant items in the judged pool. All three throw when the query
// has no relevant item.
double average_precision(const RankedList& run, const Qrels& qrels,
                         const std::string& query_id);
double ndcg_at_k(const RankedList& run, const Qrels& qrels,
                 const std::string& query_id, std::size_t k = 5);
double reciprocal_rank(const RankedList& run, const Qrels& qrels,
                       const std::string& query_id);

enum class Metric { map, ndcg5, mrr };
std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view name);
double metric_value(Metric metric, const RankedList& run, const Qrels& qrels,
                    const std::string& query_id);

// Mean over `queries`; a query missing from the run scores 0.
double mean_metric(Metric metric, const Run& run, const Qrels& qrels,
                   std::span<const std::string> queries);

struct QueryInfo {
  std::string id;
  bool grounded = false;
};

struct SplitSpec {
  std::size_t n_splits = 50;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Stratified halves: each split puts half of the grounded and half of the
// ungrounded queries on each side. Stratum j's odd query goes to validation
// when (split + j) is even.
std::vector<Split> make_splits(std::span<const QueryInfo> queries, const SplitSpec& spec);

struct PermutationOptions {
  std::size_t permutations = 10000;
  std::uint64_t seed = 0;
};

// Paired two-tailed sign-flip test on the mean difference, with +1
// smoothing: p = (#{|mean(d*)| >= |mean(d)|} + 1) / (permutations + 1).
double permutation_test(std::span<const double> a, std::span<const double> b,
                        const PermutationOptions& options = {});

// min(1, p * comparisons) for every raw p-value.
std::vector<double> bonferroni(std::span<const double> raw_p);

struct PairComparison {
  std::string system_a;
  std::string system_b;
  double mean_difference = 0.0;  // mean(a - b)
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  bool reject = false;
};

struct SignificanceReport {
  double alpha = 0.05;
  std::vector<PairComparison> comparisons;
};

// Every unordered system pair, Bonferroni-corrected over the pair count.
SignificanceReport compare_systems(const std::map<std::string, std::vector<double>>& per_split,
                                   double alpha = 0.05,
                                   const PermutationOptions& options = {});

using GridPoint = std::map<std::string, double>;

// Cartesian product; the first axis varies slowest.
std::vector<GridPoint> make_grid(
    const std::vector<std::pair<std::string, std::vector<double>>>& axes);

struct TuneResult {
  std::size_t best_index = 0;
  GridPoint best;
  double best_value = 0.0;
  std::vector<double> values;  // objective per grid point
};

// Exhaustive argmax; ties go to the earliest grid point.
TuneResult tune(std::span<const GridPoint> grid,
                const std::function<double(const GridPoint&)>& objective);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) standard deviation; 0 when n = 1
  std::size_t n = 0;
};

Summary summarize(std::span<const double> values);

struct ReportRow {
  std::string system;
  std::string metric;
  Summary summary;
};

// Aligned text table with `mean±std` cells (systems by rows, metrics by
// columns), and one JSON record per (system, metric).
std::string format_report_table(std::span<const ReportRow> rows);
std::string format_report_jsonl(std::span<const ReportRow> rows);
std::string format_significance(const SignificanceReport& report);

struct Distribution {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

Distribution describe(std::vector<double> values);

struct DialogueTypeStats {
  std::size_t dialogues = 0;
  Distribution relevant_count;
  // Over dialogues whose run retrieves at least one relevant item.
  Distribution first_relevant_rank;
  std::size_t no_relevant_retrieved = 0;
};

// Keyed by "grounded" and "ungrounded"; types without dialogues are absent.
using DatasetStats = std::map<std::string, DialogueTypeStats>;

DatasetStats dataset_stats(std::span<const Dialogue> dialogues, const Qrels& qrels,
                           const Run& run);
std::string format_dataset_stats(const DatasetStats& stats);

}  // namespace dialret
