// Command-line front end: index, distill, retrieve, rerank, fuse, weaklabel,
// evaluate, tune, significance and stats.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dialret/config.h"
#include "dialret/corpus.h"
#include "dialret/dialogue.h"
#include "dialret/error.h"
#include "dialret/eval.h"
#include "dialret/ranked_list.h"
#include "dialret/rerank.h"
#include "dialret/retrieval.h"
#include "dialret/scorer.h"
#include "dialret/weaklabel.h"

namespace {

using namespace dialret;

// Flag values are kept as strings and applied through Config::set so that
// flags, config files and --set share one parser and one validator.
struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::string log_level = "info";
  struct Bound {
    CLI::Option* option;
    std::string key;
    std::unique_ptr<std::string> value;
  };
  std::vector<Bound> bound;
};

void bind(CLI::App* app, Options& opts, const std::string& flag, const std::string& key,
          const std::string& help) {
  auto value = std::make_unique<std::string>();
  CLI::Option* o = app->add_option(flag, *value, help + " [" + key + "]");
  opts.bound.push_back({o, key, std::move(value)});
}

Config resolve_config(const Options& opts) {
  Config config;
  std::string path = opts.config_path;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnv)) path = env;
  if (!path.empty()) apply_config_file(path, config);
  for (const auto& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& b : opts.bound) {
    if (b.option->count() == 0) continue;
    try {
      config.set(b.key, *b.value);
    } catch (const Error& e) {
      throw Error(b.option->get_name() + ": " + e.what());
    }
  }
  config.validate();
  std::string resolved = config.resolved();
  if (!resolved.empty() && resolved.back() == '\n') resolved.pop_back();
  spdlog::info("resolved config{}{}\n{}", path.empty() ? "" : " from ", path, resolved);
  return config;
}

std::string require_path(const std::string& value, const std::string& flag) {
  if (value.empty()) throw Error(flag + " is required");
  return value;
}

std::ofstream open_output(const std::string& path, const std::string& flag) {
  std::ofstream out(require_path(path, flag));
  if (!out) throw Error(flag + ": cannot write " + path);
  return out;
}

template <typename F>
auto with_flag(const std::string& flag, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (std::string_view(e.what()).starts_with(flag)) throw;
    throw Error(flag + ": " + e.what());
  }
}

Corpus load_corpus(const Config& config) {
  if (!config.index.empty())
    return with_flag("--index", [&] { return Corpus::load_file(config.index); });
  if (!config.corpus.empty()) {
    Corpus c = with_flag("--corpus",
                         [&] { return ingest_corpus(config.corpus, config.analyzer()); });
    for (const auto& d : c.diagnostics())
      spdlog::warn("corpus record {}: {}", d.record, d.message);
    return c;
  }
  throw Error("--index or --corpus is required");
}

std::unique_ptr<Scorer> make_scorer(const Config& config) {
  if (config.scorer == "builtin:overlap") return std::make_unique<OverlapScorer>();
  return std::make_unique<SubprocessScorer>(config.handle(config.scorer));
}

std::unique_ptr<Embedder> make_embedder(const Config& config) {
  if (config.embedder == "builtin:hashing")
    return std::make_unique<HashingEmbedder>(config.embed_dimension);
  return std::make_unique<SubprocessEmbedder>(config.handle(config.embedder));
}

std::vector<Dialogue> read_dialogue_file(const std::string& path) {
  return with_flag("--dialogues", [&] { return load_dialogues(require_path(path, "--dialogues")); });
}

Run read_run_file(const std::string& path, const std::string& flag) {
  return with_flag(flag, [&] { return load_run(require_path(path, flag)); });
}

void write_run_file(const std::string& path, const Run& run) {
  auto out = open_output(path, "--output");
  write_run(out, run);
}

// "name=path" or a bare path named after its stem.
std::pair<std::string, std::string> named_run(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq != std::string::npos) return {spec.substr(0, eq), spec.substr(eq + 1)};
  return {std::filesystem::path(spec).stem().string(), spec};
}

std::vector<Metric> parse_metrics(const std::string& list) {
  std::vector<Metric> out;
  std::stringstream ss(list);
  for (std::string m; std::getline(ss, m, ',');)
    if (!m.empty()) out.push_back(metric_from_string(m));
  if (out.empty()) throw Error("--metrics: no metric given");
  return out;
}

// Queries with at least one relevant judgment, optionally restricted to the
// given dialogues, with their grounded flag.
std::vector<QueryInfo> judged_queries(const Qrels& qrels, const std::vector<Dialogue>* dialogues) {
  std::vector<QueryInfo> out;
  if (dialogues) {
    for (const auto& d : *dialogues)
      if (qrels.relevant_count(d.dialogue_id) > 0) out.push_back({d.dialogue_id, d.grounded});
  } else {
    for (const auto& q : qrels.queries())
      if (qrels.relevant_count(q) > 0) out.push_back({q, false});
  }
  if (out.empty()) throw Error("no query has a relevant judgment");
  return out;
}

using PerQuery = std::map<std::string, double>;

PerQuery per_query(Metric metric, const Run& run, const Qrels& qrels,
                   const std::vector<QueryInfo>& queries) {
  static const RankedList kEmpty;
  PerQuery out;
  for (const auto& q : queries) {
    auto it = run.find(q.id);
    out[q.id] = metric_value(metric, it == run.end() ? kEmpty : it->second, qrels, q.id);
  }
  return out;
}

double mean_over(const PerQuery& values, const std::vector<std::string>& ids) {
  if (ids.empty()) throw Error("empty query subset");
  double sum = 0.0;
  for (const auto& id : ids) sum += values.at(id);
  return sum / static_cast<double>(ids.size());
}

std::vector<std::string> of_type(const std::vector<std::string>& ids,
                                 const std::map<std::string, bool>& grounded, bool want) {
  std::vector<std::string> out;
  for (const auto& id : ids)
    if (grounded.at(id) == want) out.push_back(id);
  return out;
}

// --- commands ---------------------------------------------------------------

void cmd_index(const Config& config, const std::string& output) {
  const Corpus corpus = with_flag("--corpus", [&] {
    return ingest_corpus(require_path(config.corpus, "--corpus"), config.analyzer());
  });
  for (const auto& d : corpus.diagnostics())
    spdlog::warn("corpus record {}: {}", d.record, d.message);
  with_flag("--output", [&] {
    corpus.save_file(require_path(output, "--output"));
    return 0;
  });
  spdlog::info("indexed {} documents, {} sentences, {} terms", corpus.stats().doc_count,
               corpus.stats().sentence_count, corpus.stats().vocabulary.size());
}

void cmd_distill(const Config& config, const std::string& output, const std::string& from,
                 const std::string& to) {
  auto threads = with_flag("--threads", [&] {
    return load_threads(require_path(config.threads, "--threads"));
  });
  if (!from.empty() || !to.empty()) threads = filter_by_date(threads, from, to);
  for (auto& t : threads) t = enrich_first_turn(std::move(t));
  DistillCounters counters;
  const auto dialogues = distill_test_dialogues(threads, &counters);
  const Blocklist blocklist =
      config.blocklist.empty() ? Blocklist() : Blocklist::load(config.blocklist);
  const AnalyzerConfig analyzer = config.analyzer();
  std::map<FilterReason, std::size_t> dropped;
  auto out = open_output(output, "--output");
  std::size_t kept = 0;
  for (const auto& d : dialogues) {
    const FilterDecision decision = apply_test_filters(d, blocklist, analyzer, config.filters);
    for (FilterReason r : decision.reasons) ++dropped[r];
    if (!decision.keep) continue;
    out << dialogue_to_json_line(d) << '\n';
    ++kept;
  }
  spdlog::info("threads={} too_few_turns={} not_dialogue_like={} distilled={} kept={}",
               threads.size(), counters.too_few_turns, counters.not_dialogue_like,
               dialogues.size(), kept);
  for (const auto& [reason, n] : dropped)
    spdlog::info("filter {} rejected {} dialogues", to_string(reason), n);
}

void cmd_retrieve(const Config& config, const std::string& dialogues_path,
                  const std::string& output) {
  const Corpus corpus = load_corpus(config);
  const auto dialogues = read_dialogue_file(dialogues_path);
  Run run;
  for (const auto& d : dialogues) {
    try {
      run[d.dialogue_id] = final_rank(d, config.ranker, corpus);
    } catch (const Error& e) {
      spdlog::warn("{}: skipped: {}", d.dialogue_id, e.what());
    }
  }
  write_run_file(output, run);
  spdlog::info("retrieved {} of {} dialogues", run.size(), dialogues.size());
}

Run rerank_run(const std::string& method, const Config& config, const Corpus& corpus,
               const std::vector<Dialogue>& dialogues, const Run& candidates) {
  std::unique_ptr<Scorer> scorer;
  if (method == "external" || method == "extfuse") scorer = make_scorer(config);
  Run out;
  for (const auto& d : dialogues) {
    auto it = candidates.find(d.dialogue_id);
    if (it == candidates.end() || d.turns.empty()) continue;
    const std::string& last = d.turns.back().text;
    try {
      if (method == "lm")
        out[d.dialogue_id] = rerank_lm(last, it->second, config.ranker.mu, corpus);
      else if (method == "bm25")
        out[d.dialogue_id] = rerank_bm25(last, it->second, config.bm25, corpus);
      else if (method == "external")
        out[d.dialogue_id] = rerank_external(last, it->second, *scorer, corpus);
      else if (method == "extfuse")
        out[d.dialogue_id] =
            ext_fuse(d.turns, it->second, *scorer, RrfParams{config.rrf_nu, {}}, corpus);
    } catch (const ScorerError&) {
      throw;
    } catch (const Error& e) {
      spdlog::warn("{}: kept initial order: {}", d.dialogue_id, e.what());
      out[d.dialogue_id] = it->second;
    }
  }
  return out;
}

void cmd_rerank(const Config& config, const std::string& method,
                const std::string& dialogues_path, const std::string& run_path,
                const std::string& output) {
  if (method != "lm" && method != "bm25" && method != "external" && method != "extfuse")
    throw Error("--method: unknown reranker '" + method + "'");
  const Corpus corpus = load_corpus(config);
  const auto dialogues = read_dialogue_file(dialogues_path);
  const Run candidates = read_run_file(run_path, "--run");
  const Run out = rerank_run(method, config, corpus, dialogues, candidates);
  write_run_file(output, out);
  spdlog::info("reranked {} lists with {}", out.size(), method);
}

void cmd_fuse(const Config& config, const std::vector<std::string>& runs,
              const std::vector<double>& weights, const std::string& tag,
              const std::string& output) {
  if (runs.size() < 2) throw Error("--run: at least two runs are required");
  std::vector<Run> inputs;
  for (const auto& r : runs) inputs.push_back(read_run_file(named_run(r).second, "--run"));
  std::set<std::string> qids;
  for (const auto& run : inputs)
    for (const auto& [q, list] : run) qids.insert(q);
  const RrfParams params{config.rrf_nu, weights};
  params.validate(inputs.size());
  Run out;
  for (const auto& q : qids) {
    std::vector<RankedList> lists;
    std::vector<double> w;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto it = inputs[i].find(q);
      if (it == inputs[i].end()) continue;
      lists.push_back(it->second);
      if (!weights.empty()) w.push_back(weights[i]);
    }
    out[q] = rrf(lists, RrfParams{config.rrf_nu, w}, q, tag);
  }
  write_run_file(output, out);
}

void cmd_weaklabel(const Config& config, const std::string& output) {
  const Corpus corpus = load_corpus(config);
  const auto threads = with_flag("--threads", [&] {
    return load_threads(require_path(config.threads, "--threads"));
  });
  auto scorer = make_scorer(config);
  auto embedder = make_embedder(config);
  const TrainingSet set = build_training_set(threads, corpus, *scorer, *embedder,
                                             config.weak_label());
  auto out = open_output(output, "--output");
  for (const auto& r : set.records) out << training_record_to_json_line(r) << '\n';
  for (const auto& f : set.failures) spdlog::warn("skipped {}", f);
  const auto& c = set.counters;
  spdlog::info("threads={} conversations={} no_pointed_hit={} failed={} emitted={}", c.threads,
               c.conversations, c.no_pointed_hit, c.failed, c.emitted);
}

struct EvalInputs {
  std::vector<std::pair<std::string, Run>> runs;
  Qrels qrels;
  std::vector<Dialogue> dialogues;
  bool have_dialogues = false;
};

EvalInputs load_eval_inputs(const std::vector<std::string>& runs, const std::string& qrels,
                            const std::string& dialogues) {
  EvalInputs in;
  for (const auto& spec : runs) {
    auto [name, path] = named_run(spec);
    in.runs.emplace_back(name, read_run_file(path, "--run"));
  }
  in.qrels = with_flag("--qrels", [&] { return load_qrels(require_path(qrels, "--qrels")); });
  if (!dialogues.empty()) {
    in.dialogues = read_dialogue_file(dialogues);
    in.have_dialogues = true;
  }
  return in;
}

void cmd_evaluate(const Config& config, const EvalInputs& in, const std::string& metrics,
                  bool by_type, const std::string& format, std::ostream& out) {
  if (in.runs.empty()) throw Error("--run is required");
  const auto queries = judged_queries(in.qrels, in.have_dialogues ? &in.dialogues : nullptr);
  std::map<std::string, bool> grounded;
  for (const auto& q : queries) grounded[q.id] = q.grounded;
  if (by_type && !in.have_dialogues) throw Error("--by-type needs --dialogues");

  // Test halves of the stratified splits, or every query once without
  // dialogue types.
  std::vector<std::vector<std::string>> subsets;
  if (in.have_dialogues) {
    for (auto& s : make_splits(queries, {config.n_splits, config.seed}))
      subsets.push_back(std::move(s.test));
  } else {
    std::vector<std::string> all;
    for (const auto& q : queries) all.push_back(q.id);
    subsets.push_back(std::move(all));
  }

  std::vector<ReportRow> rows;
  for (const auto& [name, run] : in.runs) {
    for (Metric m : parse_metrics(metrics)) {
      const PerQuery values = per_query(m, run, in.qrels, queries);
      std::vector<double> overall, g, u;
      for (const auto& ids : subsets) {
        overall.push_back(mean_over(values, ids));
        if (by_type) {
          g.push_back(mean_over(values, of_type(ids, grounded, true)));
          u.push_back(mean_over(values, of_type(ids, grounded, false)));
        }
      }
      const std::string metric(to_string(m));
      rows.push_back({name, metric, summarize(overall)});
      if (by_type) {
        rows.push_back({name, metric + "[grounded]", summarize(g)});
        rows.push_back({name, metric + "[ungrounded]", summarize(u)});
      }
    }
  }
  if (format == "table")
    out << format_report_table(rows);
  else if (format == "jsonl")
    out << format_report_jsonl(rows);
  else
    throw Error("--format: expected table or jsonl");
}

void cmd_significance(const Config& config, const EvalInputs& in, const std::string& metric,
                      std::ostream& out) {
  if (!in.have_dialogues) throw Error("--dialogues is required");
  if (in.runs.size() < 2) throw Error("--run: at least two runs are required");
  const Metric m = metric_from_string(metric);
  const auto queries = judged_queries(in.qrels, &in.dialogues);
  const auto splits = make_splits(queries, {config.n_splits, config.seed});
  std::map<std::string, std::vector<double>> per_split;
  for (const auto& [name, run] : in.runs) {
    if (per_split.count(name)) throw Error("--run: duplicate system name '" + name + "'");
    const PerQuery values = per_query(m, run, in.qrels, queries);
    for (const auto& s : splits) per_split[name].push_back(mean_over(values, s.test));
  }
  const auto report =
      compare_systems(per_split, config.alpha, {config.permutations, config.seed});
  out << format_significance(report);
}

std::vector<std::pair<std::string, std::vector<double>>> parse_grid(
    const std::vector<std::string>& specs, const std::string& method) {
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error("--grid expects key=v1,v2,...: '" + spec + "'");
    std::vector<double> values;
    std::stringstream ss(spec.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');) {
      Config probe;
      probe.set(spec.substr(0, eq), v);  // validates key and value
      values.push_back(std::stod(v));
    }
    axes.emplace_back(spec.substr(0, eq), values);
  }
  if (!axes.empty()) return axes;
  if (method == "lm") return {{"mu", {1000, 2000}}};
  if (method == "bm25") return {{"bm25.k1", {1.2, 2, 4, 8, 12}}, {"bm25.b", {0.25, 0.5, 0.75, 1}}};
  throw Error("--grid is required for method '" + method + "'");
}

std::string describe_point(const GridPoint& p) {
  std::string s;
  for (const auto& [k, v] : p) {
    if (!s.empty()) s += ',';
    Config c;
    c.set(k, std::to_string(v));
    s += k + "=" + c.get(k);
  }
  return s;
}

void cmd_tune(const Config& config, const std::string& method, const EvalInputs& in,
              const std::string& candidates_path, const std::vector<std::string>& grid_specs,
              const std::string& metric, std::ostream& out) {
  if (!in.have_dialogues) throw Error("--dialogues is required");
  if (method != "initial" && method != "lm" && method != "bm25")
    throw Error("--method: expected initial, lm or bm25");
  const Metric m = metric_from_string(metric);
  const Corpus corpus = load_corpus(config);
  Run candidates;
  if (method != "initial") candidates = read_run_file(candidates_path, "--candidates");
  const auto grid = make_grid(parse_grid(grid_specs, method));
  const auto queries = judged_queries(in.qrels, &in.dialogues);
  std::vector<std::string> all_ids;
  std::set<std::string> wanted;
  for (const auto& q : queries) {
    all_ids.push_back(q.id);
    wanted.insert(q.id);
  }
  std::vector<Dialogue> dialogues;
  for (const auto& d : in.dialogues)
    if (wanted.count(d.dialogue_id)) dialogues.push_back(d);

  std::vector<PerQuery> values;
  for (const auto& point : grid) {
    Config c = config;
    for (const auto& [k, v] : point) c.set(k, std::to_string(v));
    c.validate();
    Run run;
    if (method == "initial") {
      for (const auto& d : dialogues) {
        try {
          run[d.dialogue_id] = final_rank(d, c.ranker, corpus);
        } catch (const Error&) {
        }
      }
    } else {
      run = rerank_run(method, c, corpus, dialogues, candidates);
    }
    values.push_back(per_query(m, run, in.qrels, queries));
    spdlog::info("grid point {}: mean {} {:.6f}", describe_point(point), to_string(m),
                 mean_over(values.back(), all_ids));
  }

  const auto splits = make_splits(queries, {config.n_splits, config.seed});
  std::vector<double> test_values;
  out << "split best validation test\n";
  for (std::size_t s = 0; s < splits.size(); ++s) {
    // tune() hands out references into `grid`, so the offset recovers the
    // point's precomputed per-query values.
    const auto result = tune(grid, [&](const GridPoint& p) {
      const auto idx = static_cast<std::size_t>(&p - grid.data());
      return mean_over(values[idx], splits[s].validation);
    });
    const double test = mean_over(values[result.best_index], splits[s].test);
    test_values.push_back(test);
    char buf[128];
    std::snprintf(buf, sizeof buf, " %.6f %.6f\n", result.best_value, test);
    out << s << ' ' << describe_point(result.best) << buf;
  }
  const Summary summary = summarize(test_values);
  char buf[128];
  std::snprintf(buf, sizeof buf, "test %s %.4f±%.4f over %zu splits\n",
                std::string(to_string(m)).c_str(), summary.mean, summary.stddev, summary.n);
  out << buf;
}

void cmd_stats(const EvalInputs& in, std::ostream& out) {
  if (!in.have_dialogues) throw Error("--dialogues is required");
  if (in.runs.size() != 1) throw Error("--run: exactly one run is required");
  out << format_dataset_stats(dataset_stats(in.dialogues, in.qrels, in.runs.front().second));
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("dialret");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  CLI::App app{"Sentence retrieval for open-ended dialogues"};
  app.require_subcommand(1);
  Options opts;
  app.add_option("--config", opts.config_path,
                 std::string("key=value config file (default: $") + kConfigEnv + ")");
  app.add_option("--set", opts.sets, "Override a config key, e.g. --set mu=2000");
  app.add_option("--log-level", opts.log_level, "trace|debug|info|warn|error|off");

  std::string output, dialogues, run_path, qrels, method = "lm", metrics = "map,ndcg5,mrr",
                                                    metric = "map", format = "table", from, to,
                                                    tag = "rrf", candidates;
  std::vector<std::string> runs, grid;
  std::vector<double> weights;
  bool by_type = false;

  auto* index = app.add_subcommand("index", "Build a binary index from a corpus JSONL file");
  bind(index, opts, "--corpus", "corpus", "Corpus JSONL file");
  bind(index, opts, "--stopwords", "stopwords", "Stopword list, one per line");
  bind(index, opts, "--stemmer", "stemmer", "none|light");
  index->add_option("--output,-o", output, "Index file to write");

  auto* distill = app.add_subcommand("distill", "Turn threads into filtered test dialogues");
  bind(distill, opts, "--threads", "threads", "Thread JSONL file");
  bind(distill, opts, "--blocklist", "blocklist", "Blocked phrases, one per line");
  bind(distill, opts, "--stopwords", "stopwords", "Stopword list");
  bind(distill, opts, "--stemmer", "stemmer", "none|light");
  bind(distill, opts, "--min-tokens", "filter.min_tokens", "Minimum analyzed tokens per turn");
  bind(distill, opts, "--max-tokens", "filter.max_tokens", "Maximum analyzed tokens per turn");
  distill->add_option("--from", from, "Earliest creation date (inclusive)");
  distill->add_option("--to", to, "Latest creation date (inclusive)");
  distill->add_option("--output,-o", output, "Dialogue JSONL file to write");

  auto add_corpus_flags = [&](CLI::App* sub) {
    bind(sub, opts, "--index", "index", "Binary index file");
    bind(sub, opts, "--corpus", "corpus", "Corpus JSONL file (used when --index is absent)");
    bind(sub, opts, "--stopwords", "stopwords", "Stopword list for --corpus");
    bind(sub, opts, "--stemmer", "stemmer", "none|light for --corpus");
  };
  auto add_ranker_flags = [&](CLI::App* sub) {
    bind(sub, opts, "--beta", "beta", "History weight in the dialogue mixtures");
    bind(sub, opts, "--gamma", "gamma", "Sentence weight in the final score");
    bind(sub, opts, "--mu", "mu", "Dirichlet pseudo-count");
    bind(sub, opts, "--delta", "delta", "Turn decay rate");
    bind(sub, opts, "--k-docs", "k_docs", "Documents retrieved");
    bind(sub, opts, "--k-sents", "k_sents", "Sentences returned");
  };
  auto add_scorer_flags = [&](CLI::App* sub) {
    bind(sub, opts, "--scorer", "scorer", "builtin:overlap or a protocol command line");
    bind(sub, opts, "--scorer-timeout-ms", "scorer.timeout_ms", "Per-batch timeout");
  };

  auto* retrieve = app.add_subcommand("retrieve", "Rank corpus sentences for each dialogue");
  add_corpus_flags(retrieve);
  add_ranker_flags(retrieve);
  retrieve->add_option("--dialogues", dialogues, "Dialogue JSONL file");
  retrieve->add_option("--output,-o", output, "Run file to write");

  auto* rerank = app.add_subcommand("rerank", "Rerank a candidate run");
  add_corpus_flags(rerank);
  add_scorer_flags(rerank);
  rerank->add_option("--method", method, "lm|bm25|external|extfuse");
  rerank->add_option("--dialogues", dialogues, "Dialogue JSONL file");
  rerank->add_option("--run", run_path, "Candidate run file");
  rerank->add_option("--output,-o", output, "Run file to write");
  bind(rerank, opts, "--mu", "mu", "Dirichlet pseudo-count for lm");
  bind(rerank, opts, "--k1", "bm25.k1", "BM25 k1");
  bind(rerank, opts, "--b", "bm25.b", "BM25 b");
  bind(rerank, opts, "--nu", "rrf.nu", "RRF constant for extfuse");

  auto* fuse = app.add_subcommand("fuse", "Fuse run files with reciprocal rank fusion");
  fuse->add_option("--run", runs, "Run file (repeat)");
  fuse->add_option("--weights", weights, "One weight per run")->delimiter(',');
  fuse->add_option("--tag", tag, "Tag written in the output run");
  fuse->add_option("--output,-o", output, "Run file to write");
  bind(fuse, opts, "--nu", "rrf.nu", "RRF constant");

  auto* weak = app.add_subcommand("weaklabel", "Generate weakly supervised training labels");
  add_corpus_flags(weak);
  add_scorer_flags(weak);
  bind(weak, opts, "--threads", "threads", "Thread JSONL file");
  bind(weak, opts, "--embedder", "embedder", "builtin:hashing or a protocol command line");
  bind(weak, opts, "--lambda", "weak.lambda", "Context weight in the weak fusion");
  bind(weak, opts, "--future", "weak.m_future", "Future turns used");
  bind(weak, opts, "--label-k", "weak.label_k", "Labels per side");
  weak->add_option("--output,-o", output, "Training JSONL file to write");

  auto add_eval_flags = [&](CLI::App* sub) {
    sub->add_option("--run", runs, "Run file as name=path or path (repeat)");
    sub->add_option("--qrels", qrels, "Relevance judgments");
    sub->add_option("--dialogues", dialogues, "Dialogue JSONL file (enables splits)");
    bind(sub, opts, "--splits", "eval.splits", "Number of stratified splits");
    bind(sub, opts, "--seed", "seed", "Random seed");
    sub->add_option("--output,-o", output, "Write the report here instead of stdout");
  };

  auto* evaluate = app.add_subcommand("evaluate", "Report metrics over stratified test halves");
  add_eval_flags(evaluate);
  evaluate->add_option("--metrics", metrics, "Comma-separated: map,ndcg5,mrr");
  evaluate->add_option("--format", format, "table|jsonl");
  evaluate->add_flag("--by-type", by_type, "Add grounded/ungrounded breakdowns");

  auto* tune_cmd = app.add_subcommand("tune", "Grid-tune on validation halves, report test halves");
  add_eval_flags(tune_cmd);
  add_corpus_flags(tune_cmd);
  add_ranker_flags(tune_cmd);
  add_scorer_flags(tune_cmd);
  tune_cmd->add_option("--method", method, "initial|lm|bm25");
  tune_cmd->add_option("--candidates", candidates, "Candidate run for lm/bm25");
  tune_cmd->add_option("--grid", grid, "key=v1,v2,... (repeat)");
  tune_cmd->add_option("--metric", metric, "Optimization metric");

  auto* significance =
      app.add_subcommand("significance", "Paired permutation tests with Bonferroni correction");
  add_eval_flags(significance);
  significance->add_option("--metric", metric, "map|ndcg5|mrr");
  bind(significance, opts, "--permutations", "eval.permutations", "Random sign flips");
  bind(significance, opts, "--alpha", "eval.alpha", "Family-wise significance level");

  auto* stats = app.add_subcommand("stats", "Relevant-count and first-relevant-rank summaries");
  add_eval_flags(stats);

  CLI11_PARSE(app, argc, argv);

  try {
    spdlog::set_level(spdlog::level::from_str(opts.log_level));
    const Config config = resolve_config(opts);
    auto report_stream = [&]() -> std::unique_ptr<std::ostream> {
      if (output.empty()) return nullptr;
      auto f = std::make_unique<std::ofstream>(output);
      if (!*f) throw Error("--output: cannot write " + output);
      return f;
    };

    if (index->parsed()) {
      cmd_index(config, output);
    } else if (distill->parsed()) {
      cmd_distill(config, output, from, to);
    } else if (retrieve->parsed()) {
      cmd_retrieve(config, dialogues, output);
    } else if (rerank->parsed()) {
      cmd_rerank(config, method, dialogues, run_path, output);
    } else if (fuse->parsed()) {
      cmd_fuse(config, runs, weights, tag, output);
    } else if (weak->parsed()) {
      cmd_weaklabel(config, output);
    } else {
      const EvalInputs in = load_eval_inputs(runs, qrels, dialogues);
      auto file = report_stream();
      std::ostream& out = file ? *file : std::cout;
      if (evaluate->parsed())
        cmd_evaluate(config, in, metrics, by_type, format, out);
      else if (tune_cmd->parsed())
        cmd_tune(config, method, in, candidates, grid, metric, out);
      else if (significance->parsed())
        cmd_significance(config, in, metric, out);
      else if (stats->parsed())
        cmd_stats(in, out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
