#include "dialret/ranked_list.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "dialret/error.h"

namespace dialret {

RankedList RankedList::from_scores(std::string query_id,
                                   std::vector<std::pair<std::string, double>> scores,
                                   std::string tag, std::size_t limit) {
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i].first == scores[i - 1].first)
      throw Error("duplicate item id in ranked list: " + scores[i].first);
  RankedList list(std::move(query_id), std::move(tag));
  const std::size_t n = std::min(limit, scores.size());
  list.items_.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    list.items_.push_back({std::move(scores[i].first), scores[i].second, i + 1});
  return list;
}

RankedList RankedList::from_ordered(std::string query_id,
                                    std::vector<RankedItem> items, std::string tag) {
  RankedList list(std::move(query_id), std::move(tag));
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!seen.insert(items[i].id).second)
      throw Error("duplicate item id in ranked list: " + items[i].id);
    items[i].rank = i + 1;
  }
  list.items_ = std::move(items);
  return list;
}

std::vector<std::string> RankedList::ids() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& item : items_) out.push_back(item.id);
  return out;
}

std::optional<std::size_t> RankedList::rank_of(const std::string& id) const {
  for (const auto& item : items_)
    if (item.id == id) return item.rank;
  return std::nullopt;
}

std::unordered_map<std::string, std::size_t> RankedList::rank_map() const {
  std::unordered_map<std::string, std::size_t> ranks;
  ranks.reserve(items_.size());
  for (const auto& item : items_) ranks.emplace(item.id, item.rank);
  return ranks;
}

std::string format_score(double score) {
  if (std::isinf(score)) return score > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", score);
  return buf;
}

void write_run(std::ostream& out, const RankedList& list) {
  const std::string tag = list.tag().empty() ? "dialret" : list.tag();
  for (const auto& item : list.items())
    out << list.query_id() << " Q0 " << item.id << ' ' << item.rank << ' '
        << format_score(item.score) << ' ' << tag << '\n';
}

void write_run(std::ostream& out, const Run& run) {
  for (const auto& [qid, list] : run) write_run(out, list);
}

Run read_run(std::istream& in) {
  struct Row {
    std::size_t rank;
    RankedItem item;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::map<std::string, std::string> tags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string qid, q0, item, rank_text, score_text, tag, extra;
    if (!(fields >> qid >> q0 >> item >> rank_text >> score_text >> tag) ||
        (fields >> extra))
      throw Error("run line " + std::to_string(line_no) + ": expected 6 columns");
    std::size_t rank = 0;
    double score = 0.0;
    try {
      std::size_t pos = 0;
      rank = std::stoul(rank_text, &pos);
      if (pos != rank_text.size() || rank == 0) throw std::invalid_argument("rank");
      score = std::stod(score_text, &pos);
      if (pos != score_text.size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw Error("run line " + std::to_string(line_no) + ": bad rank or score");
    }
    rows[qid].push_back({rank, {item, score, rank}});
    tags[qid] = tag;
  }
  Run run;
  for (auto& [qid, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    std::vector<RankedItem> items;
    items.reserve(list.size());
    for (auto& row : list) items.push_back(std::move(row.item));
    run.emplace(qid, RankedList::from_ordered(qid, std::move(items), tags[qid]));
  }
  return run;
}

Run load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open run file: " + path);
  return read_run(in);
}

void save_run(const std::string& path, const Run& run) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write run file: " + path);
  write_run(out, run);
}

}  // namespace dialret
