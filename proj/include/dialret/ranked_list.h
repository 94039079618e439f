#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dialret {

struct RankedItem {
  std::string id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

// Scores are non-increasing, ranks run 1..size, equal scores are ordered by
// ascending item id, and ids are unique.
class RankedList {
 public:
  RankedList() = default;
  RankedList(std::string query_id, std::string tag)
      : query_id_(std::move(query_id)), tag_(std::move(tag)) {}

  // Sorts by (score desc, id asc) and keeps the first `limit` items.
  static RankedList from_scores(std::string query_id,
                                std::vector<std::pair<std::string, double>> scores,
                                std::string tag,
                                std::size_t limit = std::numeric_limits<std::size_t>::max());

  // Keeps the given order and assigns ranks 1..n; scores must already be
  // non-increasing. Used when reading run files.
  static RankedList from_ordered(std::string query_id, std::vector<RankedItem> items,
                                 std::string tag);

  const std::string& query_id() const { return query_id_; }
  const std::string& tag() const { return tag_; }
  void set_tag(std::string tag) { tag_ = std::move(tag); }
  const std::vector<RankedItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const RankedItem& operator[](std::size_t i) const { return items_[i]; }

  std::vector<std::string> ids() const;
  // 1-based rank, or nullopt when the id is absent.
  std::optional<std::size_t> rank_of(const std::string& id) const;
  std::unordered_map<std::string, std::size_t> rank_map() const;

 private:
  std::string query_id_;
  std::string tag_;
  std::vector<RankedItem> items_;
};

using Run = std::map<std::string, RankedList>;

// `query_id Q0 item_id rank score tag`, one line per item.
void write_run(std::ostream& out, const RankedList& list);
void write_run(std::ostream& out, const Run& run);
Run read_run(std::istream& in);
Run load_run(const std::string& path);
void save_run(const std::string& path, const Run& run);

std::string format_score(double score);

}  // namespace dialret
