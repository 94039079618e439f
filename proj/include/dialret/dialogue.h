#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialret/analysis.h"

namespace dialret {

enum class Role { initiator, responder };

struct GroundedLink {
  std::string doc_id;
  std::string section_id;
  bool operator==(const GroundedLink&) const = default;
};

struct Turn {
  std::string text;
  std::string author_id;
  Role role = Role::initiator;
  std::vector<GroundedLink> links;
};

struct Thread {
  std::string thread_id;
  std::string subreddit;
  std::string title;
  std::string created_at;  // ISO date, compared lexicographically
  std::vector<Turn> turns;
};

// t_1..t_n plus, when known, the target turn t_{n+1} and the future turns
// t_{n+2}..t_m.
struct Dialogue {
  std::string dialogue_id;
  std::vector<Turn> turns;
  bool grounded = false;
  std::optional<Turn> target;
  std::vector<Turn> future;
};

// Prepends subreddit and title to the first turn, joined by single spaces.
Thread enrich_first_turn(Thread thread);

std::vector<Thread> filter_by_date(std::span<const Thread> threads,
                                   std::string_view from, std::string_view to);

struct DistillCounters {
  std::size_t kept = 0;
  std::size_t too_few_turns = 0;
  std::size_t not_dialogue_like = 0;
};

// Keeps threads where a single author wrote every odd turn and none of the
// even ones. The last responder turn becomes the target; the dialogue is
// every turn before it.
std::vector<Dialogue> distill_test_dialogues(std::span<const Thread> threads,
                                             DistillCounters* counters = nullptr);

enum class FilterReason { too_short, too_long, url, blocklist };

std::string_view to_string(FilterReason reason);

struct FilterDecision {
  bool keep = true;
  std::vector<FilterReason> reasons;  // every failing rule, in enum order
};

// Case-insensitive substring matcher. Multi-word entries also match with
// their spaces removed (hashtags, run-together titles).
class Blocklist {
 public:
  Blocklist() = default;
  explicit Blocklist(std::span<const std::string> entries);
  static Blocklist load(const std::string& path);

  bool matches(std::string_view text) const;
  bool empty() const { return patterns_.empty(); }

 private:
  std::vector<std::string> patterns_;
};

struct TestFilterConfig {
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 70;
};

bool contains_url(std::string_view text);

// Individual rules, exposed so they can be composed in any order.
// Empty when every turn is within [min_tokens, max_tokens].
std::vector<FilterReason> length_violations(const Dialogue& dialogue,
                                            const AnalyzerConfig& analyzer,
                                            const TestFilterConfig& config);
bool passes_url_rule(const Dialogue& dialogue);
bool passes_blocklist_rule(const Dialogue& dialogue, const Blocklist& blocklist);

FilterDecision apply_test_filters(const Dialogue& dialogue,
                                  const Blocklist& blocklist,
                                  const AnalyzerConfig& analyzer,
                                  const TestFilterConfig& config = {});

using LinkResolver = std::function<bool(const GroundedLink&)>;

struct TrainingSelectionConfig {
  std::size_t min_target_words = 6;  // targets of 5 words or fewer are dropped
};

std::size_t whitespace_word_count(std::string_view text);

// Every grounded turn with a non-empty history is a candidate target.
std::vector<Dialogue> select_training_conversations(
    std::span<const Thread> threads, const LinkResolver& resolver,
    const TrainingSelectionConfig& config = {});

// Thread/dialogue interchange (one JSON object per line).
std::vector<Thread> read_threads(std::istream& in);
std::vector<Thread> load_threads(const std::string& path);
std::string thread_to_json_line(const Thread& thread);
std::vector<Dialogue> read_dialogues(std::istream& in);
std::vector<Dialogue> load_dialogues(const std::string& path);
std::string dialogue_to_json_line(const Dialogue& dialogue);

}  // namespace dialret
