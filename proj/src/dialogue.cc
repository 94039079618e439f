#include "dialret/dialogue.h"

#include <algorithm>
#include <fstream>
#include <istream>

#include <nlohmann/json.hpp>

#include "dialret/error.h"

namespace dialret {

using json = nlohmann::json;

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

Role role_at(std::size_t zero_based) {
  return zero_based % 2 == 0 ? Role::initiator : Role::responder;
}

void assign_roles(std::vector<Turn>& turns, std::size_t offset = 0) {
  for (std::size_t i = 0; i < turns.size(); ++i) turns[i].role = role_at(offset + i);
}

bool has_links(const Turn& t) { return !t.links.empty(); }

template <typename F>
void for_each_turn(const Dialogue& d, F&& f) {
  for (const auto& t : d.turns) f(t, false);
  if (d.target) f(*d.target, true);
}

std::string json_error(std::string_view kind, std::size_t line,
                       std::string_view what) {
  return std::string(kind) + " line " + std::to_string(line) + ": " +
         std::string(what);
}

std::string opt_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

Turn turn_from_json(const json& j) {
  if (!j.is_object()) throw Error("turn must be an object");
  Turn t;
  t.author_id = opt_string(j, "author");
  auto text = j.find("text");
  if (text == j.end() || !text->is_string())
    throw Error("field 'text' is missing or not a string");
  t.text = text->get<std::string>();
  if (auto role = j.find("role"); role != j.end() && role->is_string())
    t.role = role->get<std::string>() == "responder" ? Role::responder
                                                    : Role::initiator;
  if (auto links = j.find("links"); links != j.end() && !links->is_null()) {
    if (!links->is_array()) throw Error("field 'links' must be a list");
    for (const auto& l : *links) {
      if (!l.is_object()) throw Error("link must be an object");
      t.links.push_back({opt_string(l, "doc"), opt_string(l, "section")});
    }
  }
  return t;
}

json turn_to_json(const Turn& t) {
  json links = json::array();
  for (const auto& l : t.links) links.push_back({{"doc", l.doc_id}, {"section", l.section_id}});
  return {{"author", t.author_id},
          {"role", t.role == Role::initiator ? "initiator" : "responder"},
          {"text", t.text},
          {"links", links}};
}

std::vector<Turn> turns_from_json(const json& j, const char* key) {
  std::vector<Turn> turns;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return turns;
  if (!it->is_array()) throw Error(std::string("field '") + key + "' must be a list");
  for (const auto& t : *it) turns.push_back(turn_from_json(t));
  return turns;
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, std::string_view kind, Parse parse) {
  std::vector<T> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(text)));
    } catch (const json::exception& e) {
      throw Error(json_error(kind, line, e.what()));
    } catch (const Error& e) {
      throw Error(json_error(kind, line, e.what()));
    }
  }
  return out;
}

}  // namespace

Thread enrich_first_turn(Thread thread) {
  if (thread.turns.empty()) return thread;
  std::string text;
  for (const std::string* part :
       {&thread.subreddit, &thread.title, &thread.turns.front().text}) {
    if (part->empty()) continue;
    if (!text.empty()) text += ' ';
    text += *part;
  }
  thread.turns.front().text = std::move(text);
  return thread;
}

std::vector<Thread> filter_by_date(std::span<const Thread> threads,
                                   std::string_view from, std::string_view to) {
  std::vector<Thread> out;
  for (const auto& t : threads) {
    if (!from.empty() && t.created_at < from) continue;
    if (!to.empty() && t.created_at > to) continue;
    out.push_back(t);
  }
  return out;
}

std::vector<Dialogue> distill_test_dialogues(std::span<const Thread> threads,
                                             DistillCounters* counters) {
  DistillCounters local;
  std::vector<Dialogue> out;
  for (const Thread& thread : threads) {
    const auto& turns = thread.turns;
    if (turns.size() < 4) {
      ++local.too_few_turns;
      continue;
    }
    const std::string& initiator = turns.front().author_id;
    bool dialogue_like = true;
    for (std::size_t i = 0; i < turns.size() && dialogue_like; ++i) {
      const bool odd_position = i % 2 == 0;  // 1-based odd
      dialogue_like = odd_position ? turns[i].author_id == initiator
                                   : turns[i].author_id != initiator;
    }
    if (!dialogue_like) {
      ++local.not_dialogue_like;
      continue;
    }
    // Last responder turn: the final even 1-based position.
    const std::size_t target = turns.size() % 2 == 0 ? turns.size() - 1 : turns.size() - 2;
    Dialogue d;
    d.dialogue_id = thread.thread_id;
    d.turns.assign(turns.begin(), turns.begin() + static_cast<std::ptrdiff_t>(target));
    assign_roles(d.turns);
    d.target = turns[target];
    d.target->role = Role::responder;
    d.grounded = has_links(*d.target);
    out.push_back(std::move(d));
    ++local.kept;
  }
  if (counters) *counters = local;
  return out;
}

std::string_view to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::too_short: return "too_short";
    case FilterReason::too_long: return "too_long";
    case FilterReason::url: return "url";
    case FilterReason::blocklist: return "blocklist";
  }
  return "unknown";
}

Blocklist::Blocklist(std::span<const std::string> entries) {
  std::set<std::string> patterns;
  for (const auto& entry : entries) {
    std::string p = lower_ascii(entry);
    const auto first = p.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    p = p.substr(first, p.find_last_not_of(" \t\r") - first + 1);
    if (p.find(' ') != std::string::npos) {
      std::string joined;
      for (char c : p)
        if (c != ' ') joined.push_back(c);
      patterns.insert(joined);
    }
    patterns.insert(std::move(p));
  }
  patterns_.assign(patterns.begin(), patterns.end());
}

Blocklist Blocklist::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open blocklist file: " + path);
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) entries.push_back(line);
  return Blocklist(entries);
}

bool Blocklist::matches(std::string_view text) const {
  if (patterns_.empty()) return false;
  const std::string lowered = lower_ascii(text);
  return std::any_of(patterns_.begin(), patterns_.end(), [&](const std::string& p) {
    return lowered.find(p) != std::string::npos;
  });
}

bool contains_url(std::string_view text) {
  const std::string lowered = lower_ascii(text);
  return lowered.find("http://") != std::string::npos ||
         lowered.find("https://") != std::string::npos ||
         lowered.find("www.") != std::string::npos;
}

std::vector<FilterReason> length_violations(const Dialogue& dialogue,
                                            const AnalyzerConfig& analyzer,
                                            const TestFilterConfig& config) {
  bool too_short = false, too_long = false;
  for_each_turn(dialogue, [&](const Turn& t, bool) {
    const auto n = tokenize(t.text, analyzer.lowercase).size();
    too_short |= n < config.min_tokens;
    too_long |= n > config.max_tokens;
  });
  std::vector<FilterReason> reasons;
  if (too_short) reasons.push_back(FilterReason::too_short);
  if (too_long) reasons.push_back(FilterReason::too_long);
  return reasons;
}

bool passes_url_rule(const Dialogue& dialogue) {
  bool ok = true;
  for_each_turn(dialogue, [&](const Turn& t, bool is_target) {
    if (is_target && dialogue.grounded) return;
    if (contains_url(t.text)) ok = false;
  });
  return ok;
}

bool passes_blocklist_rule(const Dialogue& dialogue, const Blocklist& blocklist) {
  bool ok = true;
  for_each_turn(dialogue, [&](const Turn& t, bool) {
    if (blocklist.matches(t.text)) ok = false;
  });
  return ok;
}

FilterDecision apply_test_filters(const Dialogue& dialogue,
                                  const Blocklist& blocklist,
                                  const AnalyzerConfig& analyzer,
                                  const TestFilterConfig& config) {
  FilterDecision decision;
  decision.reasons = length_violations(dialogue, analyzer, config);
  if (!passes_url_rule(dialogue)) decision.reasons.push_back(FilterReason::url);
  if (!passes_blocklist_rule(dialogue, blocklist))
    decision.reasons.push_back(FilterReason::blocklist);
  decision.keep = decision.reasons.empty();
  return decision;
}

std::size_t whitespace_word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                       c == '\f' || c == '\v';
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

std::vector<Dialogue> select_training_conversations(
    std::span<const Thread> threads, const LinkResolver& resolver,
    const TrainingSelectionConfig& config) {
  std::vector<Dialogue> out;
  for (const Thread& thread : threads) {
    const auto& turns = thread.turns;
    for (std::size_t pos = 1; pos + 1 < turns.size(); ++pos) {
      const Turn& target = turns[pos];
      if (!has_links(target)) continue;
      if (whitespace_word_count(target.text) < config.min_target_words) continue;
      if (resolver && std::none_of(target.links.begin(), target.links.end(), resolver))
        continue;
      Dialogue d;
      d.dialogue_id = thread.thread_id + ":" + std::to_string(pos + 1);
      d.turns.assign(turns.begin(), turns.begin() + static_cast<std::ptrdiff_t>(pos));
      assign_roles(d.turns);
      d.target = target;
      d.target->role = role_at(pos);
      d.future.assign(turns.begin() + static_cast<std::ptrdiff_t>(pos) + 1, turns.end());
      assign_roles(d.future, pos + 1);
      d.grounded = true;
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<Thread> read_threads(std::istream& in) {
  return read_jsonl<Thread>(in, "thread", [](const json& j) {
    if (!j.is_object()) throw Error("record is not an object");
    Thread t;
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) throw Error("field 'id' is missing or not a string");
    t.thread_id = id->get<std::string>();
    t.subreddit = opt_string(j, "subreddit");
    t.title = opt_string(j, "title");
    t.created_at = opt_string(j, "created");
    t.turns = turns_from_json(j, "turns");
    if (t.turns.empty()) throw Error("thread has no turns");
    return t;
  });
}

std::vector<Thread> load_threads(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open thread file: " + path);
  return read_threads(in);
}

std::string thread_to_json_line(const Thread& thread) {
  json turns = json::array();
  for (const auto& t : thread.turns) turns.push_back(turn_to_json(t));
  json j = {{"id", thread.thread_id},
            {"subreddit", thread.subreddit},
            {"title", thread.title},
            {"created", thread.created_at},
            {"turns", turns}};
  return j.dump();
}

std::vector<Dialogue> read_dialogues(std::istream& in) {
  return read_jsonl<Dialogue>(in, "dialogue", [](const json& j) {
    if (!j.is_object()) throw Error("record is not an object");
    Dialogue d;
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) throw Error("field 'id' is missing or not a string");
    d.dialogue_id = id->get<std::string>();
    d.turns = turns_from_json(j, "turns");
    if (d.turns.empty()) throw Error("dialogue has no turns");
    if (auto t = j.find("target"); t != j.end() && !t->is_null()) d.target = turn_from_json(*t);
    d.future = turns_from_json(j, "future");
    if (auto g = j.find("grounded"); g != j.end() && g->is_boolean())
      d.grounded = g->get<bool>();
    else
      d.grounded = d.target && has_links(*d.target);
    return d;
  });
}

std::vector<Dialogue> load_dialogues(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dialogue file: " + path);
  return read_dialogues(in);
}

std::string dialogue_to_json_line(const Dialogue& d) {
  json turns = json::array();
  for (const auto& t : d.turns) turns.push_back(turn_to_json(t));
  json future = json::array();
  for (const auto& t : d.future) future.push_back(turn_to_json(t));
  json j = {{"id", d.dialogue_id},
            {"turns", turns},
            {"target", d.target ? turn_to_json(*d.target) : json(nullptr)},
            {"future", future},
            {"grounded", d.grounded}};
  return j.dump();
}

}  // namespace dialret
