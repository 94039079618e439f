#include "dialret/analysis.h"

#include <fstream>
#include <istream>

#include "dialret/error.h"

namespace dialret {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool has_vowel(std::string_view s) {
  for (char c : s)
    if (is_vowel(c) || c == 'y') return true;
  return false;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

bool plain_lower_alpha(std::string_view s) {
  for (char c : s)
    if (c < 'a' || c > 'z') return false;
  return true;
}

// "runn" -> "run", but "fall" and "miss" keep their doubled letter.
std::string undouble(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem[n - 1]) &&
      stem[n - 1] != 'l' && stem[n - 1] != 's' && stem[n - 1] != 'z')
    stem.pop_back();
  return stem;
}

std::string strip_plural(std::string w) {
  if (w.size() <= 3) return w;
  if (ends_with(w, "ies") && !ends_with(w, "eies") && !ends_with(w, "aies")) {
    w.resize(w.size() - 3);
    return w + "y";
  }
  if (ends_with(w, "sses") || ends_with(w, "xes") || ends_with(w, "zes") ||
      ends_with(w, "ches") || ends_with(w, "shes")) {
    w.resize(w.size() - 2);
    return w;
  }
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is")) {
    w.pop_back();
  }
  return w;
}

std::string strip_verbal(std::string w) {
  if (w.size() >= 5 && ends_with(w, "ing")) {
    std::string stem = w.substr(0, w.size() - 3);
    if (stem.size() >= 3 && has_vowel(stem)) return undouble(std::move(stem));
    return w;
  }
  if (w.size() >= 5 && ends_with(w, "ied")) {
    return w.substr(0, w.size() - 3) + "y";
  }
  if (w.size() >= 5 && ends_with(w, "ed") && !ends_with(w, "eed")) {
    std::string stem = w.substr(0, w.size() - 2);
    if (stem.size() >= 3 && has_vowel(stem)) return undouble(std::move(stem));
  }
  return w;
}

}  // namespace

std::string LightStemmer::stem(std::string_view token) const {
  if (!plain_lower_alpha(token)) return std::string(token);
  return strip_verbal(strip_plural(std::string(token)));
}

std::unique_ptr<Stemmer> make_stemmer(StemmerKind kind) {
  switch (kind) {
    case StemmerKind::none:
      return std::make_unique<IdentityStemmer>();
    case StemmerKind::light:
      return std::make_unique<LightStemmer>();
  }
  throw Error("unknown stemmer kind");
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      if (lowercase && c >= 'A' && c <= 'Z')
        current.push_back(static_cast<char>(c - 'A' + 'a'));
      else
        current.push_back(ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> analyze(std::string_view text,
                                 const AnalyzerConfig& config,
                                 bool apply_stopwords) {
  const auto stemmer = make_stemmer(config.stemmer);
  std::vector<std::string> out;
  for (auto& token : tokenize(text, config.lowercase)) {
    if (apply_stopwords && config.stopwords.count(token)) continue;
    out.push_back(stemmer->stem(token));
  }
  return out;
}

std::set<std::string> read_stopwords(std::istream& in) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& token : tokenize(line, true)) {
      if (line.front() == '#') break;
      words.insert(token);
    }
  }
  return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stopword file: " + path);
  return read_stopwords(in);
}

std::string_view to_string(StemmerKind kind) {
  return kind == StemmerKind::none ? "none" : "light";
}

StemmerKind stemmer_from_string(std::string_view name) {
  if (name == "none") return StemmerKind::none;
  if (name == "light" || name == "default") return StemmerKind::light;
  throw Error("unknown stemmer: " + std::string(name));
}

}  // namespace dialret
