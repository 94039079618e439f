#pragma once

#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dialret {

enum class StemmerKind { none, light };

// Maps a lowercased token to its stem. Implementations must be pure.
class Stemmer {
 public:
  virtual ~Stemmer() = default;
  virtual std::string stem(std::string_view token) const = 0;
};

class IdentityStemmer final : public Stemmer {
 public:
  std::string stem(std::string_view token) const override {
    return std::string(token);
  }
};

// Light inflectional stemmer: plural and -ed/-ing suffixes only. Tokens
// containing digits or non-ASCII bytes pass through unchanged.
class LightStemmer final : public Stemmer {
 public:
  std::string stem(std::string_view token) const override;
};

std::unique_ptr<Stemmer> make_stemmer(StemmerKind kind);

struct AnalyzerConfig {
  StemmerKind stemmer = StemmerKind::light;
  // Compared against the lowercased surface token, before stemming.
  std::set<std::string> stopwords;
  bool lowercase = true;
};

// Splits on non-alphanumeric boundaries. Any byte >= 0x80 counts as a token
// character so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text, bool lowercase);

std::vector<std::string> analyze(std::string_view text,
                                 const AnalyzerConfig& config,
                                 bool apply_stopwords);

// One term per line; blank lines and lines starting with '#' are skipped.
std::set<std::string> read_stopwords(std::istream& in);
std::set<std::string> load_stopwords(const std::string& path);

std::string_view to_string(StemmerKind kind);
StemmerKind stemmer_from_string(std::string_view name);

}  // namespace dialret
