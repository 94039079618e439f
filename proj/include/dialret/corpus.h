#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialret/analysis.h"

namespace dialret {

using TermId = std::uint32_t;
using DocIndex = std::uint32_t;
using SentenceIndex = std::uint32_t;

struct Section {
  std::string section_id;
  std::string heading;
  std::vector<std::string> sentences;
};

struct Document {
  std::string doc_id;
  std::string title;
  std::vector<Section> sections;
};

// Serialized as doc_id#section_id#sentence_idx. Ordering is the tie-break
// order used everywhere a stable total order over sentences is needed.
struct SentenceRef {
  std::string doc_id;
  std::string section_id;
  std::uint32_t sentence_idx = 0;

  std::string str() const;
  static SentenceRef parse(std::string_view text);

  auto operator<=>(const SentenceRef&) const = default;
};

class Vocabulary {
 public:
  std::optional<TermId> find(std::string_view term) const;
  TermId intern(const std::string& term);
  const std::string& term(TermId id) const { return terms_[id]; }
  std::size_t size() const { return terms_.size(); }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> ids_;
};

// Which unit counts as a "document" when computing IDF-style statistics.
enum class FrequencyGranularity { document, sentence };

struct CollectionStats {
  Vocabulary vocabulary;
  std::uint64_t total_terms = 0;
  std::uint64_t doc_count = 0;
  std::uint64_t sentence_count = 0;
  std::vector<std::uint64_t> cf;
  std::vector<std::uint32_t> df;
  std::vector<std::uint32_t> sf;
  double avg_doc_len = 0.0;
  double avg_sentence_len = 0.0;

  // p(w|C) = cf(w) / total_terms; 0 for terms outside the vocabulary.
  // Throws on an empty collection.
  double collection_prob(TermId term) const;
  double collection_prob(std::string_view term) const;

  // (N, df) pair at the requested granularity, N being doc or sentence count.
  std::uint64_t unit_count(FrequencyGranularity g) const;
  std::uint32_t unit_frequency(TermId term, FrequencyGranularity g) const;
};

struct TermCount {
  TermId term;
  std::uint32_t count;
  bool operator==(const TermCount&) const = default;
};

struct Posting {
  DocIndex doc;
  std::uint32_t tf;
  bool operator==(const Posting&) const = default;
};

// Postings are sorted by document index and every tf is >= 1.
class InvertedIndex {
 public:
  std::span<const Posting> postings(TermId term) const {
    return term < postings_.size() ? std::span<const Posting>(postings_[term])
                                   : std::span<const Posting>();
  }
  std::uint32_t doc_length(DocIndex doc) const { return doc_lengths_[doc]; }
  std::size_t term_count() const { return postings_.size(); }

 private:
  friend class Corpus;
  std::vector<std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
};

// Sidecar entry: analyzed term counts of one sentence, sorted by term id.
struct SentenceEntry {
  DocIndex doc = 0;
  std::uint32_t section = 0;
  std::uint32_t position = 0;
  std::uint32_t length = 0;
  std::vector<TermCount> terms;

  std::uint32_t count(TermId term) const;
};

// Non-fatal ingestion finding, e.g. an empty section. `record` is 1-based.
struct IngestDiagnostic {
  std::size_t record = 0;
  std::string message;
};

// Immutable once built; safe to share between concurrent readers.
class Corpus {
 public:
  static Corpus build(std::vector<Document> documents, AnalyzerConfig config);

  const AnalyzerConfig& analyzer() const { return analyzer_; }
  const std::vector<Document>& documents() const { return documents_; }
  const InvertedIndex& index() const { return index_; }
  const CollectionStats& stats() const { return stats_; }
  const std::vector<IngestDiagnostic>& diagnostics() const {
    return diagnostics_;
  }

  std::optional<DocIndex> find_document(std::string_view doc_id) const;
  std::optional<std::uint32_t> find_section(DocIndex doc,
                                            std::string_view section_id) const;

  std::size_t sentence_count() const { return sentences_.size(); }
  const SentenceEntry& sentence(SentenceIndex s) const { return sentences_[s]; }
  // Sentences of a document occupy a contiguous range.
  std::pair<SentenceIndex, SentenceIndex> document_sentences(DocIndex doc) const {
    return {doc_first_sentence_[doc], doc_first_sentence_[doc + 1]};
  }
  const std::string& sentence_text(SentenceIndex s) const;
  SentenceRef sentence_ref(SentenceIndex s) const;
  std::optional<SentenceIndex> resolve(const SentenceRef& ref) const;
  std::optional<SentenceIndex> resolve(std::string_view ref) const;

  // Analysis with this corpus's configuration; dialogue text additionally
  // drops stopwords.
  std::vector<std::string> analyze_document_text(std::string_view text) const {
    return analyze(text, analyzer_, false);
  }
  std::vector<std::string> analyze_query_text(std::string_view text) const {
    return analyze(text, analyzer_, true);
  }

  void save(std::ostream& out) const;
  static Corpus load(std::istream& in);
  void save_file(const std::string& path) const;
  static Corpus load_file(const std::string& path);

 private:
  void index_documents();

  AnalyzerConfig analyzer_;
  std::vector<Document> documents_;
  std::unordered_map<std::string, DocIndex> doc_ids_;
  std::vector<SentenceEntry> sentences_;
  std::vector<SentenceIndex> doc_first_sentence_;
  InvertedIndex index_;
  CollectionStats stats_;
  std::vector<IngestDiagnostic> diagnostics_;
};

// One JSON object per line: {"id", "title", "sections": [{"id", "heading",
// "sentences": [...]}]}. Errors name the offending line and field.
std::vector<Document> read_corpus_jsonl(std::istream& in);
Corpus ingest_corpus(const std::string& path, const AnalyzerConfig& config);
Corpus ingest_corpus(std::istream& in, const AnalyzerConfig& config);

std::string document_to_json_line(const Document& doc);

}  // namespace dialret
