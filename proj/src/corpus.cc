#include "dialret/corpus.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "dialret/error.h"

namespace dialret {

using json = nlohmann::json;

namespace {

constexpr std::string_view kIndexMagic = "DIALRET-INDEX\n";
constexpr std::uint32_t kIndexVersion = 1;

void validate_id(std::string_view id, std::string_view what) {
  if (id.empty()) throw Error(std::string(what) + " is empty");
  for (char c : id) {
    if (c == '#' || c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw Error(std::string(what) + " '" + std::string(id) +
                  "' contains '#' or whitespace");
  }
}

// Little-endian fixed-width binary writer/reader for the index file.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint8_t u8() {
    char c;
    if (!in_.get(c)) throw Error("truncated index file");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    if (n && !in_.read(s.data(), n)) throw Error("truncated index file");
    return s;
  }

 private:
  std::istream& in_;
};

std::string field_error(std::size_t line, std::string_view field,
                        std::string_view problem) {
  return "corpus line " + std::to_string(line) + ": field '" +
         std::string(field) + "' " + std::string(problem);
}

const json& require(const json& obj, const char* key, std::size_t line,
                    std::string_view path) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(field_error(line, std::string(path) + key, "is missing"));
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line,
                           std::string_view path = "") {
  const json& v = require(obj, key, line, path);
  if (!v.is_string())
    throw Error(field_error(line, std::string(path) + key, "must be a string"));
  return v.get<std::string>();
}

}  // namespace

std::string SentenceRef::str() const {
  return doc_id + "#" + section_id + "#" + std::to_string(sentence_idx);
}

SentenceRef SentenceRef::parse(std::string_view text) {
  const auto last = text.rfind('#');
  if (last == std::string_view::npos || last == 0)
    throw Error("malformed sentence id: " + std::string(text));
  const auto first = text.rfind('#', last - 1);
  if (first == std::string_view::npos)
    throw Error("malformed sentence id: " + std::string(text));
  SentenceRef ref;
  ref.doc_id = std::string(text.substr(0, first));
  ref.section_id = std::string(text.substr(first + 1, last - first - 1));
  const auto idx = text.substr(last + 1);
  auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(),
                                   ref.sentence_idx);
  if (ec != std::errc() || ptr != idx.data() + idx.size() || idx.empty() ||
      ref.doc_id.empty() || ref.section_id.empty())
    throw Error("malformed sentence id: " + std::string(text));
  return ref;
}

std::optional<TermId> Vocabulary::find(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TermId Vocabulary::intern(const std::string& term) {
  auto [it, inserted] =
      ids_.emplace(term, static_cast<TermId>(terms_.size()));
  if (inserted) terms_.push_back(term);
  return it->second;
}

double CollectionStats::collection_prob(TermId term) const {
  if (total_terms == 0) throw Error("empty collection");
  if (term >= cf.size()) return 0.0;
  return static_cast<double>(cf[term]) / static_cast<double>(total_terms);
}

double CollectionStats::collection_prob(std::string_view term) const {
  if (total_terms == 0) throw Error("empty collection");
  auto id = vocabulary.find(term);
  return id ? collection_prob(*id) : 0.0;
}

std::uint64_t CollectionStats::unit_count(FrequencyGranularity g) const {
  return g == FrequencyGranularity::document ? doc_count : sentence_count;
}

std::uint32_t CollectionStats::unit_frequency(TermId term,
                                              FrequencyGranularity g) const {
  if (term >= df.size()) return 0;
  return g == FrequencyGranularity::document ? df[term] : sf[term];
}

std::uint32_t SentenceEntry::count(TermId term) const {
  auto it = std::lower_bound(
      terms.begin(), terms.end(), term,
      [](const TermCount& tc, TermId t) { return tc.term < t; });
  return it != terms.end() && it->term == term ? it->count : 0;
}

Corpus Corpus::build(std::vector<Document> documents, AnalyzerConfig config) {
  Corpus corpus;
  corpus.analyzer_ = std::move(config);
  corpus.documents_ = std::move(documents);
  corpus.index_documents();
  return corpus;
}

void Corpus::index_documents() {
  doc_ids_.clear();
  sentences_.clear();
  doc_first_sentence_.assign(1, 0);
  stats_ = CollectionStats{};
  index_ = InvertedIndex{};

  for (DocIndex d = 0; d < documents_.size(); ++d) {
    const Document& doc = documents_[d];
    validate_id(doc.doc_id, "doc_id");
    if (doc.sections.empty())
      throw Error("document '" + doc.doc_id + "' has no sections");
    auto [it, inserted] = doc_ids_.emplace(doc.doc_id, d);
    if (!inserted)
      throw Error("duplicate doc_id '" + doc.doc_id + "' at records " +
                  std::to_string(it->second + 1) + " and " +
                  std::to_string(d + 1));
    for (std::uint32_t s = 0; s < doc.sections.size(); ++s) {
      validate_id(doc.sections[s].section_id, "section_id");
      for (std::uint32_t t = 0; t < s; ++t)
        if (doc.sections[t].section_id == doc.sections[s].section_id)
          throw Error("document '" + doc.doc_id + "': duplicate section_id '" +
                      doc.sections[s].section_id + "'");
    }
  }

  auto& vocab = stats_.vocabulary;
  std::vector<std::uint32_t> doc_tf;  // scratch, indexed by term id
  std::vector<TermId> doc_terms;
  for (DocIndex d = 0; d < documents_.size(); ++d) {
    const Document& doc = documents_[d];
    std::uint32_t doc_len = 0;
    doc_terms.clear();
    for (std::uint32_t s = 0; s < doc.sections.size(); ++s) {
      const Section& section = doc.sections[s];
      if (section.sentences.empty())
        diagnostics_.push_back(
            {d + 1, "document '" + doc.doc_id + "' section '" +
                    section.section_id + "' has no sentences"});
      for (std::uint32_t p = 0; p < section.sentences.size(); ++p) {
        SentenceEntry entry;
        entry.doc = d;
        entry.section = s;
        entry.position = p;
        for (const auto& token : analyze_document_text(section.sentences[p])) {
          const TermId id = vocab.intern(token);
          if (id >= doc_tf.size()) {
            doc_tf.resize(id + 1, 0);
            stats_.cf.resize(id + 1, 0);
            stats_.df.resize(id + 1, 0);
            stats_.sf.resize(id + 1, 0);
            index_.postings_.resize(id + 1);
          }
          if (doc_tf[id]++ == 0) doc_terms.push_back(id);
          ++stats_.cf[id];
          ++entry.length;
          entry.terms.push_back({id, 1});
        }
        std::sort(entry.terms.begin(), entry.terms.end(),
                  [](const TermCount& a, const TermCount& b) {
                    return a.term < b.term;
                  });
        std::vector<TermCount> merged;
        for (const auto& tc : entry.terms) {
          if (!merged.empty() && merged.back().term == tc.term)
            ++merged.back().count;
          else
            merged.push_back(tc);
        }
        entry.terms = std::move(merged);
        for (const auto& tc : entry.terms) ++stats_.sf[tc.term];
        doc_len += entry.length;
        stats_.total_terms += entry.length;
        ++stats_.sentence_count;
        sentences_.push_back(std::move(entry));
      }
    }
    std::sort(doc_terms.begin(), doc_terms.end());
    for (TermId id : doc_terms) {
      index_.postings_[id].push_back({d, doc_tf[id]});
      ++stats_.df[id];
      doc_tf[id] = 0;
    }
    index_.doc_lengths_.push_back(doc_len);
    doc_first_sentence_.push_back(static_cast<SentenceIndex>(sentences_.size()));
  }
  stats_.doc_count = documents_.size();
  if (stats_.doc_count)
    stats_.avg_doc_len = static_cast<double>(stats_.total_terms) /
                         static_cast<double>(stats_.doc_count);
  if (stats_.sentence_count)
    stats_.avg_sentence_len = static_cast<double>(stats_.total_terms) /
                              static_cast<double>(stats_.sentence_count);
}

std::optional<DocIndex> Corpus::find_document(std::string_view doc_id) const {
  auto it = doc_ids_.find(std::string(doc_id));
  if (it == doc_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> Corpus::find_section(
    DocIndex doc, std::string_view section_id) const {
  const auto& sections = documents_[doc].sections;
  for (std::uint32_t s = 0; s < sections.size(); ++s)
    if (sections[s].section_id == section_id) return s;
  return std::nullopt;
}

const std::string& Corpus::sentence_text(SentenceIndex s) const {
  const SentenceEntry& e = sentences_[s];
  return documents_[e.doc].sections[e.section].sentences[e.position];
}

SentenceRef Corpus::sentence_ref(SentenceIndex s) const {
  const SentenceEntry& e = sentences_[s];
  const Document& doc = documents_[e.doc];
  return {doc.doc_id, doc.sections[e.section].section_id, e.position};
}

std::optional<SentenceIndex> Corpus::resolve(const SentenceRef& ref) const {
  auto doc = find_document(ref.doc_id);
  if (!doc) return std::nullopt;
  auto [first, last] = document_sentences(*doc);
  for (SentenceIndex s = first; s < last; ++s) {
    const SentenceEntry& e = sentences_[s];
    if (e.position == ref.sentence_idx &&
        documents_[*doc].sections[e.section].section_id == ref.section_id)
      return s;
  }
  return std::nullopt;
}

std::optional<SentenceIndex> Corpus::resolve(std::string_view ref) const {
  return resolve(SentenceRef::parse(ref));
}

void Corpus::save(std::ostream& out) const {
  Writer w(out);
  out.write(kIndexMagic.data(), static_cast<std::streamsize>(kIndexMagic.size()));
  w.u32(kIndexVersion);

  w.u8(static_cast<std::uint8_t>(analyzer_.stemmer));
  w.u8(analyzer_.lowercase ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(analyzer_.stopwords.size()));
  for (const auto& sw : analyzer_.stopwords) w.str(sw);

  w.u32(static_cast<std::uint32_t>(documents_.size()));
  for (const auto& doc : documents_) {
    w.str(doc.doc_id);
    w.str(doc.title);
    w.u32(static_cast<std::uint32_t>(doc.sections.size()));
    for (const auto& section : doc.sections) {
      w.str(section.section_id);
      w.str(section.heading);
      w.u32(static_cast<std::uint32_t>(section.sentences.size()));
      for (const auto& sentence : section.sentences) w.str(sentence);
    }
  }

  const auto& vocab = stats_.vocabulary;
  w.u32(static_cast<std::uint32_t>(vocab.size()));
  for (TermId t = 0; t < vocab.size(); ++t) {
    w.str(vocab.term(t));
    w.u64(stats_.cf[t]);
    w.u32(stats_.df[t]);
    w.u32(stats_.sf[t]);
  }

  w.u32(static_cast<std::uint32_t>(sentences_.size()));
  for (const auto& e : sentences_) {
    w.u32(e.doc);
    w.u32(e.section);
    w.u32(e.position);
    w.u32(e.length);
    w.u32(static_cast<std::uint32_t>(e.terms.size()));
    for (const auto& tc : e.terms) {
      w.u32(tc.term);
      w.u32(tc.count);
    }
  }

  w.u32(static_cast<std::uint32_t>(index_.postings_.size()));
  for (const auto& list : index_.postings_) {
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.u32(p.doc);
      w.u32(p.tf);
    }
  }
  for (auto len : index_.doc_lengths_) w.u32(len);

  w.u64(stats_.total_terms);
  w.u64(stats_.doc_count);
  w.u64(stats_.sentence_count);
  w.f64(stats_.avg_doc_len);
  w.f64(stats_.avg_sentence_len);

  w.u32(static_cast<std::uint32_t>(diagnostics_.size()));
  for (const auto& d : diagnostics_) {
    w.u64(d.record);
    w.str(d.message);
  }
  if (!out) throw Error("failed to write index");
}

Corpus Corpus::load(std::istream& in) {
  std::string magic(kIndexMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) ||
      magic != kIndexMagic)
    throw Error("not a dialret index (bad magic header)");
  Reader r(in);
  const auto version = r.u32();
  if (version != kIndexVersion)
    throw Error("unsupported index version " + std::to_string(version));

  Corpus c;
  const auto stemmer = r.u8();
  if (stemmer > static_cast<std::uint8_t>(StemmerKind::light))
    throw Error("index: unknown stemmer kind");
  c.analyzer_.stemmer = static_cast<StemmerKind>(stemmer);
  c.analyzer_.lowercase = r.u8() != 0;
  for (auto n = r.u32(); n > 0; --n) c.analyzer_.stopwords.insert(r.str());

  c.documents_.resize(r.u32());
  for (DocIndex d = 0; d < c.documents_.size(); ++d) {
    auto& doc = c.documents_[d];
    doc.doc_id = r.str();
    doc.title = r.str();
    doc.sections.resize(r.u32());
    for (auto& section : doc.sections) {
      section.section_id = r.str();
      section.heading = r.str();
      section.sentences.resize(r.u32());
      for (auto& sentence : section.sentences) sentence = r.str();
    }
    c.doc_ids_.emplace(doc.doc_id, d);
  }

  const auto vocab_size = r.u32();
  c.stats_.cf.resize(vocab_size);
  c.stats_.df.resize(vocab_size);
  c.stats_.sf.resize(vocab_size);
  for (TermId t = 0; t < vocab_size; ++t) {
    c.stats_.vocabulary.intern(r.str());
    c.stats_.cf[t] = r.u64();
    c.stats_.df[t] = r.u32();
    c.stats_.sf[t] = r.u32();
  }

  c.sentences_.resize(r.u32());
  c.doc_first_sentence_.assign(c.documents_.size() + 1, 0);
  for (SentenceIndex s = 0; s < c.sentences_.size(); ++s) {
    auto& e = c.sentences_[s];
    e.doc = r.u32();
    e.section = r.u32();
    e.position = r.u32();
    e.length = r.u32();
    e.terms.resize(r.u32());
    for (auto& tc : e.terms) {
      tc.term = r.u32();
      tc.count = r.u32();
    }
    if (e.doc >= c.documents_.size()) throw Error("index: corrupt sentence table");
    c.doc_first_sentence_[e.doc + 1] = s + 1;
  }
  for (std::size_t d = 1; d < c.doc_first_sentence_.size(); ++d)
    c.doc_first_sentence_[d] =
        std::max(c.doc_first_sentence_[d], c.doc_first_sentence_[d - 1]);

  c.index_.postings_.resize(r.u32());
  for (auto& list : c.index_.postings_) {
    list.resize(r.u32());
    for (auto& p : list) {
      p.doc = r.u32();
      p.tf = r.u32();
    }
  }
  c.index_.doc_lengths_.resize(c.documents_.size());
  for (auto& len : c.index_.doc_lengths_) len = r.u32();

  c.stats_.total_terms = r.u64();
  c.stats_.doc_count = r.u64();
  c.stats_.sentence_count = r.u64();
  c.stats_.avg_doc_len = r.f64();
  c.stats_.avg_sentence_len = r.f64();

  c.diagnostics_.resize(r.u32());
  for (auto& d : c.diagnostics_) {
    d.record = r.u64();
    d.message = r.str();
  }
  return c;
}

void Corpus::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write index file: " + path);
  save(out);
}

Corpus Corpus::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index file: " + path);
  return load(in);
}

std::vector<Document> read_corpus_jsonl(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;  // doc_id -> line
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error("corpus line " + std::to_string(line) +
                  ": malformed JSON: " + e.what());
    }
    if (!record.is_object())
      throw Error("corpus line " + std::to_string(line) + ": record is not an object");

    Document doc;
    doc.doc_id = require_string(record, "id", line);
    doc.title = record.contains("title") ? require_string(record, "title", line) : "";
    const json& sections = require(record, "sections", line, "");
    if (!sections.is_array())
      throw Error(field_error(line, "sections", "must be a list"));
    for (std::size_t i = 0; i < sections.size(); ++i) {
      const json& js = sections[i];
      const std::string path = "sections[" + std::to_string(i) + "].";
      if (!js.is_object())
        throw Error(field_error(line, "sections[" + std::to_string(i) + "]",
                                "must be an object"));
      Section section;
      section.section_id = require_string(js, "id", line, path);
      section.heading =
          js.contains("heading") ? require_string(js, "heading", line, path) : "";
      const json& sentences = require(js, "sentences", line, path);
      if (!sentences.is_array())
        throw Error(field_error(line, path + "sentences", "must be a list"));
      for (const auto& s : sentences) {
        if (!s.is_string())
          throw Error(field_error(line, path + "sentences", "must hold strings"));
        section.sentences.push_back(s.get<std::string>());
      }
      doc.sections.push_back(std::move(section));
    }
    auto [it, inserted] = seen.emplace(doc.doc_id, line);
    if (!inserted)
      throw Error("duplicate doc_id '" + doc.doc_id + "' at lines " +
                  std::to_string(it->second) + " and " + std::to_string(line));
    try {
      validate_id(doc.doc_id, "id");
      if (doc.sections.empty()) throw Error("document has no sections");
      for (const auto& s : doc.sections) validate_id(s.section_id, "sections.id");
    } catch (const Error& e) {
      throw Error("corpus line " + std::to_string(line) + ": " + e.what());
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

Corpus ingest_corpus(std::istream& in, const AnalyzerConfig& config) {
  return Corpus::build(read_corpus_jsonl(in), config);
}

Corpus ingest_corpus(const std::string& path, const AnalyzerConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  return ingest_corpus(in, config);
}

std::string document_to_json_line(const Document& doc) {
  json sections = json::array();
  for (const auto& s : doc.sections)
    sections.push_back(
        {{"id", s.section_id}, {"heading", s.heading}, {"sentences", s.sentences}});
  json record = {{"id", doc.doc_id}, {"title", doc.title}, {"sections", sections}};
  return record.dump();
}

}  // namespace dialret
