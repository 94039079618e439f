#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dialret {

// Token budgets applied to query and text before they leave the process.
struct TokenBudget {
  std::size_t max_query_tokens = 64;
  std::size_t max_text_tokens = 112;
};

// Keeps the first `max_tokens` whitespace-separated tokens, re-joined with
// single spaces.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

struct ScoreRequest {
  std::string id;
  std::string query;
  std::string text;
};

struct EmbedRequest {
  std::string id;
  std::string text;
};

// Relevance scorer for (query, text) pairs. Returned scores align with the
// request order. A handle serves one batch at a time.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score(std::span<const ScoreRequest> requests) = 0;
  virtual TokenBudget budget() const { return {}; }
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::vector<double>> embed(std::span<const EmbedRequest> requests) = 0;
  virtual TokenBudget budget() const { return {}; }
};

// Number of distinct lowercased tokens shared by query and text. Stands in
// for a neural cross-encoder so everything runs without a model.
class OverlapScorer final : public Scorer {
 public:
  static double overlap(std::string_view query, std::string_view text);
  std::vector<double> score(std::span<const ScoreRequest> requests) override;
};

// Feature-hashing bag-of-words embedder (FNV-1a buckets, L2-normalized).
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = 64) : dimension_(dimension) {}
  static std::vector<double> vectorize(std::string_view text, std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed(std::span<const EmbedRequest> requests) override;

 private:
  std::size_t dimension_;
};

struct ExternalScorerHandle {
  std::vector<std::string> command;  // argv of the child process
  std::chrono::milliseconds timeout{30000};
  TokenBudget budget;
};

// Line-delimited JSON child process. stdout/stdin wiring:
//   handshake  -> {"protocol":1}        <- {"protocol":1[,"dimension":D]}
//   batch      -> one request per line, then an empty line
//              <- one response per id in any order, then an empty line
class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& command);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  // Writes `lines` (each newline-terminated) while reading response lines
  // until an empty line arrives. Throws on timeout or child exit.
  std::vector<std::string> exchange(std::span<const std::string> lines,
                                    std::chrono::milliseconds timeout,
                                    bool until_empty_line);

 private:
  std::optional<std::string> take_line();

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class SubprocessScorer final : public Scorer {
 public:
  explicit SubprocessScorer(ExternalScorerHandle handle);
  std::vector<double> score(std::span<const ScoreRequest> requests) override;
  TokenBudget budget() const override { return handle_.budget; }

 private:
  ExternalScorerHandle handle_;
  std::unique_ptr<ChildProcess> child_;
};

class SubprocessEmbedder final : public Embedder {
 public:
  explicit SubprocessEmbedder(ExternalScorerHandle handle);
  std::size_t dimension() const override { return dimension_; }
  std::vector<std::vector<double>> embed(std::span<const EmbedRequest> requests) override;
  TokenBudget budget() const override { return handle_.budget; }

 private:
  ExternalScorerHandle handle_;
  std::unique_ptr<ChildProcess> child_;
  std::size_t dimension_ = 0;
};

namespace protocol {

inline constexpr int kVersion = 1;

std::string handshake_line();
std::string encode(const ScoreRequest& request);
std::string encode(const EmbedRequest& request);

// Matches a batch of response lines to request ids; throws naming the
// offending request id on a missing, unknown, duplicated or failed id.
std::vector<double> decode_scores(std::span<const std::string> lines,
                                  std::span<const ScoreRequest> requests);
std::vector<std::vector<double>> decode_vectors(std::span<const std::string> lines,
                                                std::span<const EmbedRequest> requests,
                                                std::size_t dimension);

}  // namespace protocol

std::vector<std::string> split_command(std::string_view command);

}  // namespace dialret
