#include "dialret/scorer.h"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "dialret/analysis.h"
#include "dialret/error.h"

namespace dialret {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  std::string out;
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size() && count < max_tokens) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (!out.empty()) out.push_back(' ');
    out.append(text.substr(i, j - i));
    ++count;
    i = j;
  }
  return out;
}

double OverlapScorer::overlap(std::string_view query, std::string_view text) {
  const auto q = tokenize(query, true);
  const auto t = tokenize(text, true);
  const std::set<std::string> qs(q.begin(), q.end());
  const std::set<std::string> ts(t.begin(), t.end());
  double shared = 0.0;
  for (const auto& w : qs) shared += ts.count(w) ? 1.0 : 0.0;
  return shared;
}

std::vector<double> OverlapScorer::score(std::span<const ScoreRequest> requests) {
  std::vector<double> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(overlap(r.query, r.text));
  return out;
}

std::vector<double> HashingEmbedder::vectorize(std::string_view text,
                                               std::size_t dimension) {
  std::vector<double> v(dimension, 0.0);
  if (dimension == 0) return v;
  for (const auto& token : tokenize(text, true)) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    v[h % dimension] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

std::vector<std::vector<double>> HashingEmbedder::embed(
    std::span<const EmbedRequest> requests) {
  std::vector<std::vector<double>> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(vectorize(r.text, dimension_));
  return out;
}

ChildProcess::ChildProcess(const std::vector<std::string>& command) {
  if (command.empty()) throw ScorerError("external scorer: empty command");
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
    throw ScorerError(std::string("external scorer: socketpair failed: ") + std::strerror(errno));
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw ScorerError(std::string("external scorer: fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    close(fds[0]);
    dup2(fds[1], STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[1]);
    std::vector<char*> argv;
    for (const auto& arg : command) argv.push_back(const_cast<char*>(arg.c_str()));
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(fds[1]);
  pid_ = pid;
  to_child_ = from_child_ = fds[0];
  fcntl(to_child_, F_SETFL, fcntl(to_child_, F_GETFL) | O_NONBLOCK);
}

ChildProcess::~ChildProcess() {
  if (to_child_ >= 0) {
    shutdown(to_child_, SHUT_WR);
  }
  if (pid_ > 0) {
    const auto deadline = Clock::now() + std::chrono::milliseconds(500);
    int status = 0;
    while (waitpid(pid_, &status, WNOHANG) == 0) {
      if (Clock::now() > deadline) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
  if (to_child_ >= 0) close(to_child_);
}

std::optional<std::string> ChildProcess::take_line() {
  const auto nl = buffer_.find('\n');
  if (nl == std::string::npos) return std::nullopt;
  std::string line = buffer_.substr(0, nl);
  buffer_.erase(0, nl + 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> ChildProcess::exchange(std::span<const std::string> lines,
                                                std::chrono::milliseconds timeout,
                                                bool until_empty_line) {
  std::string pending;
  for (const auto& l : lines) {
    pending += l;
    pending.push_back('\n');
  }
  std::size_t written = 0;
  std::vector<std::string> received;
  const auto deadline = Clock::now() + timeout;
  char chunk[65536];

  auto drain = [&]() -> bool {
    while (auto line = take_line()) {
      if (until_empty_line && line->empty()) return true;
      received.push_back(std::move(*line));
      if (!until_empty_line) return true;
    }
    return false;
  };

  if (drain()) return received;
  for (;;) {
    const auto now = Clock::now();
    if (now >= deadline) throw ScorerError("external scorer: timed out waiting for response");
    const auto wait =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{to_child_, static_cast<short>(POLLIN | (written < pending.size() ? POLLOUT : 0)), 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::max<long long>(1, wait)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(std::string("external scorer: poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    if ((pfd.revents & POLLOUT) && written < pending.size()) {
      const ssize_t n = send(to_child_, pending.data() + written, pending.size() - written,
                             MSG_NOSIGNAL);
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)
        throw ScorerError("external scorer: process closed its input");
      if (n > 0) written += static_cast<std::size_t>(n);
    }
    if (pfd.revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t n = recv(from_child_, chunk, sizeof chunk, 0);
      if (n == 0) throw ScorerError("external scorer: process exited before responding");
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
        throw ScorerError(std::string("external scorer: read failed: ") + std::strerror(errno));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
      if (drain()) return received;
    }
  }
}

namespace {

json handshake(ChildProcess& child, std::chrono::milliseconds timeout) {
  const std::string hello = protocol::handshake_line();
  auto reply = child.exchange(std::span<const std::string>(&hello, 1), timeout, false);
  json j;
  try {
    j = json::parse(reply.at(0));
  } catch (const std::exception&) {
    throw ScorerError("external scorer: malformed handshake reply");
  }
  if (!j.is_object() || !j.contains("protocol") || j["protocol"] != protocol::kVersion)
    throw ScorerError("external scorer: protocol version mismatch");
  return j;
}

template <typename Request>
void check_unique_ids(std::span<const Request> requests) {
  std::set<std::string_view> ids;
  for (const auto& r : requests)
    if (!ids.insert(r.id).second) throw ScorerError("external scorer: duplicate request id " + r.id);
}

// Parses response lines into id -> record, enforcing the 1:1 id contract.
template <typename Request>
std::map<std::string, json> match_responses(std::span<const std::string> lines,
                                            std::span<const Request> requests) {
  std::map<std::string, std::size_t> pending;
  for (std::size_t i = 0; i < requests.size(); ++i) pending.emplace(requests[i].id, i);
  std::map<std::string, json> by_id;
  for (const auto& line : lines) {
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception&) {
      throw ScorerError("external scorer: malformed response line: " + line);
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
      throw ScorerError("external scorer: response without id: " + line);
    const std::string id = j["id"].get<std::string>();
    if (!pending.count(id)) throw ScorerError("external scorer: unexpected response id " + id);
    if (j.contains("error"))
      throw ScorerError("external scorer: request " + id + " failed: " + j["error"].dump());
    if (!by_id.emplace(id, std::move(j)).second)
      throw ScorerError("external scorer: duplicate response for request " + id);
  }
  for (const auto& r : requests)
    if (!by_id.count(r.id)) throw ScorerError("external scorer: no response for request " + r.id);
  return by_id;
}

}  // namespace

namespace protocol {

std::string handshake_line() { return json{{"protocol", kVersion}}.dump(); }

std::string encode(const ScoreRequest& r) {
  return json{{"id", r.id}, {"query", r.query}, {"text", r.text}}.dump();
}

std::string encode(const EmbedRequest& r) {
  return json{{"id", r.id}, {"text", r.text}}.dump();
}

std::vector<double> decode_scores(std::span<const std::string> lines,
                                  std::span<const ScoreRequest> requests) {
  const auto by_id = match_responses(lines, requests);
  std::vector<double> scores;
  scores.reserve(requests.size());
  for (const auto& r : requests) {
    const json& j = by_id.at(r.id);
    if (!j.contains("score") || !j["score"].is_number())
      throw ScorerError("external scorer: request " + r.id + " has no numeric score");
    const double s = j["score"].get<double>();
    if (!std::isfinite(s)) throw ScorerError("external scorer: request " + r.id + " score not finite");
    scores.push_back(s);
  }
  return scores;
}

std::vector<std::vector<double>> decode_vectors(std::span<const std::string> lines,
                                                std::span<const EmbedRequest> requests,
                                                std::size_t dimension) {
  const auto by_id = match_responses(lines, requests);
  std::vector<std::vector<double>> vectors;
  vectors.reserve(requests.size());
  for (const auto& r : requests) {
    const json& j = by_id.at(r.id);
    if (!j.contains("vector") || !j["vector"].is_array())
      throw ScorerError("external embedder: request " + r.id + " has no vector");
    std::vector<double> v;
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) throw ScorerError("external embedder: request " + r.id + " non-numeric vector");
      v.push_back(x.get<double>());
    }
    if (v.size() != dimension)
      throw ScorerError("external embedder: request " + r.id + " dimension mismatch (" +
                  std::to_string(v.size()) + " != " + std::to_string(dimension) + ")");
    vectors.push_back(std::move(v));
  }
  return vectors;
}

}  // namespace protocol

SubprocessScorer::SubprocessScorer(ExternalScorerHandle handle)
    : handle_(std::move(handle)),
      child_(std::make_unique<ChildProcess>(handle_.command)) {
  handshake(*child_, handle_.timeout);
}

std::vector<double> SubprocessScorer::score(std::span<const ScoreRequest> requests) {
  check_unique_ids(requests);
  std::vector<std::string> lines;
  lines.reserve(requests.size() + 1);
  for (const auto& r : requests) lines.push_back(protocol::encode(r));
  lines.emplace_back();
  const auto responses = child_->exchange(lines, handle_.timeout, true);
  return protocol::decode_scores(responses, requests);
}

SubprocessEmbedder::SubprocessEmbedder(ExternalScorerHandle handle)
    : handle_(std::move(handle)),
      child_(std::make_unique<ChildProcess>(handle_.command)) {
  const json reply = handshake(*child_, handle_.timeout);
  if (!reply.contains("dimension") || !reply["dimension"].is_number_unsigned() ||
      reply["dimension"].get<std::size_t>() == 0)
    throw ScorerError("external embedder: handshake did not declare a dimension");
  dimension_ = reply["dimension"].get<std::size_t>();
}

std::vector<std::vector<double>> SubprocessEmbedder::embed(
    std::span<const EmbedRequest> requests) {
  check_unique_ids(requests);
  std::vector<std::string> lines;
  lines.reserve(requests.size() + 1);
  for (const auto& r : requests) lines.push_back(protocol::encode(r));
  lines.emplace_back();
  const auto responses = child_->exchange(lines, handle_.timeout, true);
  return protocol::decode_vectors(responses, requests, dimension_);
}

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> argv;
  std::string current;
  bool in_token = false;
  char quote = 0;
  for (char c : command) {
    if (quote) {
      if (c == quote) quote = 0;
      else current.push_back(c);
    } else if (c == '"' || c == '\'') {
      quote = c;
      in_token = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_token) argv.push_back(std::move(current));
      current.clear();
      in_token = false;
    } else {
      current.push_back(c);
      in_token = true;
    }
  }
  if (quote) throw Error("unterminated quote in command: " + std::string(command));
  if (in_token) argv.push_back(std::move(current));
  return argv;
}

}  // namespace dialret
