// Deterministic protocol peer for tests: lexical-overlap scores or hashing
// embeddings, with switchable faults.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dialret/scorer.h"

using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"Stub scorer speaking the line-delimited JSON protocol"};
  std::string mode = "score";
  std::string fault = "none";
  std::size_t dimension = 64;
  int sleep_ms = 0;
  bool reverse = false;
  app.add_option("--mode", mode, "score|embed")->check(CLI::IsMember({"score", "embed"}));
  app.add_option("--dimension", dimension, "Embedding dimension");
  app.add_flag("--reverse", reverse, "Answer each batch in reverse request order");
  app.add_option("--fault", fault,
                 "none|drop-id|bad-json|wrong-id|error-record|wrong-dim|constant|"
                 "bad-handshake|sleep|exit")
      ->check(CLI::IsMember({"none", "drop-id", "bad-json", "wrong-id", "error-record",
                             "wrong-dim", "constant", "bad-handshake", "sleep", "exit"}));
  app.add_option("--sleep-ms", sleep_ms, "Delay before each batch reply with --fault sleep");
  CLI11_PARSE(app, argc, argv);

  std::string line;
  if (!std::getline(std::cin, line)) return 0;
  json hello = {{"protocol", fault == "bad-handshake" ? 2 : 1}};
  if (mode == "embed") hello["dimension"] = dimension;
  std::cout << hello.dump() << '\n' << std::flush;

  std::vector<json> batch;
  while (std::getline(std::cin, line)) {
    if (!line.empty()) {
      json request;
      try {
        request = json::parse(line);
      } catch (const std::exception&) {
        request = json{{"malformed", true}};
      }
      batch.push_back(std::move(request));
      continue;
    }
    if (fault == "exit") return 3;
    if (fault == "sleep") std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));

    std::vector<std::string> replies;
    for (const auto& r : batch) {
      json out;
      out["id"] = r.contains("id") ? r["id"] : json();
      const bool ok = r.contains("id") && r["id"].is_string() && r.contains("text") &&
                      r["text"].is_string() &&
                      (mode == "embed" || (r.contains("query") && r["query"].is_string()));
      if (!ok) {
        out["error"] = "malformed request";
      } else if (mode == "score") {
        out["score"] = fault == "constant"
                           ? 1.0
                           : dialret::OverlapScorer::overlap(r["query"].get<std::string>(),
                                                             r["text"].get<std::string>());
      } else {
        const std::size_t dim = fault == "wrong-dim" ? dimension + 1 : dimension;
        out["vector"] = dialret::HashingEmbedder::vectorize(r["text"].get<std::string>(), dim);
      }
      replies.push_back(out.dump());
    }
    if (!replies.empty()) {
      if (fault == "drop-id") replies.pop_back();
      if (fault == "bad-json") replies.front() = "{not json";
      if (fault == "wrong-id") {
        json j = json::parse(replies.front());
        j["id"] = "no-such-id";
        replies.front() = j.dump();
      }
      if (fault == "error-record") {
        json j = json::parse(replies.front());
        replies.front() = json{{"id", j["id"]}, {"error", "injected failure"}}.dump();
      }
    }
    if (reverse) std::reverse(replies.begin(), replies.end());
    for (const auto& r : replies) std::cout << r << '\n';
    std::cout << '\n' << std::flush;
    batch.clear();
  }
  return 0;
}
