#pragma once

#include <stdexcept>
#include <string>

namespace dialret {

// Raised for malformed input, violated preconditions and protocol failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A broken external scorer or embedder process. Callers that skip bad
// records keep going on Error but must not swallow this one.
class ScorerError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialret
