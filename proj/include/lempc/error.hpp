#pragma once

#include <stdexcept>
#include <string>

namespace lempc {

// Bad input: dimension mismatches, malformed configs, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed: non-convergence, divergence, infeasibility
// where a feasible problem was required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The state left the domain where the safety guarantee holds.
class OutOfDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LEMPC_REQUIRE(cond, msg)                     \
  do {                                               \
    if (!(cond)) throw ::lempc::ValidationError(msg); \
  } while (0)

}  // namespace lempc
