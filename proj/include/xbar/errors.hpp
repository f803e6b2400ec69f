#pragma once

#include <stdexcept>
#include <string>

namespace xbar {

// Violated API precondition (bad dimensions, non-bijective permutation, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Numerical failure: solver did not converge, rank-deficient fit, NaN loss.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed config file or bad command-line usage.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked before the artifact it needs exists.
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace xbar
