#pragma once

#include <stdexcept>
#include <string>

namespace aplm {

// Bad inputs: malformed CSV, degenerate covariates, illegal nuisance parameters.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures: singular or ill-conditioned systems, failed selection.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Command-line misuse; carries the message shown to the user.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aplm
