#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ccdae {

/// Precondition violated by caller-supplied data.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fewer than two usable hypotheses survived batch construction.
class DegenerateBatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Discrete description problem has an empty feasible set.
class NoFeasibleDescription : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Failure reported by a scoring backend. `retryable()` is true for
/// transport failures and 5xx responses.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable = false,
               std::string endpoint = {}, int status = 0)
      : std::runtime_error(what),
        retryable_(retryable),
        endpoint_(std::move(endpoint)),
        status_(status) {}

  bool retryable() const noexcept { return retryable_; }
  const std::string& endpoint() const noexcept { return endpoint_; }
  int status() const noexcept { return status_; }

 private:
  bool retryable_;
  std::string endpoint_;
  int status_;
};

}  // namespace ccdae
