#pragma once

#include <stdexcept>
#include <string>

namespace splitguard {

// Inconsistent dimensions or invalid hyperparameters supplied at construction.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An API called out of order or with arguments it cannot accept.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values appeared during training; the owning trial is aborted.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violation of the client/server exchange contract.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed IDX input. Carries the byte offset at which parsing failed.
class IngestionError : public IoError {
 public:
  IngestionError(const std::string& what, std::size_t offset)
      : IoError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace splitguard
