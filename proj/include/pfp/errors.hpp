#pragma once

// Exception types shared by the pfp library. Argument and range problems
// use std::invalid_argument directly; everything below carries extra
// context that callers routinely inspect.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace pfp {

// A caller broke a documented precondition (missing mask, zero budget, ...).
class PreconditionViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// The requested augmentation mode cannot be applied to this feature kind.
class UnsupportedMode : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

// Remote parser unreachable after all retries.
class ServiceUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote parser answered, but the body violates the wire contract.
class ParseProtocolError : public std::runtime_error {
 public:
  ParseProtocolError(const std::string& what, std::string raw_body)
      : std::runtime_error(what), raw_body_(std::move(raw_body)) {}

  const std::string& raw_body() const noexcept { return raw_body_; }

 private:
  std::string raw_body_;
};

class IngestionError : public std::runtime_error {
 public:
  IngestionError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pfp
