#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tebkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message names the violated bound.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, std::size_t eligible)
      : Error(what), eligible_(eligible) {}
  std::size_t eligible() const noexcept { return eligible_; }

 private:
  std::size_t eligible_;
};

/// A requested misclassification rate cannot be realised on the dataset.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double max_epsilon)
      : Error(what), max_epsilon_(max_epsilon) {}
  double max_epsilon() const noexcept { return max_epsilon_; }

 private:
  double max_epsilon_;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  /// Zero-based epoch in which training failed, -1 before the first epoch.
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or text input. `offset` is the byte (or line) position.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tebkit
