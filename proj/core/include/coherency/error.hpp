#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coherency {

// Base for every error raised by the library. Callers that only need a
// message can catch std::runtime_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frame length differs from the stream's channel count, or a stream/config
// shape is otherwise inconsistent.
class StreamShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite sample, non-monotone timestamp or irregular sample spacing.
class InputQualityError : public Error {
 public:
  InputQualityError(const std::string& what, std::size_t bus, std::size_t sample)
      : Error(what), bus_(bus), sample_(sample) {}

  explicit InputQualityError(const std::string& what)
      : Error(what), bus_(npos), sample_(npos) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t bus() const { return bus_; }
  std::size_t sample() const { return sample_; }

 private:
  std::size_t bus_;
  std::size_t sample_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  InsufficientDataError() : Error("insufficient data") {}
  explicit InsufficientDataError(const std::string& what) : Error(what) {}
};

// Malformed CSV, JSON line or sidecar document.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace coherency
