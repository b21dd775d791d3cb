#pragma once

#include <stdexcept>
#include <string>

namespace geolab {

/// Base class of every error raised by the library. `code()` is a short
/// stable identifier used in the CLI's machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& m) : Error("invalid-input", m) {}
};

/// Malformed annotation or container file. `field()` names the offending
/// JSON path, e.g. `form[3].box`.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& m)
      : Error("parse", field + ": " + m), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& m) : Error("numeric", m) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& m) : Error("generation", m) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& m) : Error("evaluation", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

/// Missing or inconsistent pipeline artifact (checkpoint, corpus, cache).
class ArtifactError : public Error {
 public:
  explicit ArtifactError(const std::string& m) : Error("artifact", m) {}
};

}  // namespace geolab
