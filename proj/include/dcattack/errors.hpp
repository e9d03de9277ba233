#pragma once

#include <stdexcept>
#include <string>

namespace dcattack {

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line = 0)
      : Error("parse", line > 0 ? "line " + std::to_string(line) + ": " + message
                                : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& message) : Error("model", message) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& message) : Error("solver", message) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& message) : Error("precondition", message) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& message) : Error("geometry", message) {}
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& message) : Error("invariant", message) {}
};

}  // namespace dcattack
