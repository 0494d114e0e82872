#pragma once

#include <stdexcept>
#include <string>

namespace sotead {

// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// A key or id that does not resolve to an entity.
class ReferenceError : public Error {
 public:
  ReferenceError(const std::string& key, const std::string& what)
      : Error(what + ": '" + key + "'"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class DuplicateError : public Error {
 public:
  DuplicateError(const std::string& key, const std::string& what)
      : Error(what + ": '" + key + "'"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised by training when the loss stops being finite.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace sotead
