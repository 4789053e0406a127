#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ginc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

class InvalidToken : public Error {
 public:
  using Error::Error;
};

// Raised when conditioning on an observation sequence of probability zero.
class UndefinedPosterior : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `location` is a 1-based line number for corpus files
// and a 0-based record index for prompt files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t location)
      : Error(what), location_(location) {}

  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

}  // namespace ginc
