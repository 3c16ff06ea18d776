#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rclab {

// Error taxonomy shared by every module. Callers that only care about
// "something went wrong" catch rclab::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::string node = {}, long iteration = -1)
      : Error(what), node_(std::move(node)), iteration_(iteration) {}

  const std::string& node() const noexcept { return node_; }
  long iteration() const noexcept { return iteration_; }

 private:
  std::string node_;
  long iteration_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class IncompatibleArchitectureError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace rclab
