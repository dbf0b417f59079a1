#pragma once

#include <stdexcept>
#include <string>

namespace anydoor {

// Every failure raised by the library derives from Error so callers can
// catch one type; the subclasses carry the failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyObjectError : public Error {
 public:
  using Error::Error;
};

class InsufficientFramesError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalDivergence : public Error {
 public:
  NumericalDivergence(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

// Wraps an error with the pipeline stage it came from, keeping the category.
template <typename E>
[[noreturn]] void rethrow_with_stage(const std::string& stage, const E& e) {
  throw E(stage + ": " + e.what());
}

}  // namespace anydoor
