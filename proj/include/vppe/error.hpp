#pragma once

#include <stdexcept>
#include <string>

namespace vppe {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// A matrix could not be factorized even after diagonal jitter escalation.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

// Data make the marginal likelihood undefined (e.g. S^2 <= 0, constant input).
class DegenerateData : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace vppe
