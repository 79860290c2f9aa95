#pragma once

#include <stdexcept>
#include <string>

namespace bbic {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyIntervalError : public Error {
 public:
  using Error::Error;
};

class TooManyAgentsError : public Error {
 public:
  using Error::Error;
};

class OffSupportError : public Error {
 public:
  using Error::Error;
};

class SupportTooLargeError : public Error {
 public:
  using Error::Error;
};

class BadEpsilonError : public Error {
 public:
  using Error::Error;
};

class EmptyPieceError : public Error {
 public:
  using Error::Error;
};

class DeltaOverflowError : public Error {
 public:
  using Error::Error;
};

class IterationCapError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class NonTerminationError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace bbic
