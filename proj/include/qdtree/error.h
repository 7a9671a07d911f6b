#pragma once

#include <stdexcept>
#include <string>

namespace qdtree {

// Base for every error raised by the library. Subclasses name the failure;
// the message carries the details.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DegenerateCut : public Error {
 public:
  using Error::Error;
};

class NotALeaf : public Error {
 public:
  using Error::Error;
};

class AssignmentMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class BoundViolation : public Error {
 public:
  using Error::Error;
};

class UnsupportedQueryShape : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class NoNeighbor : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

}  // namespace qdtree
