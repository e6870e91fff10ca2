#pragma once

#include <stdexcept>
#include <string>

namespace uhred {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent file contents.
class FormatError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Tensor, spectrum or cube dimensions that do not fit together.
class ShapeError : public Error {
public:
  using Error::Error;
};

class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Input that admits no meaningful answer (all-zero cube, zero variance, ...).
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

class RepairError : public Error {
public:
  using Error::Error;
};

/// Backward pass requested without the cached forward state it needs.
class StateError : public Error {
public:
  using Error::Error;
};

/// NaN or infinity encountered during computation.
class NumericError : public Error {
public:
  using Error::Error;
};

class GenerationError : public Error {
public:
  using Error::Error;
};

} // namespace uhred
