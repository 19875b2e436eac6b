#pragma once

#include <stdexcept>
#include <string>

namespace atr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameter values supplied by a caller (maps to a usage failure in the CLI).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input files.
class InputError : public Error {
 public:
  using Error::Error;
};

class FileError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class InvalidRecordError : public InputError {
 public:
  using InputError::InputError;
};

class WeightFileError : public InputError {
 public:
  using InputError::InputError;
};

class BadMagicError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

class VersionMismatchError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

class TruncationError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

class ShapeMismatchError : public WeightFileError {
 public:
  using WeightFileError::WeightFileError;
};

// Numeric preconditions violated or degenerate numeric input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteError : public NumericError {
 public:
  using NumericError::NumericError;
};

class EmptyContextError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateProjectionError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SequenceLengthError : public NumericError {
 public:
  using NumericError::NumericError;
};

class VocabError : public NumericError {
 public:
  using NumericError::NumericError;
};

class EmptyInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace atr
