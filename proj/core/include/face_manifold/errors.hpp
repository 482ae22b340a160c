#pragma once

#include <stdexcept>
#include <string>

namespace face_manifold {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument value was violated (out-of-range flag, k <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Array lengths or channel counts do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow its binary layout (magic, enum byte, declared sizes).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file ended before a declared section was complete.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace face_manifold
