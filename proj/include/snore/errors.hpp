#pragma once

#include <stdexcept>
#include <string>

namespace snore {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class ArgumentError : public Error {
public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Well-formed input using an encoding we do not read.
class UnsupportedFormatError : public Error {
public:
  using Error::Error;
};

/// Two inputs that must agree in shape, length or rate do not.
class MismatchError : public Error {
public:
  using Error::Error;
};

/// Input carries no usable information (zero-RMS noise, all-zero differences).
class DegenerateError : public Error {
public:
  using Error::Error;
};

/// Signal too short for the requested analysis.
class TooShortError : public Error {
public:
  using Error::Error;
};

/// Spectrogram of the wrong kind for the operation.
class KindError : public Error {
public:
  using Error::Error;
};

/// Synthesis request whose partials would exceed Nyquist.
class AliasingError : public Error {
public:
  using Error::Error;
};

/// Not enough source material to honor a disjointness requirement.
class PoolExhaustedError : public Error {
public:
  using Error::Error;
};

/// A protocol invariant (e.g. subject disjointness) does not hold.
class InvariantViolation : public Error {
public:
  using Error::Error;
};

/// Filesystem or IO failure.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace snore
