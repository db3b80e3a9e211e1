#pragma once

#include <stdexcept>
#include <string>

namespace fbt {

/** @brief Root of every error raised by the library. */
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched alphabet sizes, blocklengths or ground sets.
struct DimensionError : Error {
  using Error::Error;
};

/// Input exceeds an enumeration or solver cap.
struct CapacityError : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain (zero-probability sequence, empty set, bad width).
struct DomainError : Error {
  using Error::Error;
};

/// Malformed distribution, channel, code or configuration.
struct ValidationError : Error {
  using Error::Error;
};

/// Conditioning on an event of probability zero.
struct ConditioningError : Error {
  using Error::Error;
};

/// Violated precondition of a construction (error probability too high, partition mismatch).
struct PreconditionError : Error {
  using Error::Error;
};

/// A certified invariant failed to hold on a computed object.
struct InvariantError : Error {
  using Error::Error;
};

}  // namespace fbt
