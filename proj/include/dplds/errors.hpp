#pragma once

#include <stdexcept>
#include <string>

namespace dplds {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix/vector shapes. Messages name the offending operand.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter lies outside its admissible range, or an input matrix fails a
/// structural requirement (symmetry, positive semidefiniteness, finiteness).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A rank premise does not hold (e.g. a lifted operator that is not full row
/// rank where the noise design requires it).
class RankError : public Error {
 public:
  using Error::Error;
};

/// The requested privacy level cannot be met by any finite noise.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to converge or a factorization broke down.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dplds
