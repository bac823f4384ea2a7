#pragma once

#include <stdexcept>
#include <string>

namespace samif {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values or shapes passed to a numeric routine.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Inconsistent or out-of-range configuration.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Training or an iterative solver produced non-finite or exploding values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// The worst-case perturbation is not differentiable where the loss gradient vanishes.
class SingularPerturbation : public Error {
 public:
  using Error::Error;
};

// Malformed files, bad magic numbers, truncated data, unwritable paths.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace samif
