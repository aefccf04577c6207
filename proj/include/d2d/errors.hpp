#pragma once

#include <stdexcept>
#include <string>

namespace d2d {

/// Input outside an operation's mathematical domain (negative distance, negative SINR, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Problem too large for an enumeration-based routine.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// A pivot or linear solve hit a singular or sign-infeasible matrix.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pivoting revisited a basis it had already used.
class CyclingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace d2d
