#pragma once

#include <stdexcept>
#include <string>

namespace coconts {

// Base of every error the library raises. Callers that only need to
// distinguish "bad input" from "bad bytes" can use the two subtrees:
// DomainError and its children, or IoError / FormatError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// A prefix with zero occurrences in the trie.
class UnseenPrefix : public DomainError {
 public:
  using DomainError::DomainError;
};

// A truncated distribution with no mass (p <= 0, or a node without children).
class EmptySupport : public DomainError {
 public:
  using DomainError::DomainError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace coconts
