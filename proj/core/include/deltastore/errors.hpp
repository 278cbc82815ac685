#pragma once
// Error taxonomy shared by the storage engine, quantizer, and loader.
// Each class maps to one operator-visible failure mode; the CLI maps
// them to process exit codes.

#include <stdexcept>
#include <string>

namespace deltastore {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor payload violates an ingest invariant (NaN/Inf, empty, bad shape).
class InvalidTensor : public Error {
 public:
  using Error::Error;
};

// Element counts of two tensors disagree where they must match.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// The requested precision tolerance would need more than 32 bits per delta
// element.
class ToleranceTooTight : public Error {
 public:
  using Error::Error;
};

// On-disk state failed structural validation (bad magic, truncated file,
// dangling reference, inconsistent offsets).
class CorruptStore : public Error {
 public:
  using Error::Error;
};

// A file carries a format version this build does not understand.
class UnsupportedVersion : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class DuplicateName : public Error {
 public:
  using Error::Error;
};

// Operating-system level I/O failure (open, write, rename, chmod).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace deltastore
