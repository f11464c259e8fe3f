#pragma once

#include <stdexcept>
#include <string>

namespace fedstone {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent model/layout/federation configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid caller-supplied values (labels, counts, severities).
class InputError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Violations of the server/client round protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Run manifests that fail hash or linkage checks.
class ProvenanceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedstone
