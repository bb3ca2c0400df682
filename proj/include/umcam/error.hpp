#pragma once

#include <stdexcept>
#include <string>

namespace umcam {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad shape, out-of-range value).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File was readable but its content is malformed or unsupported.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Manifest or configuration document does not match its schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent run configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace umcam
