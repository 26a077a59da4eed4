#pragma once

#include <stdexcept>
#include <string>

namespace ssagan {

/// Base class of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad hyperparameters, unsupported scale, empty inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid user data: shape mismatches, out-of-range ids, untokenizable captions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or archive failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Internal contract violation, e.g. asking for gradients of something that is not differentiable.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssagan
