// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mesrnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (bad enum, wrong ordering, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A pedestrian was queried at a step where it is not present.
class PresenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable input data (dataset files, scenes, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file could not be read or does not match the requested model.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Training produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mesrnn
