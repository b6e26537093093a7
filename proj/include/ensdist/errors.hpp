// ensdist/errors.hpp

// Copyright 2026 The ensdist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENSDIST_ERRORS_HPP_
#define ENSDIST_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ensdist {

// Base class for all library errors. CLI exit codes: ConfigError -> 2,
// DataError -> 3, NumericError -> 4, anything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Wrong number of components (K mismatch, zero-length weight vectors, ...).
class InvalidArityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// WER against an empty reference with a non-empty hypothesis.
class UndefinedWerError : public DataError {
 public:
  using DataError::DataError;
};

class EmptySetError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

// Non-positive n-best score; decoders emitting log-probabilities must
// exponentiate before writing n-best files.
class InvalidScoreError : public DataError {
 public:
  using DataError::DataError;
};

class VocabError : public DataError {
 public:
  using DataError::DataError;
};

class ClusterError : public DataError {
 public:
  using DataError::DataError;
};

class InvalidLatticeError : public DataError {
 public:
  using DataError::DataError;
};

// Thrown when ground-truth text is read through a manifest whose reference
// access guard is disarmed (unsupervised training discipline).
class RefAccessError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace ensdist

#endif  // ENSDIST_ERRORS_HPP_
