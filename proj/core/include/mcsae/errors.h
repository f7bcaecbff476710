// Copyright (c) 2026 MCSAE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MCSAE_ERRORS_H_
#define MCSAE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace mcsae {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise invalid numeric input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API precondition violated (wrong rank, non-scalar loss, bad slope, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Out-of-range index (labels, rows).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration key or value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (trial lists, config files, score files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Unusable external input (audio too short, wrong WAV encoding, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training aborted (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Invalid scoring input (zero-norm embedding, empty score class).
class ScoringError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcsae

#endif  // MCSAE_ERRORS_H_
