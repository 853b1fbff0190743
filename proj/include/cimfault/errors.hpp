// Copyright 2026 The cimfault Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cimfault {

// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A bf16 operation received a value it cannot represent or interpret.
class CodecError : public Error {
 public:
  using Error::Error;
};

// Decoding a NaN bit pattern. Kept separate so callers can tell it apart
// from a non-finite encode input.
class NanPatternError : public CodecError {
 public:
  using CodecError::CodecError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value. `field()` is the dotted path of the offending
// key, e.g. "noise.sigma_grid".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)), detail_(what) {}

  const std::string& field() const noexcept { return field_; }
  // The message without the field prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string field_;
  std::string detail_;
};

}  // namespace cimfault
