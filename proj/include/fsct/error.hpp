// Copyright 2026 The fsct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fsct {

enum class ErrorCode {
  kInvalidArgument,
  kShape,
  kUnknownGroup,
  kContract,
  kIo,
  kFormat,
  kIntegrity,
  kVersion,
  kData,
  kNumeric,
  kExists,
};

const char* error_code_name(ErrorCode code);

/// Base exception for every failure raised by the library. The code maps
/// one-to-one onto the status values of the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCode::kShape, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorCode::kContract, what) {}
};

class RegistryError : public Error {
 public:
  explicit RegistryError(const std::string& what)
      : Error(ErrorCode::kUnknownGroup, what) {}
};

/// Dataset layout / decoding failure; `path()` names the offending file or
/// directory.
class DataError : public Error {
 public:
  DataError(const std::string& path, const std::string& what)
      : Error(ErrorCode::kData, what + ": " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace fsct
