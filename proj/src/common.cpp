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

#include "fsct/error.hpp"
#include "fsct/tensor.hpp"
#include "fsct/types.hpp"

namespace fsct {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kUnknownGroup: return "unknown_group";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kData: return "data";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kExists: return "exists";
  }
  return "unknown";
}

std::string_view to_string(Direction d) {
  return d == Direction::kRealToCartoon ? "real2cartoon" : "cartoon2real";
}

std::string_view short_name(Direction d) {
  return d == Direction::kRealToCartoon ? "r2c" : "c2r";
}

std::string_view to_string(Domain d) { return d == Domain::kReal ? "real" : "cartoon"; }

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "real2cartoon") return Direction::kRealToCartoon;
  if (s == "cartoon2real") return Direction::kCartoonToReal;
  return std::nullopt;
}

}  // namespace fsct
