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

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace fsct {

/// Fine-grained population index. Group 0 is the data-rich common group;
/// ids are dense in [0, G).
struct GroupId {
  int value = 0;

  constexpr GroupId() = default;
  constexpr explicit GroupId(int v) : value(v) {}

  constexpr bool is_common() const { return value == 0; }
  auto operator<=>(const GroupId&) const = default;
};

enum class Domain { kReal = 0, kCartoon = 1 };

enum class Direction { kRealToCartoon = 0, kCartoonToReal = 1 };

constexpr Domain source_domain(Direction d) {
  return d == Direction::kRealToCartoon ? Domain::kReal : Domain::kCartoon;
}

constexpr Domain target_domain(Direction d) {
  return d == Direction::kRealToCartoon ? Domain::kCartoon : Domain::kReal;
}

constexpr Direction reverse(Direction d) {
  return d == Direction::kRealToCartoon ? Direction::kCartoonToReal : Direction::kRealToCartoon;
}

constexpr Direction direction_into(Domain target) {
  return target == Domain::kCartoon ? Direction::kRealToCartoon : Direction::kCartoonToReal;
}

constexpr int index(Domain d) { return static_cast<int>(d); }
constexpr int index(Direction d) { return static_cast<int>(d); }

inline constexpr Direction kDirections[] = {Direction::kRealToCartoon, Direction::kCartoonToReal};
inline constexpr Domain kDomains[] = {Domain::kReal, Domain::kCartoon};

/// "real2cartoon" / "cartoon2real"
std::string_view to_string(Direction d);
/// "r2c" / "c2r", used inside parameter names.
std::string_view short_name(Direction d);
/// "real" / "cartoon", also the dataset sub-directory names.
std::string_view to_string(Domain d);

std::optional<Direction> parse_direction(std::string_view s);

}  // namespace fsct
