// Copyright 2026 The densflow Authors.
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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "densflow/flow.hpp"

namespace densflow {

// UEMF flow-field file, all integers and floats little-endian:
//
//   offset  0  "UEMF"
//           4  u32 version (1)
//           8  u32 height
//          12  u32 width
//          16  u32 channels (3)
//          20  f32[channels][height][width], channel order flow_y, flow_x, prob
inline constexpr std::size_t kUemfHeaderBytes = 20;
inline constexpr std::uint32_t kUemfVersion = 1;

std::vector<std::uint8_t> encode_uemf(const FlowField& field);

// Rejects bad magic (kBadMagic), unknown version/channel count, truncated or
// oversized payloads and non-finite values (kCorruptFile).
FlowField decode_uemf(std::span<const std::uint8_t> bytes);

void write_uemf(const std::filesystem::path& path, const FlowField& field);
FlowField read_uemf(const std::filesystem::path& path);

}  // namespace densflow
