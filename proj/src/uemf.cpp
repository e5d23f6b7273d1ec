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

#include "densflow/uemf.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "densflow/io.hpp"

namespace densflow {

namespace {

void put_u32(std::uint8_t* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* in) {
  return static_cast<std::uint32_t>(in[0]) |
         (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) |
         (static_cast<std::uint32_t>(in[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_uemf(const FlowField& field) {
  if (!field.consistent()) {
    throw Error(ErrorCode::kShapeMismatch, "flow channels differ in shape");
  }
  const std::size_t n = field.prob.size();
  std::vector<std::uint8_t> out(kUemfHeaderBytes + 3 * n * 4);
  std::memcpy(out.data(), "UEMF", 4);
  put_u32(out.data() + 4, kUemfVersion);
  put_u32(out.data() + 8, static_cast<std::uint32_t>(field.height()));
  put_u32(out.data() + 12, static_cast<std::uint32_t>(field.width()));
  put_u32(out.data() + 16, 3);
  std::uint8_t* p = out.data() + kUemfHeaderBytes;
  for (const Grid<float>* ch : {&field.flow_y, &field.flow_x, &field.prob}) {
    for (float v : ch->data()) {
      put_u32(p, std::bit_cast<std::uint32_t>(v));
      p += 4;
    }
  }
  return out;
}

FlowField decode_uemf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "UEMF", 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "missing UEMF magic");
  }
  if (bytes.size() < kUemfHeaderBytes) {
    throw Error(ErrorCode::kCorruptFile, "truncated UEMF header");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  const std::uint32_t height = get_u32(bytes.data() + 8);
  const std::uint32_t width = get_u32(bytes.data() + 12);
  const std::uint32_t channels = get_u32(bytes.data() + 16);
  if (version != kUemfVersion) {
    throw Error(ErrorCode::kCorruptFile,
                "unsupported UEMF version " + std::to_string(version));
  }
  if (channels != 3) {
    throw Error(ErrorCode::kCorruptFile,
                "expected 3 channels, got " + std::to_string(channels));
  }
  if (height > 0x7fffffffu || width > 0x7fffffffu) {
    throw Error(ErrorCode::kCorruptFile, "UEMF dimensions out of range");
  }
  const std::uint64_t n = static_cast<std::uint64_t>(height) * width;
  if (bytes.size() - kUemfHeaderBytes != 3 * n * 4) {
    throw Error(ErrorCode::kCorruptFile,
                "payload is " + std::to_string(bytes.size() - kUemfHeaderBytes) +
                    " bytes, expected " + std::to_string(3 * n * 4));
  }
  FlowField field(static_cast<int>(height), static_cast<int>(width));
  const std::uint8_t* p = bytes.data() + kUemfHeaderBytes;
  for (Grid<float>* ch : {&field.flow_y, &field.flow_x, &field.prob}) {
    for (float& v : ch->data()) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kCorruptFile, "non-finite value in UEMF payload");
      }
    }
  }
  return field;
}

void write_uemf(const std::filesystem::path& path, const FlowField& field) {
  const auto bytes = encode_uemf(field);
  write_file_bytes(path, bytes.data(), bytes.size());
}

FlowField read_uemf(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_uemf(bytes);
}

}  // namespace densflow
