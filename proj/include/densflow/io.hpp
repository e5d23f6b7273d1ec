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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "densflow/label_map.hpp"

namespace densflow {

namespace fs = std::filesystem;

using Rgb = std::array<std::uint8_t, 3>;

// PNG codecs. Output bytes are a pure function of the pixels (no timestamps,
// fixed compression settings).
void write_png_gray8(const fs::path& path, const Grid<std::uint8_t>& image);
void write_png_gray16(const fs::path& path, const Grid<std::uint16_t>& image);
void write_png_rgb8(const fs::path& path, const Grid<Rgb>& image);

// Reads an 8- or 16-bit single-channel PNG as 16-bit values.
Grid<std::uint16_t> read_png_gray16(const fs::path& path);

// RLE JSON document:
// {"height":H,"width":W,"instances":[{"id":k,"runs":[[start,len],...]},...]}
std::string rle_to_json(const std::vector<RleMask>& masks, int height, int width);
LabelMap label_map_from_rle_json(const std::string& text);

// Label maps persist as 16-bit PNG when every id fits, otherwise as RLE JSON.
// Writes `<dir>/<stem>.png` or `<dir>/<stem>.json` and returns the path.
fs::path save_label_map(const LabelMap& map, const fs::path& dir,
                        const std::string& stem);

// Dispatches on extension (.png or .json).
LabelMap load_label_map(const fs::path& path);

bool is_label_map_file(const fs::path& path);

std::vector<std::uint8_t> read_file_bytes(const fs::path& path);
std::string read_text_file(const fs::path& path);
void write_file_bytes(const fs::path& path, const void* data, std::size_t size);
void write_text_file(const fs::path& path, const std::string& text);

// Lowercase hex SHA-256.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const fs::path& path);

}  // namespace densflow
