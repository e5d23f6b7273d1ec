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
#include <optional>
#include <variant>

#include "densflow/flow.hpp"

namespace densflow {

// Where a field map comes from. Any external network plugs in by exporting
// UEMF files; the decoder never sees the difference.
struct OracleSource {
  std::filesystem::path labels;
};
struct NoisyOracleSource {
  std::filesystem::path labels;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};
struct FileSource {
  std::filesystem::path uemf;
};
using FieldSource = std::variant<OracleSource, NoisyOracleSource, FileSource>;

struct Dims {
  int height = 0;
  int width = 0;
};

// Throws kFileNotFound, kBadMagic, kCorruptFile, or kDimsMismatch when the
// resolved field disagrees with `expected`.
FlowField resolve_fields(const FieldSource& source,
                         std::optional<Dims> expected = std::nullopt,
                         int threads = 1);

// Writes UEMF; throws kIoFailure.
void save_fields(const FlowField& field, const std::filesystem::path& path);

// Field file for image `X.png` is `X.uemf` in the same directory.
std::filesystem::path fields_path_for(const std::filesystem::path& image);

}  // namespace densflow
