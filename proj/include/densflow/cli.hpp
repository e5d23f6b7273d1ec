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
#include <iosfwd>
#include <string>
#include <vector>

namespace densflow::cli {

inline constexpr const char* kToolVersion = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct FileDigest {
  std::string path;
  std::string sha256;
};

// Reproducibility record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::string tool_version = kToolVersion;
  std::uint64_t master_seed = 0;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
};

// Digest of `file`, recorded relative to `base` when it lies below it.
FileDigest digest_file(const std::filesystem::path& file,
                       const std::filesystem::path& base);
std::string manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& path);

// DENSFLOW_THREADS when set to a positive integer, else the hardware count.
int default_threads();

// Runs the tool with `args` (excluding the program name). Returns the exit
// code; payloads go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace densflow::cli
