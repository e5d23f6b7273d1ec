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

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "densflow/cli.hpp"
#include "densflow/io.hpp"
#include "json.hpp"

namespace densflow::cli {

namespace {

nlohmann::ordered_json digests_json(std::vector<FileDigest> files) {
  std::sort(files.begin(), files.end(),
            [](const FileDigest& a, const FileDigest& b) { return a.path < b.path; });
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
  }
  return arr;
}

}  // namespace

FileDigest digest_file(const fs::path& file, const fs::path& base) {
  std::error_code ec;
  fs::path shown = file;
  if (!base.empty()) {
    const fs::path rel = fs::relative(file, base, ec);
    if (!ec && !rel.empty() && *rel.begin() != "..") shown = rel;
  }
  return {shown.generic_string(), sha256_file(file)};
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["args"] = m.args;
  j["tool_version"] = m.tool_version;
  j["master_seed"] = m.master_seed;
  j["inputs"] = digests_json(m.inputs);
  j["outputs"] = digests_json(m.outputs);
  return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  write_text_file(path, manifest_to_json(manifest));
}

int default_threads() {
  if (const char* env = std::getenv("DENSFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace densflow::cli
