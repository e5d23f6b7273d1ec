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

#include "densflow/predictor.hpp"

#include <string>

#include "densflow/io.hpp"
#include "densflow/uemf.hpp"

namespace densflow {

namespace {

const std::filesystem::path& require_file(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::kFileNotFound, p.string());
  return p;
}

}  // namespace

FlowField resolve_fields(const FieldSource& source, std::optional<Dims> expected,
                         int threads) {
  struct Visitor {
    int threads;
    FlowField operator()(const OracleSource& s) const {
      return compute_flow_targets(load_label_map(require_file(s.labels)), threads);
    }
    FlowField operator()(const NoisyOracleSource& s) const {
      if (!(s.sigma >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "noisy oracle needs sigma >= 0");
      }
      return perturb_field((*this)(OracleSource{s.labels}), s.sigma, s.seed);
    }
    FlowField operator()(const FileSource& s) const {
      return read_uemf(require_file(s.uemf));
    }
  };
  FlowField field = std::visit(Visitor{threads}, source);
  if (expected &&
      (field.height() != expected->height || field.width() != expected->width)) {
    throw Error(ErrorCode::kDimsMismatch,
                "field is " + std::to_string(field.height()) + "x" +
                    std::to_string(field.width()) + ", expected " +
                    std::to_string(expected->height) + "x" +
                    std::to_string(expected->width));
  }
  return field;
}

void save_fields(const FlowField& field, const std::filesystem::path& path) {
  write_uemf(path, field);
}

std::filesystem::path fields_path_for(const std::filesystem::path& image) {
  auto p = image;
  p.replace_extension(".uemf");
  return p;
}

}  // namespace densflow
