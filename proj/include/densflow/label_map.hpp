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
#include <map>
#include <optional>
#include <vector>

#include "densflow/grid.hpp"

namespace densflow {

// 32-bit ids: dense scenes routinely exceed a few thousand instances.
using LabelId = std::uint32_t;

// Instance label map. 0 is background; each pixel belongs to at most one
// instance (visible-part semantics).
using LabelMap = Grid<LabelId>;
using BinaryGrid = Grid<std::uint8_t>;

struct Run {
  std::uint64_t start = 0;  // absolute row-major offset
  std::uint64_t length = 0;

  bool operator==(const Run&) const = default;
};

struct RleMask {
  LabelId id = 0;
  std::vector<Run> runs;  // sorted, non-overlapping

  std::uint64_t area() const;
  bool operator==(const RleMask&) const = default;
};

// One RleMask per distinct nonzero id, ordered by id.
std::vector<RleMask> encode_rle(const LabelMap& map);

// Throws kOverlappingRuns if two runs claim the same pixel and
// kOffsetOutOfBounds if a run reaches past H*W.
LabelMap decode_rle(const std::vector<RleMask>& masks, int height, int width);

// Maximal connected foreground components, numbered 1..K in row-major order
// of each component's first pixel. `connectivity` is 4 or 8.
LabelMap label_connected_components(const BinaryGrid& binary, int connectivity);

// Splits every instance into its connected pieces (pixels join only when
// they carry the same nonzero id). Numbering as label_connected_components.
LabelMap split_disconnected(const LabelMap& map, int connectivity);

// Remaps ids to 1..K by first occurrence in row-major order.
LabelMap relabel_sequential(const LabelMap& map);

std::map<LabelId, std::uint64_t> instance_areas(const LabelMap& map);

// Pixels of every instance, each list in row-major order.
std::map<LabelId, std::vector<Pixel>> instance_pixels(const LabelMap& map);

LabelId max_label(const LabelMap& map);

struct IouEntry {
  LabelId gt = 0;
  LabelId pred = 0;
  std::uint64_t intersection = 0;
  std::uint64_t union_area = 0;
  double iou = 0.0;
};

// Sparse IoU table. Only pairs with nonzero overlap are stored, sorted by
// (gt, pred).
struct IouMatrix {
  std::vector<LabelId> gt_ids;    // sorted
  std::vector<LabelId> pred_ids;  // sorted
  std::vector<IouEntry> entries;

  std::size_t n_gt() const { return gt_ids.size(); }
  std::size_t n_pred() const { return pred_ids.size(); }
  std::optional<double> lookup(LabelId gt, LabelId pred) const;
};

IouMatrix pairwise_iou(const LabelMap& gt, const LabelMap& pred);

}  // namespace densflow
