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

#include "densflow/label_map.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

namespace densflow {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kOverlappingRuns: return "OverlappingRuns";
    case ErrorCode::kOffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyInstance: return "EmptyInstance";
    case ErrorCode::kThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorCode::kMissingPair: return "MissingPair";
    case ErrorCode::kInfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kDimsMismatch: return "DimsMismatch";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kIoFailure: return "IoFailure";
  }
  return "Unknown";
}

std::uint64_t RleMask::area() const {
  std::uint64_t total = 0;
  for (const Run& r : runs) total += r.length;
  return total;
}

std::vector<RleMask> encode_rle(const LabelMap& map) {
  std::unordered_map<LabelId, std::size_t> slot;
  std::vector<RleMask> masks;
  const auto labels = map.data();
  std::size_t i = 0;
  while (i < labels.size()) {
    const LabelId id = labels[i];
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == id) ++j;
    if (id != 0) {
      auto [it, inserted] = slot.try_emplace(id, masks.size());
      if (inserted) masks.push_back(RleMask{id, {}});
      masks[it->second].runs.push_back(Run{i, j - i});
    }
    i = j;
  }
  std::sort(masks.begin(), masks.end(),
            [](const RleMask& a, const RleMask& b) { return a.id < b.id; });
  return masks;
}

LabelMap decode_rle(const std::vector<RleMask>& masks, int height, int width) {
  LabelMap map(height, width);
  const std::uint64_t total = map.size();
  for (const RleMask& mask : masks) {
    if (mask.id == 0) {
      throw Error(ErrorCode::kInvalidArgument, "RLE mask with id 0");
    }
    for (const Run& run : mask.runs) {
      if (run.start >= total || run.length > total - run.start) {
        throw Error(ErrorCode::kOffsetOutOfBounds,
                    "run [" + std::to_string(run.start) + ", +" +
                        std::to_string(run.length) + ") exceeds " +
                        std::to_string(total) + " pixels");
      }
      for (std::uint64_t k = run.start; k < run.start + run.length; ++k) {
        if (map[k] != 0) {
          throw Error(ErrorCode::kOverlappingRuns,
                      "pixel " + std::to_string(k) + " claimed by ids " +
                          std::to_string(map[k]) + " and " +
                          std::to_string(mask.id));
        }
        map[k] = mask.id;
      }
    }
  }
  return map;
}

namespace {

constexpr int kDr[8] = {-1, 0, 0, 1, -1, -1, 1, 1};
constexpr int kDc[8] = {0, -1, 1, 0, -1, 1, -1, 1};

int neighbor_count(int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw Error(ErrorCode::kInvalidArgument,
                "connectivity must be 4 or 8, got " +
                    std::to_string(connectivity));
  }
  return connectivity;
}

// Flood fill over pixels for which `key(index)` is nonzero; neighbours join
// when their keys are equal. Components are numbered in scan order.
template <typename KeyFn>
LabelMap flood_components(int height, int width, int connectivity, KeyFn key) {
  const int n_nb = neighbor_count(connectivity);
  LabelMap out(height, width);
  std::vector<std::size_t> stack;
  LabelId next = 0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t start = out.index(r, c);
      const auto k = key(start);
      if (k == 0 || out[start] != 0) continue;
      ++next;
      out[start] = next;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        const int pr = static_cast<int>(p / static_cast<std::size_t>(width));
        const int pc = static_cast<int>(p % static_cast<std::size_t>(width));
        for (int n = 0; n < n_nb; ++n) {
          const int qr = pr + kDr[n];
          const int qc = pc + kDc[n];
          if (!out.contains(qr, qc)) continue;
          const std::size_t q = out.index(qr, qc);
          if (out[q] != 0 || key(q) != k) continue;
          out[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

}  // namespace

LabelMap label_connected_components(const BinaryGrid& binary, int connectivity) {
  return flood_components(binary.height(), binary.width(), connectivity,
                          [&](std::size_t i) { return binary[i] != 0 ? 1 : 0; });
}

LabelMap split_disconnected(const LabelMap& map, int connectivity) {
  return flood_components(map.height(), map.width(), connectivity,
                          [&](std::size_t i) { return map[i]; });
}

LabelMap relabel_sequential(const LabelMap& map) {
  std::unordered_map<LabelId, LabelId> remap;
  LabelMap out(map.height(), map.width());
  LabelId next = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const LabelId id = map[i];
    if (id == 0) continue;
    auto [it, inserted] = remap.try_emplace(id, next + 1);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

std::map<LabelId, std::uint64_t> instance_areas(const LabelMap& map) {
  std::unordered_map<LabelId, std::uint64_t> counts;
  for (LabelId id : map.data()) {
    if (id != 0) ++counts[id];
  }
  return {counts.begin(), counts.end()};
}

std::map<LabelId, std::vector<Pixel>> instance_pixels(const LabelMap& map) {
  std::map<LabelId, std::vector<Pixel>> out;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const LabelId id = map(r, c);
      if (id != 0) out[id].push_back(Pixel{r, c});
    }
  }
  return out;
}

LabelId max_label(const LabelMap& map) {
  LabelId m = 0;
  for (LabelId id : map.data()) m = std::max(m, id);
  return m;
}

std::optional<double> IouMatrix::lookup(LabelId gt, LabelId pred) const {
  auto it = std::lower_bound(
      entries.begin(), entries.end(), std::pair{gt, pred},
      [](const IouEntry& e, const std::pair<LabelId, LabelId>& key) {
        return std::pair{e.gt, e.pred} < key;
      });
  if (it == entries.end() || it->gt != gt || it->pred != pred) {
    return std::nullopt;
  }
  return it->iou;
}

IouMatrix pairwise_iou(const LabelMap& gt, const LabelMap& pred) {
  if (!gt.same_shape(pred)) {
    throw Error(ErrorCode::kShapeMismatch,
                "gt is " + std::to_string(gt.height()) + "x" +
                    std::to_string(gt.width()) + ", pred is " +
                    std::to_string(pred.height()) + "x" +
                    std::to_string(pred.width()));
  }
  std::unordered_map<LabelId, std::uint64_t> gt_area;
  std::unordered_map<LabelId, std::uint64_t> pred_area;
  std::unordered_map<std::uint64_t, std::uint64_t> overlap;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const LabelId g = gt[i];
    const LabelId p = pred[i];
    if (g != 0) ++gt_area[g];
    if (p != 0) ++pred_area[p];
    if (g != 0 && p != 0) {
      ++overlap[(static_cast<std::uint64_t>(g) << 32) | p];
    }
  }

  IouMatrix m;
  for (const auto& [id, area] : gt_area) m.gt_ids.push_back(id);
  for (const auto& [id, area] : pred_area) m.pred_ids.push_back(id);
  std::sort(m.gt_ids.begin(), m.gt_ids.end());
  std::sort(m.pred_ids.begin(), m.pred_ids.end());

  m.entries.reserve(overlap.size());
  for (const auto& [key, inter] : overlap) {
    IouEntry e;
    e.gt = static_cast<LabelId>(key >> 32);
    e.pred = static_cast<LabelId>(key & 0xffffffffu);
    e.intersection = inter;
    e.union_area = gt_area[e.gt] + pred_area[e.pred] - inter;
    e.iou = static_cast<double>(inter) / static_cast<double>(e.union_area);
    m.entries.push_back(e);
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const IouEntry& a, const IouEntry& b) {
              return std::pair{a.gt, a.pred} < std::pair{b.gt, b.pred};
            });
  return m;
}

}  // namespace densflow
