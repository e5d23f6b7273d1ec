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
#include <string>
#include <vector>

#include "densflow/label_map.hpp"

namespace densflow {

struct Match {
  LabelId gt = 0;
  LabelId pred = 0;
  double iou = 0.0;
};

// One-to-one gt <-> pred correspondence at IoU threshold `threshold`.
// tp = matches.size(), fp = n_pred - tp, fn = n_gt - tp.
struct MatchTable {
  double threshold = 0.5;
  std::vector<Match> matches;  // sorted by gt id
  std::uint64_t n_gt = 0;
  std::uint64_t n_pred = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

// Maximum-cardinality matching over pairs with IoU >= threshold; among
// maximum matchings the one with the largest total IoU. Solved exactly by
// Hungarian assignment on each connected component of the candidate graph.
// Throws kThresholdOutOfRange unless 0 < threshold < 1.
MatchTable match_at_threshold(const IouMatrix& iou, double threshold);

// |TP| / (|TP| + |FP| + |FN|); 1 for an image with no gt and no predictions.
double ap_at_threshold(const MatchTable& table);

struct PanopticQuality {
  double pq = 1.0;
  double sq = 1.0;
  double rq = 1.0;
};

// sq = mean matched IoU (1 with no matches), rq = tp / (tp + fp/2 + fn/2)
// (1 with zero denominator), pq = sq * rq.
PanopticQuality pq_at_threshold(const MatchTable& table);

enum class Split { kSparse, kDense };

inline constexpr std::uint64_t kDenseMinInstances = 100;

// n_gt < 100 is sparse, everything else (including exactly 100) dense.
Split split_of(std::uint64_t n_gt);
std::map<std::string, Split> split_sparse_dense(
    const std::map<std::string, std::uint64_t>& counts);
const char* split_name(Split split);

struct ImageScore {
  std::string id;
  std::uint64_t n_gt = 0;
  std::uint64_t n_pred = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double ap = 0.0;
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
};

struct SplitAggregate {
  double mean_ap = 0.0;
  double mean_pq = 0.0;
  std::uint64_t n = 0;
};

struct MetricsReport {
  double threshold = 0.5;
  std::vector<ImageScore> per_image;  // sorted by id
  SplitAggregate overall;
  SplitAggregate sparse;
  SplitAggregate dense;
};

ImageScore score_image(const std::string& id, const LabelMap& gt,
                       const LabelMap& pred, double threshold);

// Unweighted per-image means, overall and per split. Images are ordered by
// id first, so the result does not depend on input order. An empty split
// reports zeros with n = 0.
MetricsReport aggregate_scores(std::vector<ImageScore> scores, double threshold);

// Both collections must hold exactly the same image ids (kMissingPair) and
// every pair must share dimensions (kShapeMismatch).
MetricsReport evaluate_dataset(const std::map<std::string, LabelMap>& gt_maps,
                               const std::map<std::string, LabelMap>& pred_maps,
                               double threshold, int threads = 1);

// Report JSON with floating values printed to 6 decimal places.
std::string report_to_json(const MetricsReport& report);

}  // namespace densflow
