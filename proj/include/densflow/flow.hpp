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
#include <span>
#include <vector>

#include "densflow/label_map.hpp"

namespace densflow {

// Three-channel field: unit direction toward the owning instance's center
// (flow_y along rows, flow_x along columns) and foreground probability.
//
// Targets produced by compute_flow_targets have unit-norm flow on every
// foreground pixel except the center (exactly zero), zero on background and
// prob in {0, 1}. Predicted or perturbed fields carry no norm constraint.
struct FlowField {
  Grid<float> flow_y;
  Grid<float> flow_x;
  Grid<float> prob;

  FlowField() = default;
  FlowField(int height, int width)
      : flow_y(height, width), flow_x(height, width), prob(height, width) {}

  int height() const { return prob.height(); }
  int width() const { return prob.width(); }
  bool consistent() const {
    return flow_y.same_shape(prob) && flow_x.same_shape(prob);
  }
  bool operator==(const FlowField&) const = default;
};

struct DecodeParams {
  int n_iter = 200;
  double step_size = 1.0;
  double prob_threshold = 0.5;
  int sink_bin = 2;
  int min_size = 15;

  // Throws kInvalidArgument when a field is outside its range.
  void validate() const;
};

// The medianoid: the member pixel with minimum L1 distance to the
// per-coordinate (lower) median; ties go to the smallest (row, col).
Pixel instance_center(std::span<const Pixel> pixels);

// Supervision targets. Per instance, a unit source at the medianoid diffuses
// over the instance support for 2x the bounding-box diagonal Jacobi
// iterations; the flow is the normalized gradient of that energy.
FlowField compute_flow_targets(const LabelMap& map, int threads = 1);

struct Position {
  double row = 0.0;
  double col = 0.0;
};

// Bilinear sample of (flow_y, flow_x) with sample coordinates clamped to the
// image rectangle.
Position sample_flow(const FlowField& field, double row, double col);

// Integrates one pixel's trajectory for params.n_iter Euler steps. Positions
// are clamped to the image; integration stops early only at an exact fixed
// point, so the result is identical to running every step.
Position integrate_trajectory(const FlowField& field, const DecodeParams& params,
                              Pixel start);

// Groups terminal positions that converged to the same sink. Returns a
// cluster index per terminal, clusters numbered by (row, col) of their seed
// cell.
std::vector<std::uint32_t> cluster_sinks(std::span<const Position> terminals,
                                         int sink_bin);

// Field -> instances. Foreground pixels (prob >= threshold) are advected,
// their sinks clustered, clusters split into 4-connected pieces, pieces below
// min_size dropped, and ids relabeled 1..K in row-major first-pixel order.
LabelMap follow_flows(const FlowField& field, const DecodeParams& params = {},
                      int threads = 1);

// Adds N(0, sigma^2) to both flow channels and logit-domain noise of standard
// deviation kProbLogitNoiseScale * sigma to prob. Noise is keyed by
// (seed, pixel index, channel).
inline constexpr double kProbLogitNoiseScale = 4.0;
FlowField perturb_field(const FlowField& field, double sigma, std::uint64_t seed);

}  // namespace densflow
