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
#include <cmath>
#include <string>
#include <unordered_map>

#include "densflow/flow.hpp"
#include "densflow/parallel.hpp"
#include "densflow/random.hpp"

namespace densflow {

void DecodeParams::validate() const {
  if (n_iter < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_iter must be positive");
  }
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw Error(ErrorCode::kInvalidArgument, "step_size must be positive");
  }
  if (!(prob_threshold > 0.0 && prob_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "prob_threshold must be in (0,1)");
  }
  if (sink_bin < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sink_bin must be positive");
  }
  if (min_size < 0) {
    throw Error(ErrorCode::kInvalidArgument, "min_size must be non-negative");
  }
}

Position sample_flow(const FlowField& field, double row, double col) {
  const int h = field.height();
  const int w = field.width();
  row = std::clamp(row, 0.0, static_cast<double>(h - 1));
  col = std::clamp(col, 0.0, static_cast<double>(w - 1));
  const int r0 = static_cast<int>(row);
  const int c0 = static_cast<int>(col);
  const int r1 = std::min(r0 + 1, h - 1);
  const int c1 = std::min(c0 + 1, w - 1);
  const double fr = row - r0;
  const double fc = col - c0;
  const double w00 = (1.0 - fr) * (1.0 - fc);
  const double w01 = (1.0 - fr) * fc;
  const double w10 = fr * (1.0 - fc);
  const double w11 = fr * fc;
  const auto blend = [&](const Grid<float>& g) {
    return w00 * g(r0, c0) + w01 * g(r0, c1) + w10 * g(r1, c0) +
           w11 * g(r1, c1);
  };
  return Position{blend(field.flow_y), blend(field.flow_x)};
}

Position integrate_trajectory(const FlowField& field, const DecodeParams& params,
                              Pixel start) {
  const double max_r = field.height() - 1;
  const double max_c = field.width() - 1;
  Position p{static_cast<double>(start.row), static_cast<double>(start.col)};
  for (int it = 0; it < params.n_iter; ++it) {
    const Position v = sample_flow(field, p.row, p.col);
    const double nr = std::clamp(p.row + params.step_size * v.row, 0.0, max_r);
    const double nc = std::clamp(p.col + params.step_size * v.col, 0.0, max_c);
    if (nr == p.row && nc == p.col) break;
    p = Position{nr, nc};
  }
  return p;
}

std::vector<std::uint32_t> cluster_sinks(std::span<const Position> terminals,
                                         int sink_bin) {
  if (sink_bin < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sink_bin must be positive");
  }
  struct Cell {
    std::int64_t row;
    std::int64_t col;
    std::uint64_t count;
  };
  const auto key_of = [](std::int64_t r, std::int64_t c) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 32) |
           static_cast<std::uint32_t>(c);
  };

  std::unordered_map<std::uint64_t, std::uint32_t> index;
  std::vector<Cell> cells;
  std::vector<std::uint32_t> cell_of(terminals.size());
  for (std::size_t i = 0; i < terminals.size(); ++i) {
    const Position& t = terminals[i];
    if (!std::isfinite(t.row) || !std::isfinite(t.col)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite terminal at index " + std::to_string(i));
    }
    const auto r = static_cast<std::int64_t>(std::floor(t.row / sink_bin));
    const auto c = static_cast<std::int64_t>(std::floor(t.col / sink_bin));
    auto [it, inserted] =
        index.try_emplace(key_of(r, c), static_cast<std::uint32_t>(cells.size()));
    if (inserted) cells.push_back(Cell{r, c, 0});
    ++cells[it->second].count;
    cell_of[i] = it->second;
  }

  // Strict total order: more terminals first, then smaller (row, col).
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    const Cell& x = cells[a];
    const Cell& y = cells[b];
    if (x.count != y.count) return x.count > y.count;
    return std::pair{x.row, x.col} < std::pair{y.row, y.col};
  };

  // Steepest-ascent parent within the 3x3 cell neighbourhood.
  std::vector<std::uint32_t> parent(cells.size());
  for (std::uint32_t k = 0; k < cells.size(); ++k) {
    std::uint32_t best = k;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        auto it = index.find(key_of(cells[k].row + dr, cells[k].col + dc));
        if (it != index.end() && better(it->second, best)) best = it->second;
      }
    }
    parent[k] = best;
  }

  // Each step strictly improves under `better`, so chains end at a seed.
  constexpr std::uint32_t kUnset = 0xffffffffu;
  std::vector<std::uint32_t> root(cells.size(), kUnset);
  std::vector<std::uint32_t> chain;
  for (std::uint32_t k = 0; k < cells.size(); ++k) {
    std::uint32_t cur = k;
    chain.clear();
    while (root[cur] == kUnset && parent[cur] != cur) {
      chain.push_back(cur);
      cur = parent[cur];
    }
    const std::uint32_t r = root[cur] == kUnset ? cur : root[cur];
    root[cur] = r;
    for (std::uint32_t c : chain) root[c] = r;
  }

  std::vector<std::uint32_t> seeds;
  for (std::uint32_t k = 0; k < cells.size(); ++k) {
    if (root[k] == k) seeds.push_back(k);
  }
  std::sort(seeds.begin(), seeds.end(), [&](std::uint32_t a, std::uint32_t b) {
    return std::pair{cells[a].row, cells[a].col} <
           std::pair{cells[b].row, cells[b].col};
  });
  std::vector<std::uint32_t> cluster_of_seed(cells.size(), 0);
  for (std::uint32_t i = 0; i < seeds.size(); ++i) cluster_of_seed[seeds[i]] = i;

  std::vector<std::uint32_t> out(terminals.size());
  for (std::size_t i = 0; i < terminals.size(); ++i) {
    out[i] = cluster_of_seed[root[cell_of[i]]];
  }
  return out;
}

LabelMap follow_flows(const FlowField& field, const DecodeParams& params,
                      int threads) {
  if (!field.consistent()) {
    throw Error(ErrorCode::kShapeMismatch, "flow channels differ in shape");
  }
  params.validate();
  const int h = field.height();
  const int w = field.width();
  LabelMap labels(h, w);

  std::vector<std::size_t> fg;
  for (std::size_t i = 0; i < field.prob.size(); ++i) {
    if (field.prob[i] >= params.prob_threshold) fg.push_back(i);
  }
  if (fg.empty()) return labels;

  std::vector<Position> terminals(fg.size());
  parallel_for(fg.size(), threads, [&](std::size_t i) {
    const Pixel start{static_cast<int>(fg[i] / w), static_cast<int>(fg[i] % w)};
    terminals[i] = integrate_trajectory(field, params, start);
  });

  const auto clusters = cluster_sinks(terminals, params.sink_bin);
  for (std::size_t i = 0; i < fg.size(); ++i) labels[fg[i]] = clusters[i] + 1;

  LabelMap pieces = split_disconnected(labels, 4);
  const auto areas = instance_areas(pieces);
  for (LabelId& id : pieces.data()) {
    if (id != 0 && areas.at(id) < static_cast<std::uint64_t>(params.min_size)) {
      id = 0;
    }
  }
  return relabel_sequential(pieces);
}

FlowField perturb_field(const FlowField& field, double sigma,
                        std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be finite and >= 0");
  }
  if (!field.consistent()) {
    throw Error(ErrorCode::kShapeMismatch, "flow channels differ in shape");
  }
  FlowField out = field;
  if (sigma == 0.0) return out;
  constexpr double kEps = 1e-3;
  const double logit_sigma = kProbLogitNoiseScale * sigma;
  for (std::size_t i = 0; i < out.prob.size(); ++i) {
    out.flow_y[i] = static_cast<float>(out.flow_y[i] +
                                       sigma * counter_normal(seed, i, 0));
    out.flow_x[i] = static_cast<float>(out.flow_x[i] +
                                       sigma * counter_normal(seed, i, 1));
    const double p = std::clamp(static_cast<double>(out.prob[i]), kEps, 1.0 - kEps);
    const double logit =
        std::log(p / (1.0 - p)) + logit_sigma * counter_normal(seed, i, 2);
    out.prob[i] = static_cast<float>(1.0 / (1.0 + std::exp(-logit)));
  }
  return out;
}

}  // namespace densflow
