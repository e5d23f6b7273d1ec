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
#include <limits>

#include "densflow/flow.hpp"
#include "densflow/parallel.hpp"

namespace densflow {

Pixel instance_center(std::span<const Pixel> pixels) {
  if (pixels.empty()) {
    throw Error(ErrorCode::kEmptyInstance, "instance_center of empty pixel set");
  }
  std::vector<int> rows(pixels.size());
  std::vector<int> cols(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    rows[i] = pixels[i].row;
    cols[i] = pixels[i].col;
  }
  const auto mid = (pixels.size() - 1) / 2;
  std::nth_element(rows.begin(), rows.begin() + mid, rows.end());
  std::nth_element(cols.begin(), cols.begin() + mid, cols.end());
  const int med_r = rows[mid];
  const int med_c = cols[mid];

  Pixel best = pixels[0];
  long best_d = std::numeric_limits<long>::max();
  for (const Pixel& p : pixels) {
    const long d = std::labs(static_cast<long>(p.row) - med_r) +
                   std::labs(static_cast<long>(p.col) - med_c);
    if (d < best_d || (d == best_d && p < best)) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

namespace {

// Local (bounding box + 1 px pad) workspace for one instance.
struct InstanceFrame {
  int r0 = 0;
  int c0 = 0;
  int pw = 0;  // padded width
  int ph = 0;

  std::size_t local(int row, int col) const {
    return static_cast<std::size_t>(row - r0 + 1) * pw +
           static_cast<std::size_t>(col - c0 + 1);
  }
};

void instance_targets(std::span<const Pixel> pixels, FlowField& out) {
  int rmin = pixels[0].row, rmax = pixels[0].row;
  int cmin = pixels[0].col, cmax = pixels[0].col;
  for (const Pixel& p : pixels) {
    rmin = std::min(rmin, p.row);
    rmax = std::max(rmax, p.row);
    cmin = std::min(cmin, p.col);
    cmax = std::max(cmax, p.col);
  }
  const int h = rmax - rmin + 1;
  const int w = cmax - cmin + 1;
  InstanceFrame f{rmin, cmin, w + 2, h + 2};
  const std::size_t n_local = static_cast<std::size_t>(f.pw) * f.ph;

  std::vector<std::uint8_t> inside(n_local, 0);
  std::vector<std::size_t> cells(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    cells[i] = f.local(pixels[i].row, pixels[i].col);
    inside[cells[i]] = 1;
  }
  const Pixel center = instance_center(pixels);
  const std::size_t src = f.local(center.row, center.col);

  // Heat diffusion restricted to the support; cells outside stay at zero.
  const int n_diff = static_cast<int>(std::ceil(2.0 * std::hypot(h, w)));
  std::vector<double> energy(n_local, 0.0);
  std::vector<double> next(n_local, 0.0);
  const std::ptrdiff_t pw = f.pw;
  for (int it = 0; it < n_diff; ++it) {
    energy[src] += 1.0;
    for (std::size_t k : cells) {
      const double* up = &energy[k - pw];
      const double* mid = &energy[k];
      const double* dn = &energy[k + pw];
      next[k] = (up[-1] + up[0] + up[1] + mid[-1] + mid[0] + mid[1] + dn[-1] +
                 dn[0] + dn[1]) /
                9.0;
    }
    energy.swap(next);
  }

  const auto axis_gradient = [&](std::size_t k, std::ptrdiff_t stride) {
    const bool lo = inside[k - stride] != 0;
    const bool hi = inside[k + stride] != 0;
    if (lo && hi) return 0.5 * (energy[k + stride] - energy[k - stride]);
    if (hi) return energy[k + stride] - energy[k];
    if (lo) return energy[k] - energy[k - stride];
    return 0.0;
  };

  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const Pixel p = pixels[i];
    const std::size_t k = cells[i];
    const std::size_t g = out.prob.index(p.row, p.col);
    out.prob[g] = 1.0f;
    if (k == src) continue;

    double gy = axis_gradient(k, pw);
    double gx = axis_gradient(k, 1);
    if (!(std::hypot(gy, gx) > 0.0)) {
      // Flat or unreached (energy underflow, detached piece): climb to the
      // highest strictly larger neighbour, else aim at the center.
      double best = energy[k];
      gy = gx = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const std::size_t q = k + dr * pw + dc;
          if ((dr == 0 && dc == 0) || !inside[q] || !(energy[q] > best)) continue;
          best = energy[q];
          gy = dr;
          gx = dc;
        }
      }
      if (gy == 0.0 && gx == 0.0) {
        gy = center.row - p.row;
        gx = center.col - p.col;
      }
    }
    const double norm = std::hypot(gy, gx);
    out.flow_y[g] = static_cast<float>(gy / norm);
    out.flow_x[g] = static_cast<float>(gx / norm);
  }
}

}  // namespace

FlowField compute_flow_targets(const LabelMap& map, int threads) {
  FlowField out(map.height(), map.width());
  const auto groups = instance_pixels(map);
  std::vector<const std::vector<Pixel>*> order;
  order.reserve(groups.size());
  for (const auto& [id, pixels] : groups) order.push_back(&pixels);
  // Instances own disjoint pixels, so concurrent writes never alias.
  parallel_for(order.size(), threads,
               [&](std::size_t i) { instance_targets(*order[i], out); });
  return out;
}

}  // namespace densflow
