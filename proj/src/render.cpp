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

#include "densflow/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "densflow/random.hpp"

namespace densflow {

Rgb palette_color(LabelId id) {
  const std::uint64_t h = mix64(0x9a1e77eull ^ id);
  const auto channel = [&](int shift) {
    return static_cast<std::uint8_t>(48 + ((h >> shift) & 0xff) * 207 / 255);
  };
  return {channel(0), channel(8), channel(16)};
}

Grid<Rgb> render_labels(const LabelMap& map) {
  Grid<Rgb> out(map.height(), map.width(), Rgb{0, 0, 0});
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] != 0) out[i] = palette_color(map[i]);
  }
  return out;
}

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  const auto q = [](double u) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
  };
  return {q(r + m), q(g + m), q(b + m)};
}

}  // namespace

Grid<Rgb> render_field(const FlowField& field) {
  if (!field.consistent()) {
    throw Error(ErrorCode::kShapeMismatch, "flow channels differ in shape");
  }
  Grid<Rgb> out(field.height(), field.width(), Rgb{0, 0, 0});
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double fy = field.flow_y[i];
    const double fx = field.flow_x[i];
    const double hue =
        (std::atan2(fy, fx) + std::numbers::pi) / (2.0 * std::numbers::pi);
    const double sat = std::min(1.0, std::hypot(fy, fx));
    const double val = std::clamp(static_cast<double>(field.prob[i]), 0.0, 1.0);
    out[i] = hsv_to_rgb(std::min(hue, 0.999999), sat, val);
  }
  return out;
}

}  // namespace densflow
