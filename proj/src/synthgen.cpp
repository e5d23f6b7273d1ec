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

#include "densflow/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>

#include "densflow/random.hpp"

namespace densflow {

namespace {

constexpr double kPi = std::numbers::pi;

double diameter_of_area(double area) { return std::sqrt(4.0 * area / kPi); }

// Star-shaped or convex shape in a local frame centred on the origin; the
// frame is rotated by the placement angle before the inside test.
// Longest axis allowed for ellipses and rods, matching the largest instance
// diameter the decoder's default step budget reaches.
constexpr double kMaxElongatedExtent = 316.0;

class ShapeGeometry {
 public:
  ShapeGeometry(Morphology kind, double diameter, Rng& rng) : kind_(kind) {
    const double angle = rng.uniform(0.0, kPi);
    cos_ = std::cos(angle);
    sin_ = std::sin(angle);
    const double area = 0.25 * kPi * diameter * diameter;
    switch (kind) {
      case Morphology::kSphere:
        a_ = 0.5 * diameter;
        reach_ = a_;
        break;
      case Morphology::kEllipse: {
        const double k_cap =
            std::pow(std::max(1.0, kMaxElongatedExtent / diameter), 2.0);
        const double k = std::min(rng.uniform(1.3, 2.5), k_cap);
        a_ = 0.5 * diameter * std::sqrt(k);
        b_ = 0.5 * diameter / std::sqrt(k);
        reach_ = a_;
        break;
      }
      case Morphology::kRod: {
        // Stadium of width w and total length k*w with the requested area.
        double k = rng.uniform(3.0, 6.0);
        double w = std::sqrt(area / (k - 1.0 + 0.25 * kPi));
        while (k > 1.0 && k * w > kMaxElongatedExtent) {
          k = std::max(1.0, k - 0.05);
          w = std::sqrt(area / (k - 1.0 + 0.25 * kPi));
        }
        if (w < 2.0) {
          w = 2.0;
          k = std::max(1.0, area / (w * w) + 1.0 - 0.25 * kPi);
        }
        a_ = 0.5 * (k * w - w);  // half segment length
        b_ = 0.5 * w;            // cap radius
        reach_ = a_ + b_;
        break;
      }
      case Morphology::kPolygon: {
        const int n = static_cast<int>(rng.uniform_int(3, 8));
        double unit_area = 0.0;
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < n; ++i) {
          const double phi =
              2.0 * kPi * (i + rng.uniform(-0.2, 0.2)) / static_cast<double>(n);
          const double r = rng.uniform(0.8, 1.2);
          pts.emplace_back(r * std::cos(phi), r * std::sin(phi));
        }
        for (int i = 0; i < n; ++i) {
          const auto& [x0, y0] = pts[i];
          const auto& [x1, y1] = pts[(i + 1) % n];
          unit_area += 0.5 * (x0 * y1 - x1 * y0);
        }
        const double scale = std::sqrt(area / unit_area);
        for (auto& [x, y] : pts) {
          x *= scale;
          y *= scale;
          reach_ = std::max(reach_, std::hypot(x, y));
        }
        polygon_ = std::move(pts);
        break;
      }
      case Morphology::kIrregularBlob: {
        // Superellipse with band-limited radial noise.
        exponent_ = rng.uniform(1.6, 3.0);
        const double k = rng.uniform(1.0, 1.6);
        a_ = std::sqrt(k);
        b_ = 1.0 / std::sqrt(k);
        for (std::size_t h = 0; h < amp_.size(); ++h) {
          amp_[h] = rng.uniform(0.0, 0.3) / static_cast<double>(h + 1);
          phase_[h] = rng.uniform(0.0, 2.0 * kPi);
        }
        constexpr int kSamples = 720;
        double unit_area = 0.0;
        double max_r = 0.0;
        for (int i = 0; i < kSamples; ++i) {
          const double r = blob_radius(2.0 * kPi * i / kSamples);
          unit_area += 0.5 * r * r * (2.0 * kPi / kSamples);
          max_r = std::max(max_r, r);
        }
        scale_ = std::sqrt(area / unit_area);
        reach_ = scale_ * max_r * 1.02;
        break;
      }
    }
  }

  double reach() const { return reach_; }

  bool contains(double dy, double dx) const {
    const double u = dx * cos_ + dy * sin_;
    const double v = -dx * sin_ + dy * cos_;
    switch (kind_) {
      case Morphology::kSphere:
        return u * u + v * v <= a_ * a_;
      case Morphology::kEllipse:
        return (u / a_) * (u / a_) + (v / b_) * (v / b_) <= 1.0;
      case Morphology::kRod: {
        const double du = u - std::clamp(u, -a_, a_);
        return du * du + v * v <= b_ * b_;
      }
      case Morphology::kPolygon: {
        bool in = false;
        const std::size_t n = polygon_.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
          const auto& [xi, yi] = polygon_[i];
          const auto& [xj, yj] = polygon_[j];
          if ((yi > v) != (yj > v) &&
              u < (xj - xi) * (v - yi) / (yj - yi) + xi) {
            in = !in;
          }
        }
        return in;
      }
      case Morphology::kIrregularBlob: {
        const double rho = std::hypot(u, v);
        return rho <= scale_ * blob_radius(std::atan2(v, u));
      }
    }
    return false;
  }

 private:
  double blob_radius(double phi) const {
    const double c = std::abs(std::cos(phi)) / a_;
    const double s = std::abs(std::sin(phi)) / b_;
    const double base =
        std::pow(std::pow(c, exponent_) + std::pow(s, exponent_), -1.0 / exponent_);
    double f = 1.0;
    for (std::size_t h = 0; h < amp_.size(); ++h) {
      f += amp_[h] * std::cos(static_cast<double>(h + 2) * phi + phase_[h]);
    }
    return base * f;
  }

  Morphology kind_;
  double cos_ = 1.0;
  double sin_ = 0.0;
  double a_ = 0.0;
  double b_ = 0.0;
  double reach_ = 0.0;
  std::vector<std::pair<double, double>> polygon_;
  double exponent_ = 2.0;
  double scale_ = 1.0;
  std::array<double, 5> amp_{};
  std::array<double, 5> phase_{};
};

struct BBox {
  int r0, c0, r1, c1;  // inclusive
};

// Rasterizes at pixel centres, clipped to the image, keeping the largest
// 4-connected piece so every footprint is connected.
std::vector<Pixel> rasterize(const ShapeGeometry& g, double cy, double cx,
                             int height, int width) {
  const double reach = g.reach() + 1.0;
  const int r0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int r1 = std::min(height - 1, static_cast<int>(std::ceil(cy + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int c1 = std::min(width - 1, static_cast<int>(std::ceil(cx + reach)));
  if (r0 > r1 || c0 > c1) return {};
  BinaryGrid local(r1 - r0 + 1, c1 - c0 + 1);
  bool any = false;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (g.contains(r - cy, c - cx)) {
        local(r - r0, c - c0) = 1;
        any = true;
      }
    }
  }
  if (!any) return {};
  const LabelMap comps = label_connected_components(local, 4);
  const auto areas = instance_areas(comps);
  LabelId keep = 0;
  std::uint64_t best = 0;
  for (const auto& [id, a] : areas) {
    if (a > best) {
      best = a;
      keep = id;
    }
  }
  std::vector<Pixel> out;
  out.reserve(best);
  for (int r = 0; r < comps.height(); ++r) {
    for (int c = 0; c < comps.width(); ++c) {
      if (comps(r, c) == keep) out.push_back(Pixel{r + r0, c + c0});
    }
  }
  return out;
}

double mean_area_estimate(const SizeLaw& law, double dmin, double dmax,
                          std::uint64_t seed) {
  Rng rng(seed ^ 0x5ca1ab1eull);
  double total = 0.0;
  constexpr int kDraws = 512;
  for (int i = 0; i < kDraws; ++i) {
    const double d = std::clamp(sample_diameter(law, rng), dmin, dmax);
    total += 0.25 * kPi * d * d;
  }
  return total / kDraws;
}

struct Placer {
  Placer(const SceneSpec& s, Rng& r, std::uint32_t n, double area)
      : spec(s), rng(r), count(n), mean_area(area) {}

  const SceneSpec& spec;
  Rng& rng;
  std::uint32_t count;
  double mean_area;
  // grid
  int grid_cols = 1;
  double cell_h = 0.0, cell_w = 0.0;
  std::vector<std::uint32_t> cell_order;
  // clusters
  std::vector<std::pair<double, double>> cluster_centers;
  double cluster_spread = 0.0;

  void setup() {
    const double h = spec.height, w = spec.width;
    if (spec.distribution == Distribution::kUniformGrid) {
      grid_cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(count * w / h))));
      const int grid_rows =
          std::max(1, static_cast<int>((count + grid_cols - 1) / grid_cols));
      cell_h = h / grid_rows;
      cell_w = w / grid_cols;
      cell_order.resize(static_cast<std::size_t>(grid_rows) * grid_cols);
      for (std::uint32_t i = 0; i < cell_order.size(); ++i) cell_order[i] = i;
      for (std::size_t i = cell_order.size(); i > 1; --i) {
        std::swap(cell_order[i - 1],
                  cell_order[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
      }
    } else if (spec.distribution == Distribution::kClustered) {
      const auto n_clusters = std::max<std::uint32_t>(
          1, static_cast<std::uint32_t>(std::lround(std::sqrt(count))));
      for (std::uint32_t k = 0; k < n_clusters; ++k) {
        cluster_centers.emplace_back(rng.uniform(0.0, h), rng.uniform(0.0, w));
      }
      const double members = static_cast<double>(count) / n_clusters;
      cluster_spread = std::sqrt(members * mean_area / (0.35 * kPi)) / 1.2;
    }
  }

  std::pair<double, double> position(std::uint32_t index, int attempt) {
    const double h = spec.height, w = spec.width;
    switch (spec.distribution) {
      case Distribution::kRandom:
        break;
      case Distribution::kUniformGrid: {
        if (attempt >= 200) break;
        const std::uint32_t cell = cell_order[index % cell_order.size()];
        const double cy = (cell / grid_cols + 0.5) * cell_h;
        const double cx = (cell % grid_cols + 0.5) * cell_w;
        const double jitter = std::min(0.5, 0.15 + 0.01 * attempt);
        return {std::clamp(cy + rng.uniform(-jitter, jitter) * cell_h, 0.0, h - 1),
                std::clamp(cx + rng.uniform(-jitter, jitter) * cell_w, 0.0, w - 1)};
      }
      case Distribution::kClustered: {
        const auto& [cy, cx] = cluster_centers[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(cluster_centers.size()) - 1))];
        const double s = cluster_spread * (1.0 + attempt / 50.0);
        return {std::clamp(rng.normal(cy, s), 0.0, h - 1),
                std::clamp(rng.normal(cx, s), 0.0, w - 1)};
      }
    }
    return {rng.uniform(0.0, h), rng.uniform(0.0, w)};
  }
};

std::uint32_t draw_count(const SceneSpec& spec, Rng& rng) {
  const CountBand band = density_band(spec.density);
  if (spec.target_count != 0) return spec.target_count;
  const double x = std::exp(rng.uniform(std::log(static_cast<double>(band.lo)),
                                        std::log(band.hi + 1.0)));
  return std::clamp(static_cast<std::uint32_t>(x), band.lo, band.hi);
}

// Visible part of `id` minus the pixels flagged in `covered` must stay one
// 4-connected piece.
bool stays_connected(const LabelMap& labels, const BinaryGrid& covered,
                     LabelId id, const BBox& box) {
  BinaryGrid local(box.r1 - box.r0 + 1, box.c1 - box.c0 + 1);
  for (int r = box.r0; r <= box.r1; ++r) {
    for (int c = box.c0; c <= box.c1; ++c) {
      local(r - box.r0, c - box.c0) = labels(r, c) == id && !covered(r, c);
    }
  }
  return max_label(label_connected_components(local, 4)) <= 1;
}

Grid<float> render_image(const SceneSpec& spec, const LabelMap& labels,
                         const std::vector<float>& levels) {
  const bool bright = spec.polarity == Polarity::kBrightOnDark;
  const float bg = bright ? 0.15f : 0.85f;
  Grid<float> image(spec.height, spec.width);
  const std::uint64_t seed = spec.seed ^ 0x1a9e5eedull;
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const std::size_t i = labels.index(r, c);
      const LabelId id = labels[i];
      double v = bg;
      if (id != 0) {
        v = levels[id];
        bool rim = false;
        for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
          if (labels.contains(r + dr, c + dc) && labels(r + dr, c + dc) != id) {
            rim = true;
          }
        }
        if (rim) v = 0.5 * (v + bg);
        if (spec.texture == Texture::kPorous &&
            unit_open_low(counter_hash(seed, (static_cast<std::uint64_t>(r / 3) << 32) |
                                                 static_cast<std::uint32_t>(c / 3),
                                       id)) < 0.12) {
          v = 0.3 * v + 0.7 * bg;
        }
      }
      v += 0.05 * (static_cast<double>(r) / spec.height - 0.5);
      if (spec.texture == Texture::kNoisy) {
        v *= 1.0 + 0.15 * counter_normal(seed, i, 1);
      }
      v += 0.03 * counter_normal(seed, i, 2);
      image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return image;
}

}  // namespace

std::string_view to_string(Morphology v) {
  switch (v) {
    case Morphology::kSphere: return "sphere";
    case Morphology::kEllipse: return "ellipse";
    case Morphology::kRod: return "rod";
    case Morphology::kPolygon: return "polygon";
    case Morphology::kIrregularBlob: return "irregular_blob";
  }
  return "?";
}
std::string_view to_string(DensityClass v) {
  switch (v) {
    case DensityClass::kSparse: return "sparse";
    case DensityClass::kMedium: return "medium";
    case DensityClass::kHigh: return "high";
  }
  return "?";
}
std::string_view to_string(Distribution v) {
  switch (v) {
    case Distribution::kRandom: return "random";
    case Distribution::kUniformGrid: return "uniform_grid";
    case Distribution::kClustered: return "clustered";
  }
  return "?";
}
std::string_view to_string(Layering v) {
  return v == Layering::kTiled ? "tiled" : "multilayer";
}
std::string_view to_string(Texture v) {
  switch (v) {
    case Texture::kSmooth: return "smooth";
    case Texture::kNoisy: return "noisy";
    case Texture::kPorous: return "porous";
  }
  return "?";
}
std::string_view to_string(Polarity v) {
  return v == Polarity::kBrightOnDark ? "bright_on_dark" : "dark_on_bright";
}

namespace {
template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& values,
                const char* what) {
  for (Enum v : values) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kInvalidArgument,
              std::string("unknown ") + what + " '" + std::string(s) + "'");
}
}  // namespace

Morphology parse_morphology(std::string_view s) {
  return parse_enum(s, kAllMorphologies, "morphology");
}
DensityClass parse_density(std::string_view s) {
  return parse_enum(s, kAllDensities, "density class");
}
Distribution parse_distribution(std::string_view s) {
  return parse_enum(s,
                    std::array{Distribution::kRandom, Distribution::kUniformGrid,
                               Distribution::kClustered},
                    "distribution");
}
Layering parse_layering(std::string_view s) {
  return parse_enum(s, kAllLayerings, "layering");
}
Texture parse_texture(std::string_view s) {
  return parse_enum(
      s, std::array{Texture::kSmooth, Texture::kNoisy, Texture::kPorous},
      "texture");
}
Polarity parse_polarity(std::string_view s) {
  return parse_enum(s, std::array{Polarity::kBrightOnDark, Polarity::kDarkOnBright},
                    "polarity");
}

CountBand density_band(DensityClass d) {
  switch (d) {
    case DensityClass::kSparse: return {1, 99};
    case DensityClass::kMedium: return {100, 499};
    case DensityClass::kHigh: return {500, 2500};
  }
  return {1, 99};
}

DensityClass density_class_of(std::uint64_t n) {
  if (n < 100) return DensityClass::kSparse;
  if (n < 500) return DensityClass::kMedium;
  return DensityClass::kHigh;
}

double sample_diameter(const SizeLaw& law, Rng& rng) {
  struct Visitor {
    Rng& rng;
    double operator()(const LognormalLaw& l) const {
      return std::exp(rng.normal(l.mu, l.sigma));
    }
    double operator()(const UniformLaw& l) const { return rng.uniform(l.a, l.b); }
    double operator()(const BimodalLaw& l) const {
      const bool second = rng.uniform() < l.p;
      return (*this)(second ? l.second : l.first);
    }
  };
  return std::visit(Visitor{rng}, law);
}

std::string size_law_to_string(const SizeLaw& law) {
  struct Visitor {
    std::string operator()(const LognormalLaw& l) const {
      return "lognormal:" + std::to_string(l.mu) + "," + std::to_string(l.sigma);
    }
    std::string operator()(const UniformLaw& l) const {
      return "uniform:" + std::to_string(l.a) + "," + std::to_string(l.b);
    }
    std::string operator()(const BimodalLaw& l) const {
      return "bimodal:" + std::to_string(l.first.mu) + "," +
             std::to_string(l.first.sigma) + "," + std::to_string(l.second.mu) +
             "," + std::to_string(l.second.sigma) + "," + std::to_string(l.p);
    }
  };
  return std::visit(Visitor{}, law);
}

SizeLaw parse_size_law(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "size law needs 'kind:params'");
  }
  const std::string kind(s.substr(0, colon));
  std::vector<double> p;
  std::string rest(s.substr(colon + 1));
  std::size_t pos = 0;
  try {
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      p.push_back(std::stod(rest.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "bad size law parameters: " + rest);
  }
  if (kind == "lognormal" && p.size() == 2) return LognormalLaw{p[0], p[1]};
  if (kind == "uniform" && p.size() == 2) return UniformLaw{p[0], p[1]};
  if (kind == "bimodal" && p.size() == 5) {
    return BimodalLaw{{p[0], p[1]}, {p[2], p[3]}, p[4]};
  }
  throw Error(ErrorCode::kInvalidArgument, "bad size law: " + std::string(s));
}

void SceneSpec::validate() const {
  if (height < 8 || width < 8) {
    throw Error(ErrorCode::kInvalidArgument, "scene must be at least 8x8");
  }
  if (!(min_area >= kMinRenderableArea && min_area <= kMaxInstanceArea)) {
    throw Error(ErrorCode::kInvalidArgument, "min_area must lie in [10, 1e5]");
  }
  if (target_count != 0) {
    const CountBand band = density_band(density);
    if (target_count < band.lo || target_count > band.hi) {
      throw Error(ErrorCode::kInvalidArgument,
                  "target_count " + std::to_string(target_count) +
                      " outside the " + std::string(to_string(density)) + " band");
    }
  }
  struct Check {
    void operator()(const LognormalLaw& l) const {
      if (!std::isfinite(l.mu) || !(l.sigma >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "lognormal needs sigma >= 0");
      }
    }
    void operator()(const UniformLaw& l) const {
      if (!(l.a > 0.0 && l.b >= l.a)) {
        throw Error(ErrorCode::kInvalidArgument, "uniform law needs 0 < a <= b");
      }
    }
    void operator()(const BimodalLaw& l) const {
      (*this)(l.first);
      (*this)(l.second);
      if (!(l.p >= 0.0 && l.p <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "bimodal mix must lie in [0,1]");
      }
    }
  };
  std::visit(Check{}, size_law);
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::uint32_t count = draw_count(spec, rng);
  const double dmin = diameter_of_area(spec.min_area);
  const double dmax = diameter_of_area(kMaxInstanceArea);
  const int min_visible = static_cast<int>(std::ceil(spec.min_area));
  const bool multilayer = spec.layering == Layering::kMultilayer;

  Placer placer(spec, rng, count,
                mean_area_estimate(spec.size_law, dmin, dmax, spec.seed));
  placer.setup();

  Scene scene;
  scene.labels = LabelMap(spec.height, spec.width);
  LabelMap& labels = scene.labels;
  BinaryGrid covered(spec.height, spec.width);
  std::vector<std::uint64_t> visible(1, 0);  // indexed by id
  std::vector<BBox> boxes(1, BBox{});
  std::unordered_map<LabelId, std::uint64_t> lost;

  for (std::uint32_t i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const double d = std::clamp(sample_diameter(spec.size_law, rng), dmin, dmax);
      const ShapeGeometry geometry(spec.morphology, d, rng);
      const auto [cy, cx] = placer.position(i, attempt);
      const auto pixels = rasterize(geometry, cy, cx, spec.height, spec.width);
      if (pixels.size() < static_cast<std::size_t>(min_visible)) continue;

      bool ok = true;
      lost.clear();
      for (const Pixel& p : pixels) {
        const LabelId under = labels(p.row, p.col);
        if (under == 0) continue;
        if (!multilayer) {
          ok = false;
          break;
        }
        ++lost[under];
      }
      if (ok && multilayer && !lost.empty()) {
        for (const Pixel& p : pixels) covered(p.row, p.col) = 1;
        for (const auto& [id, n] : lost) {
          if (visible[id] - n < static_cast<std::uint64_t>(min_visible) ||
              !stays_connected(labels, covered, id, boxes[id])) {
            ok = false;
            break;
          }
        }
        for (const Pixel& p : pixels) covered(p.row, p.col) = 0;
      }
      if (!ok) continue;

      const auto id = static_cast<LabelId>(scene.shapes.size() + 1);
      for (const auto& [under, n] : lost) visible[under] -= n;
      BBox box{pixels[0].row, pixels[0].col, pixels[0].row, pixels[0].col};
      PlacedShape shape;
      shape.id = id;
      shape.z = static_cast<int>(id);
      shape.footprint.id = id;
      for (const Pixel& p : pixels) {
        labels(p.row, p.col) = id;
        box.r0 = std::min(box.r0, p.row);
        box.r1 = std::max(box.r1, p.row);
        box.c0 = std::min(box.c0, p.col);
        box.c1 = std::max(box.c1, p.col);
        const std::uint64_t offset = labels.index(p.row, p.col);
        auto& runs = shape.footprint.runs;
        if (!runs.empty() && runs.back().start + runs.back().length == offset) {
          ++runs.back().length;
        } else {
          runs.push_back(Run{offset, 1});
        }
      }
      visible.push_back(pixels.size());
      boxes.push_back(box);
      scene.shapes.push_back(std::move(shape));
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::kInfeasibleSpec,
                  "could not place instance " + std::to_string(i + 1) + " of " +
                      std::to_string(count) + " after " +
                      std::to_string(kPlacementRetries) + " attempts");
    }
  }

  std::vector<float> levels(scene.shapes.size() + 1, 0.0f);
  const bool bright = spec.polarity == Polarity::kBrightOnDark;
  for (std::size_t k = 1; k < levels.size(); ++k) {
    levels[k] = static_cast<float>(bright ? rng.uniform(0.55, 0.85)
                                          : rng.uniform(0.15, 0.45));
  }
  scene.image = render_image(spec, labels, levels);
  return scene;
}

SceneStats scene_statistics(const LabelMap& map) {
  SceneStats stats;
  for (const auto& [id, area] : instance_areas(map)) {
    ++stats.n_instances;
    std::size_t bin = 0;
    while (bin + 1 < stats.area_histogram.size() &&
           static_cast<double>(area) >= kAreaBinEdges[bin + 1]) {
      ++bin;
    }
    ++stats.area_histogram[bin];
  }
  stats.density_class = density_class_of(stats.n_instances);
  return stats;
}

SceneSpec default_spec(DensityClass density, Morphology morphology,
                       Layering layering, std::uint64_t seed, int height,
                       int width, std::uint32_t target_count) {
  Rng rng(seed ^ 0xdefa017ull);
  SceneSpec spec;
  spec.density = density;
  spec.morphology = morphology;
  spec.layering = layering;
  spec.seed = seed;
  const int side = density == DensityClass::kSparse   ? 512
                   : density == DensityClass::kMedium ? 768
                                                      : 1024;
  spec.height = height > 0 ? height : side;
  spec.width = width > 0 ? width : side;
  spec.target_count = target_count;
  spec.target_count = draw_count(spec, rng);
  spec.distribution = static_cast<Distribution>(rng.uniform_int(0, 2));
  spec.texture = static_cast<Texture>(rng.uniform_int(0, 2));
  spec.polarity = static_cast<Polarity>(rng.uniform_int(0, 1));

  // Size the law so shapes cover a fixed fraction of the image.
  const double coverage = layering == Layering::kTiled ? 0.35 : 0.5;
  const double mean_area =
      std::clamp(coverage * spec.height * spec.width / spec.target_count, 30.0, 3e4);
  const double m = diameter_of_area(mean_area);
  const double pick = rng.uniform();
  if (pick < 0.6) {
    const double sigma = rng.uniform(0.15, 0.35);
    spec.size_law = LognormalLaw{std::log(m) - sigma * sigma, sigma};
  } else if (pick < 0.8) {
    const double base = m / std::sqrt((0.75 * 0.75 + 0.75 * 1.25 + 1.25 * 1.25) / 3.0);
    spec.size_law = UniformLaw{0.75 * base, 1.25 * base};
  } else {
    spec.size_law =
        BimodalLaw{{std::log(m) - 0.35, 0.15}, {std::log(m) + 0.25, 0.15}, 0.3};
  }
  return spec;
}

std::vector<SceneSpec> sample_scene_suite(std::uint64_t master_seed,
                                          int n_per_class) {
  if (n_per_class < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_per_class must be >= 1");
  }
  std::vector<SceneSpec> suite;
  std::uint64_t counter = 0;
  for (DensityClass d : kAllDensities) {
    for (Morphology m : kAllMorphologies) {
      for (Layering l : kAllLayerings) {
        for (int k = 0; k < n_per_class; ++k) {
          suite.push_back(default_spec(d, m, l, counter_hash(master_seed, counter++)));
        }
      }
    }
  }
  return suite;
}

Grid<std::uint8_t> to_gray8(const Grid<float>& image) {
  Grid<std::uint8_t> out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(image[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

}  // namespace densflow
