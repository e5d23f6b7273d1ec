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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "densflow/label_map.hpp"

namespace densflow {

class Rng;

enum class Morphology { kSphere, kEllipse, kRod, kPolygon, kIrregularBlob };
enum class DensityClass { kSparse, kMedium, kHigh };
enum class Distribution { kRandom, kUniformGrid, kClustered };
enum class Layering { kTiled, kMultilayer };
enum class Texture { kSmooth, kNoisy, kPorous };
enum class Polarity { kBrightOnDark, kDarkOnBright };

inline constexpr std::array kAllMorphologies = {
    Morphology::kSphere, Morphology::kEllipse, Morphology::kRod,
    Morphology::kPolygon, Morphology::kIrregularBlob};
inline constexpr std::array kAllDensities = {
    DensityClass::kSparse, DensityClass::kMedium, DensityClass::kHigh};
inline constexpr std::array kAllLayerings = {Layering::kTiled,
                                             Layering::kMultilayer};

std::string_view to_string(Morphology v);
std::string_view to_string(DensityClass v);
std::string_view to_string(Distribution v);
std::string_view to_string(Layering v);
std::string_view to_string(Texture v);
std::string_view to_string(Polarity v);

// Parsers throw kInvalidArgument on unknown names.
Morphology parse_morphology(std::string_view s);
DensityClass parse_density(std::string_view s);
Distribution parse_distribution(std::string_view s);
Layering parse_layering(std::string_view s);
Texture parse_texture(std::string_view s);
Polarity parse_polarity(std::string_view s);

// Instance-count bands: sparse 1-99, medium 100-499, high 500-2500.
struct CountBand {
  std::uint32_t lo;
  std::uint32_t hi;
};
CountBand density_band(DensityClass d);
DensityClass density_class_of(std::uint64_t n_instances);

// Size laws act on the equivalent diameter sqrt(4 * area / pi) in pixels.
struct LognormalLaw {
  double mu = 3.0;
  double sigma = 0.3;
};
struct UniformLaw {
  double a = 10.0;
  double b = 30.0;
};
struct BimodalLaw {
  LognormalLaw first;
  LognormalLaw second;
  double p = 0.5;  // probability of drawing from `second`
};
using SizeLaw = std::variant<LognormalLaw, UniformLaw, BimodalLaw>;

double sample_diameter(const SizeLaw& law, Rng& rng);
std::string size_law_to_string(const SizeLaw& law);
// "lognormal:mu,sigma" | "uniform:a,b" | "bimodal:mu1,s1,mu2,s2,p"
SizeLaw parse_size_law(std::string_view s);

inline constexpr double kMinRenderableArea = 10.0;
inline constexpr double kMaxInstanceArea = 1e5;
inline constexpr int kPlacementRetries = 10000;

struct SceneSpec {
  int height = 512;
  int width = 512;
  Morphology morphology = Morphology::kSphere;
  DensityClass density = DensityClass::kSparse;
  Distribution distribution = Distribution::kRandom;
  Layering layering = Layering::kTiled;
  SizeLaw size_law = LognormalLaw{};
  Texture texture = Texture::kSmooth;
  Polarity polarity = Polarity::kBrightOnDark;
  std::uint64_t seed = 0;
  // Requested instance count; 0 draws one from the density band.
  std::uint32_t target_count = 0;
  // Lower clipping bound on instance area (and on every visible part).
  double min_area = kMinRenderableArea;

  void validate() const;
};

struct PlacedShape {
  LabelId id = 0;
  int z = 0;          // placement order; higher is on top
  RleMask footprint;  // full (unoccluded) mask
};

struct Scene {
  Grid<float> image;  // grayscale in [0, 1]
  LabelMap labels;
  std::vector<PlacedShape> shapes;
};

// Deterministic in `spec`. Throws kInfeasibleSpec when a shape cannot be
// placed within kPlacementRetries attempts.
Scene generate_scene(const SceneSpec& spec);

// Decade bins [10,100), [100,1e3), [1e3,1e4), [1e4,1e5]; areas outside the
// range fall into the end bins.
inline constexpr std::array<double, 5> kAreaBinEdges = {1e1, 1e2, 1e3, 1e4, 1e5};

struct SceneStats {
  std::uint64_t n_instances = 0;
  std::array<std::uint64_t, 4> area_histogram{};
  DensityClass density_class = DensityClass::kSparse;
};

SceneStats scene_statistics(const LabelMap& map);

// Spec with count, size law, distribution, texture and polarity derived
// from `seed` for the given class combination. Zero height/width select the
// class default side (512 sparse, 768 medium, 1024 high); a zero count is
// drawn from the band. The size law is scaled so shapes cover a fixed
// fraction of the image.
SceneSpec default_spec(DensityClass density, Morphology morphology,
                       Layering layering, std::uint64_t seed, int height = 0,
                       int width = 0, std::uint32_t target_count = 0);

// density x morphology x layering x n_per_class specs, seeds derived from
// master_seed.
std::vector<SceneSpec> sample_scene_suite(std::uint64_t master_seed,
                                          int n_per_class);

std::string spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const std::string& text);
// scene.json sidecar: {"spec":{...},"stats":{...}}
std::string scene_sidecar_json(const SceneSpec& spec, const SceneStats& stats);

Grid<std::uint8_t> to_gray8(const Grid<float>& image);

}  // namespace densflow
