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

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <set>

#include "doctest.h"
#include "densflow/synthgen.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace densflow;

namespace {

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.height = spec.width = 192;
  spec.target_count = 40;
  spec.size_law = LognormalLaw{2.7, 0.3};
  spec.seed = seed;
  return spec;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// Moments of log(pi/4 * d^2) with d clamped to [dmin, dmax], by trapezoidal
// quadrature over the diameter density.
Moments log_area_moments(const std::function<double(double)>& pdf, double dmin,
                         double dmax, double lo, double hi) {
  constexpr int kSteps = 200000;
  const double h = (hi - lo) / kSteps;
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= kSteps; ++i) {
    const double d = lo + i * h;
    const double w = (i == 0 || i == kSteps ? 0.5 : 1.0) * pdf(d) * h;
    const double dc = std::clamp(d, dmin, dmax);
    const double la = std::log(0.25 * std::numbers::pi * dc * dc);
    m0 += w;
    m1 += w * la;
    m2 += w * la * la;
  }
  const double mean = m1 / m0;
  return {mean, m2 / m0 - mean * mean};
}

double lognormal_pdf(double d, double mu, double sigma) {
  if (d <= 0.0) return 0.0;
  const double z = (std::log(d) - mu) / sigma;
  return std::exp(-0.5 * z * z) / (d * sigma * std::sqrt(2.0 * std::numbers::pi));
}

Moments empirical_log_area(const SizeLaw& law, int n_scenes) {
  double s1 = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < n_scenes; ++k) {
    SceneSpec spec;
    spec.height = spec.width = 384;
    spec.target_count = 30;
    spec.size_law = law;
    spec.seed = 1000 + k;
    for (auto [id, a] : instance_areas(generate_scene(spec).labels)) {
      const double la = std::log(double(a));
      s1 += la;
      s2 += la * la;
      ++n;
    }
  }
  const double mean = s1 / n;
  return {mean, s2 / n - mean * mean};
}

double equivalent_diameter(std::uint64_t area) {
  return std::sqrt(4.0 * double(area) / std::numbers::pi);
}

}  // namespace

TEST_CASE("sparse scenes are deterministic and within the band") {
  SceneSpec spec = default_spec(DensityClass::kSparse, Morphology::kPolygon,
                                Layering::kTiled, 42);
  const Scene a = generate_scene(spec);
  const Scene b = generate_scene(spec);
  CHECK(a.labels == b.labels);
  CHECK(a.image == b.image);
  const auto n = instance_areas(a.labels).size();
  CHECK(n >= 1);
  CHECK(n <= 99);
  spec.seed = 43;
  CHECK(!(generate_scene(spec).labels == a.labels));
}

TEST_CASE("high density at 1024x1024 reaches the crowded regime") {
  SceneSpec spec;
  spec.height = spec.width = 1024;
  spec.density = DensityClass::kHigh;
  spec.size_law = LognormalLaw{2.6, 0.25};
  spec.seed = 5;
  const Scene s = generate_scene(spec);
  const SceneStats stats = scene_statistics(s.labels);
  CHECK(stats.n_instances >= 500);
  CHECK(stats.n_instances <= 2500);
  CHECK(stats.density_class == DensityClass::kHigh);
}

TEST_CASE("tiled footprints are pairwise disjoint") {
  for (Morphology morph : kAllMorphologies) {
    for (Distribution dist : {Distribution::kRandom, Distribution::kUniformGrid,
                              Distribution::kClustered}) {
      SceneSpec spec = small_spec(7 + int(morph) * 3 + int(dist));
      spec.morphology = morph;
      spec.distribution = dist;
      const Scene s = generate_scene(spec);
      std::vector<int> hits(s.labels.size(), 0);
      for (const auto& shape : s.shapes) {
        for (const auto& run : shape.footprint.runs) {
          for (auto i = run.start; i < run.start + run.length; ++i) ++hits[i];
        }
      }
      CHECK(*std::max_element(hits.begin(), hits.end()) <= 1);
      // In tiled mode the label map is exactly the union of footprints.
      CHECK(decode_rle([&] {
              std::vector<RleMask> m;
              for (const auto& sh : s.shapes) m.push_back(sh.footprint);
              return m;
            }(),
                       spec.height, spec.width) == s.labels);
    }
  }
}

TEST_CASE("multilayer labels are the top-most covering shape") {
  for (Morphology morph : kAllMorphologies) {
    SceneSpec spec = small_spec(100 + int(morph));
    spec.morphology = morph;
    spec.layering = Layering::kMultilayer;
    spec.target_count = 60;
    const Scene s = generate_scene(spec);
    std::vector<int> top(s.labels.size(), 0);
    for (const auto& shape : s.shapes) {
      for (const auto& run : shape.footprint.runs) {
        for (auto i = run.start; i < run.start + run.length; ++i) {
          top[i] = std::max(top[i], shape.z);
        }
      }
    }
    std::map<int, LabelId> id_of_z;
    for (const auto& shape : s.shapes) id_of_z[shape.z] = shape.id;
    bool consistent = true;
    for (std::size_t i = 0; i < top.size(); ++i) {
      consistent &= s.labels[i] == (top[i] ? id_of_z[top[i]] : 0);
    }
    CHECK(consistent);

    // Every placed shape stays visible with >= 10 pixels in one piece.
    const auto areas = instance_areas(s.labels);
    CHECK(areas.size() == s.shapes.size());
    for (auto [id, a] : areas) CHECK(a >= 10);
    CHECK(split_disconnected(s.labels, 4) == relabel_sequential(s.labels));
  }
}

TEST_CASE("min_area is honoured") {
  SceneSpec spec = small_spec(3);
  spec.size_law = UniformLaw{3.0, 9.0};
  spec.min_area = 30;
  for (auto [id, a] : instance_areas(generate_scene(spec).labels)) CHECK(a >= 30);
}

TEST_CASE("infeasible specs are reported") {
  SceneSpec spec;
  spec.height = spec.width = 64;
  spec.target_count = 99;
  spec.size_law = LognormalLaw{4.0, 0.05};
  try {
    generate_scene(spec);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleSpec);
  }
}

TEST_CASE("SceneSpec validation") {
  SceneSpec spec;
  spec.target_count = 150;  // sparse band ends at 99
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.min_area = 5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.size_law = UniformLaw{20, 10};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.size_law = BimodalLaw{{3, 0.2}, {4, 0.2}, 1.5};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = {};
  spec.height = 4;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("scene_statistics examples") {
  const SceneStats empty = scene_statistics(LabelMap(8, 8));
  CHECK(empty.n_instances == 0);
  CHECK(empty.area_histogram == std::array<std::uint64_t, 4>{0, 0, 0, 0});

  LabelMap m(40, 40);
  std::size_t placed = 0;
  for (auto [id, area] : {std::pair{1u, 12}, {2u, 120}, {3u, 1200}}) {
    for (int k = 0; k < area; ++k) m[placed++] = id;
  }
  const SceneStats s = scene_statistics(m);
  CHECK(s.n_instances == 3);
  CHECK(s.area_histogram == std::array<std::uint64_t, 4>{1, 1, 1, 0});
  CHECK(s.density_class == DensityClass::kSparse);
}

TEST_CASE("histogram mass equals the instance count") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SceneStats s = scene_statistics(generate_scene(small_spec(seed)).labels);
    std::uint64_t mass = 0;
    for (auto v : s.area_histogram) mass += v;
    CHECK(mass == s.n_instances);
  }
}

TEST_CASE("density bands") {
  CHECK(density_class_of(1) == DensityClass::kSparse);
  CHECK(density_class_of(99) == DensityClass::kSparse);
  CHECK(density_class_of(100) == DensityClass::kMedium);
  CHECK(density_class_of(499) == DensityClass::kMedium);
  CHECK(density_class_of(500) == DensityClass::kHigh);
  CHECK(density_class_of(2500) == DensityClass::kHigh);
  for (DensityClass d : kAllDensities) {
    const CountBand band = density_band(d);
    CHECK(density_class_of(band.lo) == d);
    CHECK(density_class_of(band.hi) == d);
  }
}

TEST_CASE("lognormal sizes: median equivalent diameter near exp(mu)") {
  const double mu = 3.0;
  std::vector<double> diameters;
  for (int k = 0; k < 50; ++k) {
    SceneSpec spec;
    spec.height = spec.width = 384;
    spec.target_count = 30;
    spec.size_law = LognormalLaw{mu, 0.3};
    spec.seed = 500 + k;
    for (auto [id, a] : instance_areas(generate_scene(spec).labels)) {
      diameters.push_back(equivalent_diameter(a));
    }
  }
  std::nth_element(diameters.begin(), diameters.begin() + diameters.size() / 2,
                   diameters.end());
  const double median = diameters[diameters.size() / 2];
  CHECK(std::abs(median / std::exp(mu) - 1.0) <= 0.10);
}

TEST_CASE("log-area moments match each size law") {
  const double dmin = equivalent_diameter(10);
  const double dmax = std::sqrt(4.0 * kMaxInstanceArea / std::numbers::pi);
  struct Case {
    SizeLaw law;
    std::function<double(double)> pdf;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {LognormalLaw{3.0, 0.3}, [](double d) { return lognormal_pdf(d, 3.0, 0.3); },
       1e-3, 200.0},
      {UniformLaw{8.0, 30.0}, [](double d) { return d >= 8.0 && d <= 30.0 ? 1.0 : 0.0; },
       8.0, 30.0},
      {BimodalLaw{{2.5, 0.15}, {3.3, 0.15}, 0.4},
       [](double d) {
         return 0.6 * lognormal_pdf(d, 2.5, 0.15) + 0.4 * lognormal_pdf(d, 3.3, 0.15);
       },
       1e-3, 200.0},
  };
  for (const auto& c : cases) {
    const Moments want = log_area_moments(c.pdf, dmin, dmax, c.lo, c.hi);
    const Moments got = empirical_log_area(c.law, 50);
    INFO(size_law_to_string(c.law), " mean ", got.mean, " vs ", want.mean, " var ",
         got.var, " vs ", want.var);
    CHECK(std::abs(got.mean / want.mean - 1.0) <= 0.10);
    CHECK(std::abs(got.var / want.var - 1.0) <= 0.10);
  }
}

TEST_CASE("scene suite") {
  const auto suite = sample_scene_suite(7, 1);
  CHECK(suite.size() == 30);
  const auto again = sample_scene_suite(7, 1);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    CHECK(spec_to_json(suite[i]) == spec_to_json(again[i]));
  }
  std::set<std::tuple<int, int, int>> combos;
  for (const auto& s : suite) {
    combos.insert({int(s.density), int(s.morphology), int(s.layering)});
    CHECK(density_class_of(s.target_count) == s.density);
  }
  CHECK(combos.size() == 30);
  CHECK(sample_scene_suite(7, 2).size() == 60);
  CHECK_THROWS_AS(sample_scene_suite(7, 0), Error);
}

TEST_CASE("pooled suite areas span three orders of magnitude") {
  std::uint64_t lo = ~0ull, hi = 0;
  for (const auto& spec : sample_scene_suite(11, 1)) {
    for (auto [id, a] : instance_areas(generate_scene(spec).labels)) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  INFO("min area ", lo, " max area ", hi);
  CHECK(double(hi) / double(lo) >= 1e3);
}

TEST_CASE("SceneSpec JSON round trip and sidecar") {
  for (const auto& spec : sample_scene_suite(3, 1)) {
    const std::string j = spec_to_json(spec);
    CHECK(spec_to_json(spec_from_json(j)) == j);
  }
  SceneSpec spec = small_spec(9);
  spec.size_law = BimodalLaw{{2.1, 0.2}, {3.05, 0.1}, 0.25};
  spec.texture = Texture::kPorous;
  spec.polarity = Polarity::kDarkOnBright;
  const Scene scene = generate_scene(spec);
  const std::string sidecar = scene_sidecar_json(spec, scene_statistics(scene.labels));
  const SceneSpec back = spec_from_json(sidecar);
  CHECK(spec_to_json(back) == spec_to_json(spec));
  CHECK(generate_scene(back).labels == scene.labels);
  const auto doc = nlohmann::json::parse(sidecar);
  CHECK(doc["stats"]["n_instances"] == instance_areas(scene.labels).size());
  CHECK(doc["spec"]["contrast_polarity"] == "dark_on_bright");
}

TEST_CASE("enum names and size-law strings parse back") {
  for (Morphology m : kAllMorphologies) CHECK(parse_morphology(to_string(m)) == m);
  for (DensityClass d : kAllDensities) CHECK(parse_density(to_string(d)) == d);
  for (Layering l : kAllLayerings) CHECK(parse_layering(to_string(l)) == l);
  CHECK(parse_distribution("clustered") == Distribution::kClustered);
  CHECK(parse_texture("noisy") == Texture::kNoisy);
  CHECK(parse_polarity("dark_on_bright") == Polarity::kDarkOnBright);
  CHECK_THROWS_AS(parse_morphology("cube"), Error);

  const SizeLaw a = parse_size_law("lognormal:3,0.25");
  CHECK(std::get<LognormalLaw>(a).mu == 3.0);
  CHECK(std::get<LognormalLaw>(a).sigma == 0.25);
  const SizeLaw b = parse_size_law("uniform:5,9");
  CHECK(std::get<UniformLaw>(b).b == 9.0);
  const SizeLaw c = parse_size_law("bimodal:2,0.1,3,0.2,0.3");
  CHECK(std::get<BimodalLaw>(c).p == 0.3);
  CHECK(std::get<BimodalLaw>(c).second.mu == 3.0);
  CHECK_THROWS_AS(parse_size_law("uniform:5"), Error);
  CHECK_THROWS_AS(parse_size_law("gamma:1,2"), Error);
  CHECK_THROWS_AS(parse_size_law("lognormal:x,1"), Error);
}

TEST_CASE("rendering follows the polarity") {
  SceneSpec spec = small_spec(21);
  const Scene bright = generate_scene(spec);
  spec.polarity = Polarity::kDarkOnBright;
  const Scene dark = generate_scene(spec);
  double fg_b = 0, bg_b = 0, fg_d = 0, bg_d = 0;
  std::size_t nf = 0, nb = 0;
  for (std::size_t i = 0; i < bright.labels.size(); ++i) {
    if (bright.labels[i]) fg_b += bright.image[i], fg_d += dark.image[i], ++nf;
    else bg_b += bright.image[i], bg_d += dark.image[i], ++nb;
    CHECK(bright.image[i] >= 0.0f);
    CHECK(bright.image[i] <= 1.0f);
  }
  CHECK(fg_b / nf > bg_b / nb);
  CHECK(fg_d / nf < bg_d / nb);
}
