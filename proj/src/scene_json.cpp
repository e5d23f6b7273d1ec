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
#include "json.hpp"

namespace densflow {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json law_to_json(const SizeLaw& law) {
  struct Visitor {
    ordered_json operator()(const LognormalLaw& l) const {
      return {{"law", "lognormal"}, {"mu", l.mu}, {"sigma", l.sigma}};
    }
    ordered_json operator()(const UniformLaw& l) const {
      return {{"law", "uniform"}, {"a", l.a}, {"b", l.b}};
    }
    ordered_json operator()(const BimodalLaw& l) const {
      return {{"law", "bimodal"},   {"mu1", l.first.mu},
              {"sigma1", l.first.sigma}, {"mu2", l.second.mu},
              {"sigma2", l.second.sigma}, {"p", l.p}};
    }
  };
  return std::visit(Visitor{}, law);
}

SizeLaw law_from_json(const nlohmann::json& j) {
  const auto kind = j.at("law").get<std::string>();
  if (kind == "lognormal") {
    return LognormalLaw{j.at("mu").get<double>(), j.at("sigma").get<double>()};
  }
  if (kind == "uniform") {
    return UniformLaw{j.at("a").get<double>(), j.at("b").get<double>()};
  }
  if (kind == "bimodal") {
    return BimodalLaw{{j.at("mu1").get<double>(), j.at("sigma1").get<double>()},
                      {j.at("mu2").get<double>(), j.at("sigma2").get<double>()},
                      j.at("p").get<double>()};
  }
  throw Error(ErrorCode::kCorruptFile, "unknown size law '" + kind + "'");
}

ordered_json spec_json(const SceneSpec& s) {
  ordered_json j;
  j["height"] = s.height;
  j["width"] = s.width;
  j["morphology"] = to_string(s.morphology);
  j["density_class"] = to_string(s.density);
  j["distribution"] = to_string(s.distribution);
  j["layering"] = to_string(s.layering);
  j["size_law"] = law_to_json(s.size_law);
  j["texture"] = to_string(s.texture);
  j["contrast_polarity"] = to_string(s.polarity);
  j["seed"] = s.seed;
  j["target_count"] = s.target_count;
  j["min_area"] = s.min_area;
  return j;
}

}  // namespace

std::string spec_to_json(const SceneSpec& spec) { return spec_json(spec).dump(); }

SceneSpec spec_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.contains("spec")) j = j.at("spec");
    SceneSpec s;
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.morphology = parse_morphology(j.at("morphology").get<std::string>());
    s.density = parse_density(j.at("density_class").get<std::string>());
    s.distribution = parse_distribution(j.at("distribution").get<std::string>());
    s.layering = parse_layering(j.at("layering").get<std::string>());
    s.size_law = law_from_json(j.at("size_law"));
    s.texture = parse_texture(j.at("texture").get<std::string>());
    s.polarity = parse_polarity(j.at("contrast_polarity").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.target_count = j.value("target_count", 0u);
    s.min_area = j.value("min_area", kMinRenderableArea);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("bad scene spec: ") + e.what());
  }
}

std::string scene_sidecar_json(const SceneSpec& spec, const SceneStats& stats) {
  ordered_json j;
  j["spec"] = spec_json(spec);
  ordered_json st;
  st["n_instances"] = stats.n_instances;
  st["area_bin_edges"] = kAreaBinEdges;
  st["area_histogram"] = stats.area_histogram;
  st["density_class"] = to_string(stats.density_class);
  j["stats"] = std::move(st);
  return j.dump(2) + "\n";
}

}  // namespace densflow
