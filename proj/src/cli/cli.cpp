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

#include "densflow/cli.hpp"

#include <fmt/core.h>
#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "densflow/flow.hpp"
#include "densflow/io.hpp"
#include "densflow/metrics.hpp"
#include "densflow/parallel.hpp"
#include "densflow/random.hpp"
#include "densflow/render.hpp"
#include "densflow/synthgen.hpp"
#include "densflow/uemf.hpp"
#include "json.hpp"

namespace densflow::cli {

namespace {

using Clock = std::chrono::steady_clock;

struct Invocation {
  const std::vector<std::string>& args;
  std::ostream& out;
  std::ostream& err;
};

// Thrown for flag values that parse but are out of range.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<fs::path> list_dir(const fs::path& dir, bool (*keep)(const fs::path&)) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kFileNotFound, "not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && keep(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

bool is_uemf_file(const fs::path& p) { return p.extension() == ".uemf"; }

// Stem -> path; two files sharing a stem make the pairing ambiguous.
std::map<std::string, fs::path> index_by_stem(const std::vector<fs::path>& files) {
  std::map<std::string, fs::path> out;
  for (const auto& f : files) {
    const auto [it, fresh] = out.emplace(f.stem().string(), f);
    if (!fresh) {
      throw Error(ErrorCode::kInvalidArgument,
                  "ambiguous stem '" + it->first + "': " + it->second.string() +
                      " and " + f.string());
    }
  }
  return out;
}

std::vector<FileDigest> digest_all(const std::vector<fs::path>& files,
                                   const fs::path& base) {
  std::vector<FileDigest> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(digest_file(f, base));
  return out;
}

RunManifest make_manifest(const Invocation& inv, std::uint64_t seed = 0) {
  RunManifest m;
  m.command = inv.args.empty() ? std::string() : inv.args.front();
  m.args = inv.args;
  m.master_seed = seed;
  return m;
}

fs::path sidecar_manifest_path(const fs::path& file) {
  return fs::path(file.string() + ".manifest.json");
}

// Per-item failures are reported in index order once all items ran.
int report_failures(const std::vector<std::optional<std::string>>& failures,
                    const std::vector<std::string>& names, std::ostream& err) {
  int failed = 0;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (failures[i]) {
      err << fmt::format("{}: {}\n", names[i], *failures[i]);
      ++failed;
    }
  }
  return failed;
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  fs::path out;
  std::uint64_t seed = 0;
  bool suite = false;
  int n_per_class = 1;
  int count = 1;
  std::optional<std::string> density, morphology, layering, distribution,
      texture, polarity, size_law;
  int height = 0;
  int width = 0;
  std::uint32_t instances = 0;
  std::optional<double> min_area;
  int threads = 1;
};

struct GenItem {
  std::string stem;
  SceneSpec spec;
};

std::vector<GenItem> plan_gen(const GenOptions& o) {
  std::vector<GenItem> items;
  if (o.suite) {
    const auto specs = sample_scene_suite(o.seed, o.n_per_class);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      items.push_back({fmt::format("s{:04d}_{}_{}_{}", i, to_string(s.density),
                                   to_string(s.morphology), to_string(s.layering)),
                       s});
    }
    return items;
  }
  const DensityClass density = o.density   ? parse_density(*o.density)
                               : o.instances ? density_class_of(o.instances)
                                             : DensityClass::kSparse;
  const Morphology morphology =
      o.morphology ? parse_morphology(*o.morphology) : Morphology::kSphere;
  const Layering layering = o.layering ? parse_layering(*o.layering) : Layering::kTiled;
  for (int i = 0; i < o.count; ++i) {
    const std::uint64_t seed =
        o.count == 1 ? o.seed : counter_hash(o.seed, static_cast<std::uint64_t>(i), 0);
    SceneSpec spec = default_spec(density, morphology, layering, seed, o.height,
                                  o.width, o.instances);
    if (o.distribution) spec.distribution = parse_distribution(*o.distribution);
    if (o.texture) spec.texture = parse_texture(*o.texture);
    if (o.polarity) spec.polarity = parse_polarity(*o.polarity);
    if (o.size_law) spec.size_law = parse_size_law(*o.size_law);
    if (o.min_area) spec.min_area = *o.min_area;
    spec.validate();
    items.push_back({o.count == 1 ? fmt::format("scene_seed{}", o.seed)
                                  : fmt::format("scene_seed{}_{:04d}", o.seed, i),
                     spec});
  }
  return items;
}

int cmd_gen(const GenOptions& o, const Invocation& inv) {
  std::vector<GenItem> items;
  try {
    items = plan_gen(o);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const fs::path images_dir = o.out / "images";
  const fs::path labels_dir = o.out / "labels";
  fs::create_directories(images_dir);
  fs::create_directories(labels_dir);

  std::vector<std::vector<fs::path>> written(items.size());
  std::vector<std::optional<std::string>> failures(items.size());
  parallel_for(items.size(), o.threads, [&](std::size_t i) {
    const GenItem& item = items[i];
    try {
      const Scene scene = generate_scene(item.spec);
      const fs::path image = images_dir / (item.stem + ".png");
      write_png_gray8(image, to_gray8(scene.image));
      const fs::path sidecar = images_dir / (item.stem + ".scene.json");
      write_text_file(sidecar, scene_sidecar_json(item.spec,
                                                  scene_statistics(scene.labels)));
      const fs::path labels = save_label_map(scene.labels, labels_dir, item.stem);
      written[i] = {image, sidecar, labels};
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  std::vector<std::string> names;
  for (const auto& it : items) names.push_back(it.stem);
  const int failed = report_failures(failures, names, inv.err);

  RunManifest manifest = make_manifest(inv, o.seed);
  for (const auto& files : written) {
    for (const auto& d : digest_all(files, o.out)) manifest.outputs.push_back(d);
  }
  write_manifest(manifest, o.out / "manifest.json");
  inv.err << fmt::format("gen: {} of {} scenes written to {}\n",
                         items.size() - failed, items.size(), o.out.string());
  return failed ? kExitData : kExitOk;
}

// ---------------------------------------------------------------- flows

struct FlowsOptions {
  fs::path labels;
  fs::path out;
  int threads = 1;
};

int cmd_flows(const FlowsOptions& o, const Invocation& inv) {
  const auto files = list_dir(o.labels, is_label_map_file);
  index_by_stem(files);
  fs::create_directories(o.out);
  std::vector<std::optional<fs::path>> written(files.size());
  std::vector<std::optional<std::string>> failures(files.size());
  parallel_for(files.size(), o.threads, [&](std::size_t i) {
    try {
      const FlowField field = compute_flow_targets(load_label_map(files[i]));
      const fs::path dst = o.out / (files[i].stem().string() + ".uemf");
      write_uemf(dst, field);
      written[i] = dst;
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.string());
  const int failed = report_failures(failures, names, inv.err);

  RunManifest manifest = make_manifest(inv);
  manifest.inputs = digest_all(files, {});
  for (const auto& w : written) {
    if (w) manifest.outputs.push_back(digest_file(*w, o.out));
  }
  write_manifest(manifest, o.out / "manifest.json");
  inv.err << fmt::format("flows: {} of {} fields written to {}\n",
                         files.size() - failed, files.size(), o.out.string());
  return failed ? kExitData : kExitOk;
}

// ---------------------------------------------------------------- decode

void add_decode_flags(CLI::App* sub, DecodeParams& p) {
  sub->add_option("--niter", p.n_iter, "Euler steps per pixel")
      ->capture_default_str();
  sub->add_option("--step", p.step_size, "Euler step size")->capture_default_str();
  sub->add_option("--prob-thresh", p.prob_threshold,
                  "foreground threshold, in (0, 1)")
      ->capture_default_str();
  sub->add_option("--sink-bin", p.sink_bin, "sink clustering cell size (px)")
      ->capture_default_str();
  sub->add_option("--min-size", p.min_size, "smallest kept instance (px)")
      ->capture_default_str();
}

void validate_params(const DecodeParams& p) {
  try {
    p.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct DecodeOptions {
  fs::path fields;
  fs::path out;
  DecodeParams params;
  int threads = 1;
};

int cmd_decode(const DecodeOptions& o, const Invocation& inv) {
  validate_params(o.params);
  const auto files = list_dir(o.fields, is_uemf_file);
  fs::create_directories(o.out);
  std::vector<std::optional<fs::path>> written(files.size());
  std::vector<std::optional<std::string>> failures(files.size());
  parallel_for(files.size(), o.threads, [&](std::size_t i) {
    try {
      const LabelMap map = follow_flows(read_uemf(files[i]), o.params);
      written[i] = save_label_map(map, o.out, files[i].stem().string());
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.string());
  const int failed = report_failures(failures, names, inv.err);

  RunManifest manifest = make_manifest(inv);
  manifest.inputs = digest_all(files, {});
  for (const auto& w : written) {
    if (w) manifest.outputs.push_back(digest_file(*w, o.out));
  }
  write_manifest(manifest, o.out / "manifest.json");
  inv.err << fmt::format("decode: {} of {} label maps written to {}\n",
                         files.size() - failed, files.size(), o.out.string());
  return failed ? kExitData : kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  fs::path gt;
  fs::path pred;
  double iou = 0.5;
  std::optional<fs::path> report;
  int threads = 1;
};

std::map<std::string, LabelMap> load_maps(const std::map<std::string, fs::path>& files,
                                          int threads) {
  std::vector<std::pair<std::string, fs::path>> flat(files.begin(), files.end());
  std::vector<LabelMap> maps(flat.size());
  parallel_for(flat.size(), threads,
               [&](std::size_t i) { maps[i] = load_label_map(flat[i].second); });
  std::map<std::string, LabelMap> out;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    out.emplace(flat[i].first, std::move(maps[i]));
  }
  return out;
}

int cmd_eval(const EvalOptions& o, const Invocation& inv) {
  if (!(o.iou > 0.0 && o.iou < 1.0)) {
    throw UsageError(fmt::format("--iou must lie in (0, 1), got {}", o.iou));
  }
  const auto gt_files = index_by_stem(list_dir(o.gt, is_label_map_file));
  const auto pred_files = index_by_stem(list_dir(o.pred, is_label_map_file));
  const MetricsReport report = evaluate_dataset(
      load_maps(gt_files, o.threads), load_maps(pred_files, o.threads), o.iou,
      o.threads);
  const std::string json = report_to_json(report);
  if (!o.report) {
    inv.out << json;
    return kExitOk;
  }
  if (o.report->has_parent_path()) fs::create_directories(o.report->parent_path());
  write_text_file(*o.report, json);
  RunManifest manifest = make_manifest(inv);
  for (const auto* files : {&gt_files, &pred_files}) {
    for (const auto& [stem, path] : *files) manifest.inputs.push_back(digest_file(path, {}));
  }
  manifest.outputs.push_back(digest_file(*o.report, o.report->parent_path()));
  write_manifest(manifest, sidecar_manifest_path(*o.report));
  return kExitOk;
}

// ---------------------------------------------------------------- render

struct RenderOptions {
  fs::path input;
  fs::path out;
};

int cmd_render(const RenderOptions& o, const Invocation& inv) {
  if (!fs::exists(o.input)) throw Error(ErrorCode::kFileNotFound, o.input.string());
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  if (is_uemf_file(o.input)) {
    write_png_rgb8(o.out, render_field(read_uemf(o.input)));
  } else {
    write_png_rgb8(o.out, render_labels(load_label_map(o.input)));
  }
  RunManifest manifest = make_manifest(inv);
  manifest.inputs.push_back(digest_file(o.input, {}));
  manifest.outputs.push_back(digest_file(o.out, o.out.parent_path()));
  write_manifest(manifest, sidecar_manifest_path(o.out));
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  fs::path corpus;
  std::optional<fs::path> report;
  DecodeParams params;
  int threads = 1;
};

// Linux lets a process reset its high-water mark; elsewhere the lifetime
// peak from getrusage is reported instead.
bool reset_peak_rss() {
  std::ofstream f("/proc/self/clear_refs");
  if (!f) return false;
  f << "5";
  f.flush();
  return static_cast<bool>(f);
}

double peak_rss_mb() {
  std::ifstream f("/proc/self/status");
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      return std::stod(line.substr(6)) / 1024.0;
    }
  }
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<double>(usage.ru_maxrss) / 1024.0;
}

struct StageStats {
  double seconds = 0.0;
  double peak_rss_mb = 0.0;
};

struct ClassStats {
  std::uint64_t n_images = 0;
  std::uint64_t n_instances = 0;
  double sum_ap = 0.0;
  StageStats targets, decode, eval;
};

template <typename F>
auto timed(StageStats& stats, F&& f) {
  reset_peak_rss();
  const auto t0 = Clock::now();
  auto result = f();
  stats.seconds += std::chrono::duration<double>(Clock::now() - t0).count();
  stats.peak_rss_mb = std::max(stats.peak_rss_mb, peak_rss_mb());
  return result;
}

nlohmann::ordered_json stage_json(const StageStats& s) {
  return {{"wall_s", s.seconds}, {"peak_rss_mb", s.peak_rss_mb}};
}

int cmd_bench(const BenchOptions& o, const Invocation& inv) {
  validate_params(o.params);
  const fs::path labels_dir =
      fs::is_directory(o.corpus / "labels") ? o.corpus / "labels" : o.corpus;
  const auto files = list_dir(labels_dir, is_label_map_file);

  std::map<DensityClass, ClassStats> classes;
  for (const DensityClass d : kAllDensities) classes[d];
  std::string digest_stream;
  for (const auto& file : files) {
    const LabelMap gt = load_label_map(file);
    const std::uint64_t n_gt = instance_areas(gt).size();
    ClassStats& cs = classes[density_class_of(n_gt)];
    const FlowField field =
        timed(cs.targets, [&] { return compute_flow_targets(gt, o.threads); });
    const LabelMap pred =
        timed(cs.decode, [&] { return follow_flows(field, o.params, o.threads); });
    const ImageScore score = timed(cs.eval, [&] {
      return score_image(file.stem().string(), gt, pred, 0.5);
    });
    ++cs.n_images;
    cs.n_instances += n_gt;
    cs.sum_ap += score.ap;
    const auto cells = pred.data();
    digest_stream += file.stem().string() + ":" +
                     sha256_hex(cells.data(), cells.size_bytes()) + "\n";
  }

  nlohmann::ordered_json j;
  j["threads"] = o.threads;
  j["n_images"] = files.size();
  j["classes"] = nlohmann::ordered_json::object();
  for (const auto& [density, cs] : classes) {
    j["classes"][std::string(to_string(density))] = {
        {"n_images", cs.n_images},
        {"n_instances", cs.n_instances},
        {"mean_ap", cs.n_images ? cs.sum_ap / cs.n_images : 0.0},
        {"targets", stage_json(cs.targets)},
        {"decode", stage_json(cs.decode)},
        {"eval", stage_json(cs.eval)}};
  }
  j["decode_digest"] =
      files.empty() ? std::string()
                    : sha256_hex(digest_stream.data(), digest_stream.size());
  const std::string json = j.dump(2) + "\n";
  if (!o.report) {
    inv.out << json;
    return kExitOk;
  }
  if (o.report->has_parent_path()) fs::create_directories(o.report->parent_path());
  write_text_file(*o.report, json);
  RunManifest manifest = make_manifest(inv);
  manifest.inputs = digest_all(files, {});
  manifest.outputs.push_back(digest_file(*o.report, o.report->parent_path()));
  write_manifest(manifest, sidecar_manifest_path(*o.report));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow-field instance segmentation toolkit for dense EM scenes",
               "densflow"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  const int threads_default = default_threads();

  GenOptions gen;
  gen.threads = threads_default;
  auto* g = app.add_subcommand("gen", "generate synthetic scenes");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--seed", gen.seed, "master seed")->capture_default_str();
  auto* suite = g->add_flag("--suite", gen.suite,
                            "every density x morphology x layering combination");
  g->add_option("--n-per-class", gen.n_per_class, "suite samples per combination")
      ->check(CLI::PositiveNumber)
      ->needs(suite);
  std::vector<CLI::Option*> single = {
      g->add_option("--count", gen.count, "number of scenes")->check(CLI::PositiveNumber),
      g->add_option("--density", gen.density, "sparse | medium | high"),
      g->add_option("--morphology", gen.morphology,
                    "sphere | ellipse | rod | polygon | irregular_blob"),
      g->add_option("--layering", gen.layering, "tiled | multilayer"),
      g->add_option("--distribution", gen.distribution,
                    "random | uniform_grid | clustered"),
      g->add_option("--texture", gen.texture, "smooth | noisy | porous"),
      g->add_option("--polarity", gen.polarity, "bright_on_dark | dark_on_bright"),
      g->add_option("--size-law", gen.size_law,
                    "lognormal:mu,sigma | uniform:a,b | bimodal:mu1,s1,mu2,s2,p"),
      g->add_option("--height", gen.height)->check(CLI::PositiveNumber),
      g->add_option("--width", gen.width)->check(CLI::PositiveNumber),
      g->add_option("--instances", gen.instances, "target instance count")
          ->check(CLI::PositiveNumber),
      g->add_option("--min-area", gen.min_area, "smallest visible area (px)")};
  for (auto* opt : single) suite->excludes(opt);
  g->add_option("--threads", gen.threads)->check(CLI::PositiveNumber);

  FlowsOptions flows;
  flows.threads = threads_default;
  auto* f = app.add_subcommand("flows", "export flow targets for label maps");
  f->add_option("labels", flows.labels, "label map directory")->required();
  f->add_option("--out", flows.out, "output directory")->required();
  f->add_option("--threads", flows.threads)->check(CLI::PositiveNumber);

  DecodeOptions decode;
  decode.threads = threads_default;
  auto* d = app.add_subcommand("decode", "decode field maps into label maps");
  d->add_option("fields", decode.fields, "UEMF directory")->required();
  d->add_option("--out", decode.out, "output directory")->required();
  add_decode_flags(d, decode.params);
  d->add_option("--threads", decode.threads)->check(CLI::PositiveNumber);

  EvalOptions eval;
  eval.threads = threads_default;
  auto* e = app.add_subcommand("eval", "score predictions against ground truth");
  e->add_option("gt", eval.gt, "ground-truth label maps")->required();
  e->add_option("pred", eval.pred, "predicted label maps")->required();
  e->add_option("--iou", eval.iou, "IoU threshold")->capture_default_str();
  e->add_option("--report", eval.report, "write JSON here instead of stdout");
  e->add_option("--threads", eval.threads)->check(CLI::PositiveNumber);

  RenderOptions render;
  auto* r = app.add_subcommand("render", "visualize a label map or field file");
  r->add_option("input", render.input, "label map (.png/.json) or .uemf")->required();
  r->add_option("--out", render.out, "output PNG")->required();

  BenchOptions bench;
  bench.threads = threads_default;
  auto* b = app.add_subcommand("bench", "time targets, decode and eval");
  b->add_option("corpus", bench.corpus, "corpus or label map directory")->required();
  b->add_option("--threads", bench.threads)->check(CLI::PositiveNumber);
  b->add_option("--report", bench.report, "write JSON here instead of stdout");
  add_decode_flags(b, bench.params);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Invocation inv{args, out, err};
  try {
    if (*g) return cmd_gen(gen, inv);
    if (*f) return cmd_flows(flows, inv);
    if (*d) return cmd_decode(decode, inv);
    if (*e) return cmd_eval(eval, inv);
    if (*r) return cmd_render(render, inv);
    if (*b) return cmd_bench(bench, inv);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace densflow::cli
