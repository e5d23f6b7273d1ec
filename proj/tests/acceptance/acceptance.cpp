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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <fmt/core.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "densflow/cli.hpp"
#include "densflow/flow.hpp"
#include "densflow/io.hpp"
#include "densflow/metrics.hpp"
#include "densflow/synthgen.hpp"
#include "densflow/uemf.hpp"
#include "json.hpp"

using namespace densflow;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kSparseMinMap = 0.95;
constexpr double kSparseMinMpq = 0.90;
constexpr double kSparseMaxSeconds = 60.0;
constexpr double kSparseMinArea = 25.0;
constexpr double kDenseMinMap = 0.90;
constexpr double kDenseMaxPeakMb = 2048.0;
constexpr double kDenseMaxDecodeSeconds = 30.0;
constexpr double kMetricOracleTol = 1e-9;
constexpr double kPqProductTol = 1e-12;
constexpr double kUnitNormTol = 1e-5;
constexpr int kSparseScenes = 20;
constexpr int kDenseScenes = 10;
constexpr int kMetricImages = 200;
constexpr int kInvariantMaps = 50;
constexpr int kRobustSeeds = 20;
constexpr int kRoundTrips = 100;
constexpr std::size_t kZeroUemfBytes = 68;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) {
    throw std::runtime_error(fmt::format("{} exited {}: {}", args.front(), code, err.str()));
  }
  return code;
}

void reset_peak_rss() {
  std::ofstream("/proc/self/clear_refs") << "5";
}

double peak_rss_mb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) return std::stod(line.substr(6)) / 1024.0;
  }
  return -1.0;
}

fs::path work_dir(const std::string& name) { return oracle::fresh_dir("accept_" + name); }

nlohmann::json read_json(const fs::path& p) {
  return nlohmann::json::parse(read_text_file(p));
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
    }
  }
  return files;
}

// --- 1 -------------------------------------------------------------------

Outcome sparse_round_trip() {
  const fs::path dir = work_dir("sparse");
  const fs::path corpus = dir / "corpus";
  const auto t0 = Clock::now();
  const int per_morphology = kSparseScenes / int(kAllMorphologies.size());
  for (std::size_t k = 0; k < kAllMorphologies.size(); ++k) {
    run_cli({"gen", "--out", corpus.string(), "--density", "sparse", "--layering",
             "tiled", "--morphology", std::string(to_string(kAllMorphologies[k])),
             "--min-area", fmt::format("{}", kSparseMinArea), "--count",
             std::to_string(per_morphology), "--seed", std::to_string(1000 + k)});
  }
  run_cli({"flows", (corpus / "labels").string(), "--out", (dir / "fields").string()});
  run_cli({"decode", (dir / "fields").string(), "--out", (dir / "pred").string()});
  run_cli({"eval", (corpus / "labels").string(), (dir / "pred").string(), "--iou",
           "0.5", "--report", (dir / "report.json").string()});
  const double elapsed = seconds_since(t0);

  int n_scenes = 0;
  bool shapes_ok = true;
  for (const auto& e : fs::directory_iterator(corpus / "labels")) {
    ++n_scenes;
    const auto areas = instance_areas(load_label_map(e.path()));
    shapes_ok &= !areas.empty() && areas.size() < 100;
    for (const auto& [id, a] : areas) shapes_ok &= double(a) >= kSparseMinArea;
  }
  const auto report = read_json(dir / "report.json");
  const double map = report["aggregate"]["mAP"];
  const double mpq = report["aggregate"]["mPQ"];
  fs::remove_all(dir);
  Outcome o;
  o.pass = n_scenes == kSparseScenes && shapes_ok && map >= kSparseMinMap &&
           mpq >= kSparseMinMpq && elapsed < kSparseMaxSeconds;
  o.detail = fmt::format(
      "{} scenes, shapes in range: {}, mAP {:.4f} (>= {}), mPQ {:.4f} (>= {}), "
      "{:.1f} s (< {})",
      n_scenes, shapes_ok, map, kSparseMinMap, mpq, kSparseMinMpq, elapsed,
      kSparseMaxSeconds);
  return o;
}

// --- 2 -------------------------------------------------------------------

Outcome dense_round_trip(std::vector<ImageScore>& scores) {
  reset_peak_rss();
  double sum_ap = 0.0, worst_decode = 0.0;
  std::uint64_t min_n = ~0ull, max_n = 0;
  bool dims_ok = true;
  const int threads = cli::default_threads();
  for (int i = 0; i < kDenseScenes; ++i) {
    const SceneSpec spec =
        default_spec(DensityClass::kHigh, kAllMorphologies[i % kAllMorphologies.size()],
                     i % 2 ? Layering::kMultilayer : Layering::kTiled, 5000 + i);
    dims_ok &= spec.height == 1024 && spec.width == 1024;
    const Scene scene = generate_scene(spec);
    const FlowField field = compute_flow_targets(scene.labels, threads);
    const auto t0 = Clock::now();
    const LabelMap pred = follow_flows(field, DecodeParams{}, 1);
    worst_decode = std::max(worst_decode, seconds_since(t0));
    const ImageScore s = score_image(std::to_string(i), scene.labels, pred, 0.5);
    min_n = std::min(min_n, s.n_gt);
    max_n = std::max(max_n, s.n_gt);
    sum_ap += s.ap;
    scores.push_back(s);
  }
  const double map = sum_ap / kDenseScenes;
  const double peak = peak_rss_mb();
  Outcome o;
  o.pass = dims_ok && min_n >= 500 && max_n <= 2500 && map >= kDenseMinMap &&
           peak > 0.0 && peak < kDenseMaxPeakMb && worst_decode < kDenseMaxDecodeSeconds;
  o.detail = fmt::format(
      "{} scenes at 1024x1024: {}, {}-{} instances, mAP {:.4f} (>= {}), "
      "peak {:.0f} MB (< {:.0f}), slowest decode {:.2f} s (< {})",
      kDenseScenes, dims_ok, min_n, max_n, map, kDenseMinMap, peak, kDenseMaxPeakMb,
      worst_decode, kDenseMaxDecodeSeconds);
  return o;
}

// --- 3 -------------------------------------------------------------------

// Ground truth plus a prediction built from a shifted, partly re-drawn copy.
std::pair<LabelMap, LabelMap> metric_pair(std::uint64_t seed) {
  std::mt19937_64 gen(0xacce97ull + seed);
  const int n_gt = int(gen() % 9);
  const int n_extra = int(gen() % 3);
  LabelMap gt = relabel_sequential(oracle::random_label_map(24, 24, n_gt, gen()));
  const LabelMap extra = oracle::random_label_map(24, 24, n_extra, gen(), 100);
  const int dr = int(gen() % 3) - 1, dc = int(gen() % 3) - 1;
  LabelMap pred(24, 24);
  for (int r = 0; r < 24; ++r) {
    for (int c = 0; c < 24; ++c) {
      if (gt.contains(r - dr, c - dc) && gen() % 10 != 0) pred(r, c) = gt(r - dr, c - dc);
      if (extra(r, c) && gen() % 2) pred(r, c) = extra(r, c);
    }
  }
  pred = relabel_sequential(pred);
  // Keep at most 8 predictions.
  for (auto& v : pred.data()) {
    if (v > 8) v = 0;
  }
  return {gt, pred};
}

Outcome metric_equivalence(std::vector<ImageScore>& scores) {
  double worst = 0.0;
  int compared = 0, partial = 0;
  bool sizes_ok = true;
  for (int i = 0; i < kMetricImages; ++i) {
    const auto [gt, pred] = metric_pair(std::uint64_t(i));
    for (double t : {0.5, 0.75}) {
      const ImageScore s = score_image(std::to_string(i), gt, pred, t);
      const auto want = oracle::exhaustive_match(gt, pred, t);
      sizes_ok &= want.n_gt <= 8 && want.n_pred <= 8;
      worst = std::max({worst, std::abs(s.ap - oracle::exhaustive_ap(want)),
                        std::abs(s.pq - oracle::exhaustive_pq(want))});
      ++compared;
      partial += s.ap > 0.0 && s.ap < 1.0;
      scores.push_back(s);
    }
  }
  Outcome o;
  o.pass = sizes_ok && worst <= kMetricOracleTol;
  o.detail = fmt::format(
      "{} image/threshold pairs ({} with fractional AP), <= 8 instances: {}, "
      "max |diff| {:.3g} (<= {})",
      compared, partial, sizes_ok, worst, kMetricOracleTol);
  return o;
}

// --- 4 -------------------------------------------------------------------

LabelMap grid_of_squares(int n) {
  LabelMap m(120, 120);
  for (int k = 0; k < n; ++k) {
    const int r0 = (k / 11) * 10, c0 = (k % 11) * 10;
    for (int r = r0; r < r0 + 6; ++r) {
      for (int c = c0; c < c0 + 6; ++c) m(r, c) = LabelId(k + 1);
    }
  }
  return m;
}

Outcome protocol_identities(const std::vector<ImageScore>& scores) {
  const fs::path dir = work_dir("identity");
  run_cli({"gen", "--suite", "--n-per-class", "1", "--seed", "77", "--out",
           (dir / "corpus").string()});
  const auto labels = (dir / "corpus/labels").string();
  run_cli({"eval", labels, labels, "--report", (dir / "self.json").string()});
  const auto self = read_json(dir / "self.json")["aggregate"];
  const bool cli_exact = self["mAP"].get<double>() == 1.0 && self["mPQ"].get<double>() == 1.0 &&
                         self["sparse"]["mAP"].get<double>() == 1.0 &&
                         self["dense"]["mAP"].get<double>() == 1.0;

  std::map<std::string, LabelMap> maps;
  for (const auto& e : fs::directory_iterator(labels)) {
    maps.emplace(e.path().stem().string(), load_label_map(e.path()));
  }
  const MetricsReport lib = evaluate_dataset(maps, maps, 0.5);
  const bool lib_exact = lib.overall.mean_ap == 1.0 && lib.overall.mean_pq == 1.0;

  double worst_pq = 0.0;
  for (const auto* set : {&scores, &lib.per_image}) {
    for (const auto& s : *set) worst_pq = std::max(worst_pq, std::abs(s.pq - s.sq * s.rq));
  }

  const std::map<std::string, LabelMap> boundary = {
      {"n099", grid_of_squares(99)}, {"n100", grid_of_squares(100)},
      {"n101", grid_of_squares(101)}};
  const MetricsReport split = evaluate_dataset(boundary, boundary, 0.5);
  const bool split_ok = split.per_image.size() == 3 && split.per_image[0].n_gt == 99 &&
                        split.per_image[1].n_gt == 100 && split.per_image[2].n_gt == 101 &&
                        split.sparse.n == 1 && split.dense.n == 2 &&
                        split_of(99) == Split::kSparse && split_of(100) == Split::kDense &&
                        split_of(101) == Split::kDense;
  fs::remove_all(dir);

  Outcome o;
  o.pass = cli_exact && lib_exact && worst_pq <= kPqProductTol && split_ok;
  o.detail = fmt::format(
      "eval(gt, gt) exact 1.0 via cli: {}, via library: {}; max |PQ - SQ*RQ| {:.3g} over "
      "{} images (<= {}); split 99/100/101 -> sparse {} dense {}: {}",
      cli_exact, lib_exact, worst_pq, scores.size() + lib.per_image.size(), kPqProductTol,
      split.sparse.n, split.dense.n, split_ok);
  return o;
}

// --- 5 -------------------------------------------------------------------

Outcome target_invariants() {
  std::uint64_t checked = 0, violations = 0;
  for (int k = 0; k < kInvariantMaps; ++k) {
    const LabelMap m = oracle::random_label_map(40 + k % 17, 36 + k % 13, 4 + k % 12,
                                                9000 + std::uint64_t(k));
    const FlowField f = compute_flow_targets(m, 1 + k % 4);
    std::map<LabelId, Pixel> centers;
    for (const auto& [id, px] : instance_pixels(m)) centers[id] = instance_center(px);
    for (int r = 0; r < m.height(); ++r) {
      for (int c = 0; c < m.width(); ++c) {
        const std::size_t i = m.index(r, c);
        const double norm = std::hypot(double(f.flow_y[i]), double(f.flow_x[i]));
        bool ok;
        if (m[i] == 0) {
          ok = f.prob[i] == 0.0f && f.flow_y[i] == 0.0f && f.flow_x[i] == 0.0f;
        } else if (centers[m[i]] == Pixel{r, c}) {
          ok = f.prob[i] == 1.0f && f.flow_y[i] == 0.0f && f.flow_x[i] == 0.0f;
        } else {
          ok = f.prob[i] == 1.0f && std::abs(norm - 1.0) <= kUnitNormTol;
        }
        ++checked;
        violations += !ok;
      }
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = fmt::format("{} maps, {} pixels, {} violations (unit norm tol {})",
                         kInvariantMaps, checked, violations, kUnitNormTol);
  return o;
}

// --- 6 -------------------------------------------------------------------

Outcome robustness() {
  const std::vector<double> sigmas = {0.0, 0.05, 0.1, 0.2, 0.4};
  std::vector<double> mean_ap(sigmas.size(), 0.0);
  for (int k = 0; k < kRobustSeeds; ++k) {
    const std::uint64_t seed = 7000 + std::uint64_t(k);
    const SceneSpec spec = default_spec(
        DensityClass::kSparse, kAllMorphologies[k % kAllMorphologies.size()],
        Layering::kTiled, seed, 256, 256, 40);
    const Scene scene = generate_scene(spec);
    const FlowField clean = compute_flow_targets(scene.labels);
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
      const LabelMap pred = follow_flows(perturb_field(clean, sigmas[j], seed));
      mean_ap[j] += score_image("s", scene.labels, pred, 0.5).ap / kRobustSeeds;
    }
  }
  bool monotone = true;
  for (std::size_t j = 1; j < sigmas.size(); ++j) monotone &= mean_ap[j] <= mean_ap[j - 1];
  std::string curve;
  for (std::size_t j = 0; j < sigmas.size(); ++j) {
    curve += fmt::format("{}{}:{:.4f}", j ? " " : "", sigmas[j], mean_ap[j]);
  }
  return {monotone, fmt::format("mean AP by sigma over {} seeds: {}", kRobustSeeds, curve)};
}

// --- 7 -------------------------------------------------------------------

bool same_bits(const Grid<float>& a, const Grid<float>& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

Outcome format_round_trips() {
  int rle_ok = 0, uemf_ok = 0;
  for (int k = 0; k < kRoundTrips; ++k) {
    const int h = 8 + k % 41, w = 5 + (k * 7) % 53;
    const LabelMap m = oracle::random_label_map(h, w, 1 + k % 20, 300 + std::uint64_t(k),
                                                1 + LabelId(k) * 977);
    const bool direct = decode_rle(encode_rle(m), h, w) == m;
    const bool via_json = label_map_from_rle_json(rle_to_json(encode_rle(m), h, w)) == m;
    rle_ok += direct && via_json;

    std::mt19937_64 gen(600 + std::uint64_t(k));
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    FlowField f(h, w);
    for (std::size_t i = 0; i < f.prob.size(); ++i) {
      f.flow_y[i] = u(gen);
      f.flow_x[i] = u(gen);
      f.prob[i] = std::abs(u(gen)) * 0.5f;
    }
    const FlowField back = decode_uemf(encode_uemf(f));
    uemf_ok += same_bits(back.flow_y, f.flow_y) && same_bits(back.flow_x, f.flow_x) &&
               same_bits(back.prob, f.prob);
  }
  const fs::path dir = work_dir("uemf");
  write_uemf(dir / "zero.uemf", FlowField(2, 2));
  const auto bytes = read_file_bytes(dir / "zero.uemf");
  fs::remove_all(dir);
  const bool zero_ok = bytes.size() == kZeroUemfBytes &&
                       std::string(bytes.begin(), bytes.begin() + 4) == "UEMF";
  Outcome o;
  o.pass = rle_ok == kRoundTrips && uemf_ok == kRoundTrips && zero_ok;
  o.detail = fmt::format("RLE {}/{}, UEMF {}/{}, 2x2 zero file {} bytes (== {})", rle_ok,
                         kRoundTrips, uemf_ok, kRoundTrips, bytes.size(), kZeroUemfBytes);
  return o;
}

// --- 8 -------------------------------------------------------------------

// Runs the full pipeline into `root` with the worker count taken from the
// environment, so the recorded arguments are identical across runs.
std::map<std::string, std::vector<std::uint8_t>> pipeline_snapshot(const fs::path& root,
                                                                   const char* threads) {
  ::setenv("DENSFLOW_THREADS", threads, 1);
  fs::remove_all(root);
  const auto s = [&](const char* sub) { return (root / sub).string(); };
  run_cli({"gen", "--suite", "--n-per-class", "1", "--seed", "31", "--out", s("corpus")});
  run_cli({"flows", s("corpus/labels"), "--out", s("fields")});
  run_cli({"decode", s("fields"), "--out", s("pred")});
  run_cli({"eval", s("corpus/labels"), s("pred"), "--report", s("reports/eval.json")});
  run_cli({"render", s("pred") + "/s0000_sparse_sphere_tiled.png", "--out",
           s("reports/render.png")});
  ::unsetenv("DENSFLOW_THREADS");
  return snapshot(root);
}

Outcome determinism() {
  const fs::path root = work_dir("determinism") / "run";
  const auto first = pipeline_snapshot(root, "1");
  const auto again = pipeline_snapshot(root, "1");
  const auto four = pipeline_snapshot(root, "4");
  fs::remove_all(root.parent_path());
  std::size_t differing = 0;
  for (const auto* other : {&again, &four}) {
    for (const auto& [path, bytes] : first) {
      const auto it = other->find(path);
      differing += it == other->end() || it->second != bytes;
    }
    differing += other->size() != first.size();
  }
  Outcome o;
  o.pass = differing == 0 && !first.empty();
  o.detail = fmt::format(
      "{} files per run (corpus, fields, labels, report, render, manifests), "
      "rerun and 4-thread run differ in {} files",
      first.size(), differing);
  return o;
}

}  // namespace

int main() {
  std::vector<ImageScore> scores;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sparse oracle round trip", sparse_round_trip},
      {"dense oracle round trip", [&] { return dense_round_trip(scores); }},
      {"metric oracle equivalence", [&] { return metric_equivalence(scores); }},
      {"protocol identities", [&] { return protocol_identities(scores); }},
      {"target field invariants", target_invariants},
      {"robustness monotonicity", robustness},
      {"format round trips", format_round_trips},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    failed += !o.pass;
    fmt::print("criterion {}: {} {} | {} [{:.1f} s]\n", i + 1, o.pass ? "PASS" : "FAIL",
               criteria[i].first, o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
