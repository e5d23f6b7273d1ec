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

#include "densflow/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "densflow/parallel.hpp"
#include "json.hpp"

namespace densflow {

namespace {

// Minimum-cost assignment of every row to a distinct column (rows <= cols).
// Returns the column chosen for each row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> owner(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (owner[j] != 0) col_of_row[owner[j] - 1] = j - 1;
  }
  return col_of_row;
}

struct DisjointSets {
  std::vector<std::uint32_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

MatchTable match_at_threshold(const IouMatrix& iou, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kThresholdOutOfRange,
                "IoU threshold must lie in (0,1), got " + std::to_string(threshold));
  }
  MatchTable table;
  table.threshold = threshold;
  table.n_gt = iou.n_gt();
  table.n_pred = iou.n_pred();

  std::vector<const IouEntry*> candidates;
  for (const IouEntry& e : iou.entries) {
    if (e.iou >= threshold) candidates.push_back(&e);
  }

  // Candidate graph nodes: gt ids then pred ids, dense-indexed.
  std::unordered_map<LabelId, std::uint32_t> gt_node, pred_node;
  for (const IouEntry* e : candidates) {
    gt_node.try_emplace(e->gt, 0);
    pred_node.try_emplace(e->pred, 0);
  }
  std::vector<LabelId> gt_ids, pred_ids;
  for (const auto& [id, _] : gt_node) gt_ids.push_back(id);
  for (const auto& [id, _] : pred_node) pred_ids.push_back(id);
  std::sort(gt_ids.begin(), gt_ids.end());
  std::sort(pred_ids.begin(), pred_ids.end());
  for (std::uint32_t i = 0; i < gt_ids.size(); ++i) gt_node[gt_ids[i]] = i;
  const auto n_gt_nodes = static_cast<std::uint32_t>(gt_ids.size());
  for (std::uint32_t i = 0; i < pred_ids.size(); ++i) {
    pred_node[pred_ids[i]] = n_gt_nodes + i;
  }

  DisjointSets sets(gt_ids.size() + pred_ids.size());
  for (const IouEntry* e : candidates) {
    sets.unite(gt_node[e->gt], pred_node[e->pred]);
  }
  std::map<std::uint32_t, std::vector<const IouEntry*>> components;
  for (const IouEntry* e : candidates) {
    components[sets.find(gt_node[e->gt])].push_back(e);
  }

  for (const auto& [root, edges] : components) {
    if (edges.size() == 1) {
      table.matches.push_back(Match{edges[0]->gt, edges[0]->pred, edges[0]->iou});
      continue;
    }
    std::vector<LabelId> rows, cols;
    for (const IouEntry* e : edges) {
      rows.push_back(e->gt);
      cols.push_back(e->pred);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    const bool transposed = rows.size() > cols.size();
    if (transposed) std::swap(rows, cols);

    // Each match is worth `bonus` plus its IoU; the bonus exceeds any total
    // IoU, so cardinality dominates and total IoU breaks ties.
    const double bonus = static_cast<double>(rows.size()) + 1.0;
    std::vector<std::vector<double>> cost(rows.size(),
                                          std::vector<double>(cols.size(), 0.0));
    const auto pos = [](const std::vector<LabelId>& v, LabelId id) {
      return static_cast<std::size_t>(
          std::lower_bound(v.begin(), v.end(), id) - v.begin());
    };
    for (const IouEntry* e : edges) {
      const std::size_t r = pos(rows, transposed ? e->pred : e->gt);
      const std::size_t c = pos(cols, transposed ? e->gt : e->pred);
      cost[r][c] = -(bonus + e->iou);
    }
    const auto assignment = hungarian(cost);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int c = assignment[r];
      if (c < 0 || cost[r][static_cast<std::size_t>(c)] == 0.0) continue;
      const LabelId g = transposed ? cols[static_cast<std::size_t>(c)] : rows[r];
      const LabelId p = transposed ? rows[r] : cols[static_cast<std::size_t>(c)];
      table.matches.push_back(Match{g, p, *iou.lookup(g, p)});
    }
  }
  std::sort(table.matches.begin(), table.matches.end(),
            [](const Match& a, const Match& b) { return a.gt < b.gt; });
  table.tp = table.matches.size();
  table.fp = table.n_pred - table.tp;
  table.fn = table.n_gt - table.tp;
  return table;
}

double ap_at_threshold(const MatchTable& table) {
  const std::uint64_t denom = table.tp + table.fp + table.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(table.tp) / static_cast<double>(denom);
}

PanopticQuality pq_at_threshold(const MatchTable& table) {
  PanopticQuality q;
  if (!table.matches.empty()) {
    double total = 0.0;
    for (const Match& m : table.matches) total += m.iou;
    q.sq = total / static_cast<double>(table.matches.size());
  }
  const double denom = static_cast<double>(table.tp) +
                       0.5 * static_cast<double>(table.fp) +
                       0.5 * static_cast<double>(table.fn);
  q.rq = denom > 0.0 ? static_cast<double>(table.tp) / denom : 1.0;
  q.pq = q.sq * q.rq;
  return q;
}

Split split_of(std::uint64_t n_gt) {
  return n_gt < kDenseMinInstances ? Split::kSparse : Split::kDense;
}

std::map<std::string, Split> split_sparse_dense(
    const std::map<std::string, std::uint64_t>& counts) {
  std::map<std::string, Split> out;
  for (const auto& [id, n] : counts) out.emplace(id, split_of(n));
  return out;
}

const char* split_name(Split split) {
  return split == Split::kSparse ? "sparse" : "dense";
}

ImageScore score_image(const std::string& id, const LabelMap& gt,
                       const LabelMap& pred, double threshold) {
  const MatchTable table = match_at_threshold(pairwise_iou(gt, pred), threshold);
  const PanopticQuality q = pq_at_threshold(table);
  ImageScore s;
  s.id = id;
  s.n_gt = table.n_gt;
  s.n_pred = table.n_pred;
  s.tp = table.tp;
  s.fp = table.fp;
  s.fn = table.fn;
  s.ap = ap_at_threshold(table);
  s.pq = q.pq;
  s.sq = q.sq;
  s.rq = q.rq;
  return s;
}

MetricsReport aggregate_scores(std::vector<ImageScore> scores, double threshold) {
  std::sort(scores.begin(), scores.end(),
            [](const ImageScore& a, const ImageScore& b) { return a.id < b.id; });
  MetricsReport report;
  report.threshold = threshold;
  const auto add = [](SplitAggregate& agg, const ImageScore& s) {
    agg.mean_ap += s.ap;
    agg.mean_pq += s.pq;
    ++agg.n;
  };
  for (const ImageScore& s : scores) {
    add(report.overall, s);
    add(split_of(s.n_gt) == Split::kSparse ? report.sparse : report.dense, s);
  }
  for (SplitAggregate* agg : {&report.overall, &report.sparse, &report.dense}) {
    if (agg->n > 0) {
      agg->mean_ap /= static_cast<double>(agg->n);
      agg->mean_pq /= static_cast<double>(agg->n);
    }
  }
  report.per_image = std::move(scores);
  return report;
}

MetricsReport evaluate_dataset(const std::map<std::string, LabelMap>& gt_maps,
                               const std::map<std::string, LabelMap>& pred_maps,
                               double threshold, int threads) {
  for (const auto& [id, _] : gt_maps) {
    if (!pred_maps.contains(id)) {
      throw Error(ErrorCode::kMissingPair, "no prediction for image '" + id + "'");
    }
  }
  for (const auto& [id, _] : pred_maps) {
    if (!gt_maps.contains(id)) {
      throw Error(ErrorCode::kMissingPair, "no ground truth for image '" + id + "'");
    }
  }
  std::vector<const std::string*> ids;
  for (const auto& [id, _] : gt_maps) ids.push_back(&id);
  std::vector<ImageScore> scores(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    const std::string& id = *ids[i];
    scores[i] = score_image(id, gt_maps.at(id), pred_maps.at(id), threshold);
  });
  return aggregate_scores(std::move(scores), threshold);
}

std::string report_to_json(const MetricsReport& report) {
  std::string out;
  out += fmt::format("{{\"threshold\":{:.6f},\"images\":[", report.threshold);
  for (std::size_t i = 0; i < report.per_image.size(); ++i) {
    const ImageScore& s = report.per_image[i];
    out += i == 0 ? "\n" : ",\n";
    out += fmt::format(
        "{{\"id\":{},\"n_gt\":{},\"n_pred\":{},\"tp\":{},\"fp\":{},\"fn\":{},"
        "\"ap\":{:.6f},\"pq\":{:.6f},\"sq\":{:.6f},\"rq\":{:.6f}}}",
        nlohmann::json(s.id).dump(), s.n_gt, s.n_pred, s.tp, s.fp, s.fn, s.ap,
        s.pq, s.sq, s.rq);
  }
  const auto split = [](const SplitAggregate& a) {
    return fmt::format("{{\"mAP\":{:.6f},\"mPQ\":{:.6f},\"n\":{}}}", a.mean_ap,
                       a.mean_pq, a.n);
  };
  out += fmt::format(
      "],\n\"aggregate\":{{\"mAP\":{:.6f},\"mPQ\":{:.6f},\"sparse\":{},"
      "\"dense\":{}}}}}\n",
      report.overall.mean_ap, report.overall.mean_pq, split(report.sparse),
      split(report.dense));
  return out;
}

}  // namespace densflow
