#pragma once

// Independent reference implementations used to check the library. They are
// deliberately naive: no presorting, no incremental sums.

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "povml/learners.hpp"

namespace povml::oracle {

struct Instance {
  std::size_t n = 0, p = 0;
  std::vector<double> x;  // row-major
  std::vector<int> y;
};

/// Small dataset with heavy value ties; both classes present.
inline Instance random_instance(std::mt19937_64& rng, std::size_t max_rows = 12, std::size_t max_features = 3) {
  Instance d;
  std::uniform_int_distribution<std::size_t> rows(4, max_rows), feats(1, max_features);
  std::uniform_int_distribution<int> val(0, 5), bit(0, 1);
  d.n = rows(rng);
  d.p = feats(rng);
  for (std::size_t i = 0; i < d.n * d.p; ++i) d.x.push_back(static_cast<double>(val(rng)) * 0.5);
  for (std::size_t i = 0; i < d.n; ++i) d.y.push_back(bit(rng));
  d.y[0] = 0;
  d.y[1] = 1;
  return d;
}

inline FeatureMatrix to_matrix(const Instance& d) {
  FeatureMatrix m;
  for (std::size_t j = 0; j < d.p; ++j) m.columns.push_back({"f" + std::to_string(j), "", Family::Survey, Kind::Numeric, {}});
  for (std::size_t i = 0; i < d.n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "r%03zu", i);
    m.row_ids.push_back(id);
  }
  m.values = d.x;
  m.missing.assign(d.x.size(), 0);
  return m;
}

struct SplitChoice {
  std::size_t feature;
  double threshold;
};

/// Best split by enumerating every (feature, midpoint) pair and recounting the
/// labels on each side from scratch.
inline std::optional<SplitChoice> exhaustive_split(const Instance& d, const std::vector<std::size_t>& rows,
                                                   Criterion c, std::size_t min_leaf) {
  auto labels_of = [&](auto pred) {
    std::vector<int> out;
    for (auto r : rows)
      if (pred(r)) out.push_back(d.y[r]);
    return out;
  };
  std::vector<int> all = labels_of([](auto) { return true; });
  double parent = static_cast<double>(all.size()) * impurity(all, c);
  std::optional<SplitChoice> best;
  double best_gain = 0;
  for (std::size_t f = 0; f < d.p; ++f) {
    std::set<double> values;
    for (auto r : rows) values.insert(d.x[r * d.p + f]);
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      double t = v[i] + (v[i + 1] - v[i]) / 2;
      auto left = labels_of([&](auto r) { return d.x[r * d.p + f] <= t; });
      auto right = labels_of([&](auto r) { return d.x[r * d.p + f] > t; });
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      double gain = parent - static_cast<double>(left.size()) * impurity(left, c) -
                    static_cast<double>(right.size()) * impurity(right, c);
      if (gain > best_gain + kGainTolerance) {
        best_gain = gain;
        best = SplitChoice{f, t};
      }
    }
  }
  return best;
}

/// Recursively grown reference tree in pre-order, matching the library's node layout.
inline void exhaustive_tree(const Instance& d, const std::vector<std::size_t>& rows, Criterion c, std::size_t min_leaf,
                            std::vector<TreeNode>& out) {
  double pos = 0;
  for (auto r : rows) pos += d.y[r];
  double n = static_cast<double>(rows.size());
  std::size_t id = out.size();
  out.push_back({-1, 0, -1, -1, pos / n, n});
  if (pos == 0 || pos == n || rows.size() < 2 * min_leaf) return;
  auto split = exhaustive_split(d, rows, c, min_leaf);
  if (!split) return;
  std::vector<std::size_t> left, right;
  for (auto r : rows) (d.x[r * d.p + split->feature] <= split->threshold ? left : right).push_back(r);
  out[id].feature = static_cast<int>(split->feature);
  out[id].threshold = split->threshold;
  out[id].left = static_cast<int>(out.size());
  exhaustive_tree(d, left, c, min_leaf, out);
  out[id].right = static_cast<int>(out.size());
  exhaustive_tree(d, right, c, min_leaf, out);
}

inline Tree exhaustive_tree(const Instance& d, Criterion c, std::size_t min_leaf) {
  std::vector<std::size_t> rows(d.n);
  for (std::size_t i = 0; i < d.n; ++i) rows[i] = i;
  Tree t;
  exhaustive_tree(d, rows, c, min_leaf, t.nodes);
  return t;
}

/// PR curve point by direct recount at one threshold.
struct BrutePoint {
  double proportion_flagged;
  std::optional<double> precision;
  double recall;
};

inline BrutePoint brute_pr_point(const std::vector<double>& scores, const std::vector<int>& labels, double t) {
  std::size_t flagged = 0, tp = 0, pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool f = scores[i] >= t;
    flagged += f;
    tp += f && labels[i];
    pos += labels[i] != 0;
  }
  BrutePoint b;
  b.proportion_flagged = static_cast<double>(flagged) / static_cast<double>(scores.size());
  if (flagged) b.precision = static_cast<double>(tp) / static_cast<double>(flagged);
  b.recall = static_cast<double>(tp) / static_cast<double>(pos);
  return b;
}

}  // namespace povml::oracle
