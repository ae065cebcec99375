#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>

#include "povml/features.hpp"

namespace povml {

enum class ModelKind { Majority, DecisionTree, RandomForest, Gbm, Knn };
enum class Criterion { Gini, Entropy };

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Majority: return "majority";
    case ModelKind::DecisionTree: return "decision_tree";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::Gbm: return "gbm";
    case ModelKind::Knn: return "knn";
  }
  return "majority";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::Majority, ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Gbm, ModelKind::Knn})
    if (model_kind_name(k) == s) return k;
  return std::nullopt;
}

inline std::string_view criterion_name(Criterion c) { return c == Criterion::Gini ? "gini" : "entropy"; }

/// Learner choice plus hyperparameters. Fields irrelevant to the kind are ignored.
struct ModelSpec {
  ModelKind kind = ModelKind::Majority;
  int trees = 100;
  Criterion criterion = Criterion::Gini;
  int estimators = 100;
  double learning_rate = 0.1;
  /// 0 means unlimited.
  int max_depth = 0;
  int min_leaf = 5;
  int neighbors = 12;
  /// Features tried per split: "sqrt", "log2" or "all".
  std::string feature_subsample = "all";
  std::uint64_t seed = 0;
  /// Optional label overriding the derived id.
  std::string name;

  static ModelSpec majority() { return {}; }
  static ModelSpec decision_tree(Criterion c = Criterion::Gini) {
    ModelSpec s;
    s.kind = ModelKind::DecisionTree;
    s.criterion = c;
    return s;
  }
  static ModelSpec random_forest(int trees, Criterion c = Criterion::Gini) {
    ModelSpec s;
    s.kind = ModelKind::RandomForest;
    s.trees = trees;
    s.criterion = c;
    s.feature_subsample = "sqrt";
    return s;
  }
  static ModelSpec gbm(int estimators) {
    ModelSpec s;
    s.kind = ModelKind::Gbm;
    s.estimators = estimators;
    s.max_depth = 3;
    s.min_leaf = 10;
    return s;
  }
  static ModelSpec knn(int k) {
    ModelSpec s;
    s.kind = ModelKind::Knn;
    s.neighbors = k;
    return s;
  }
  static ModelSpec defaults_for(ModelKind k) {
    switch (k) {
      case ModelKind::Majority: return majority();
      case ModelKind::DecisionTree: return decision_tree();
      case ModelKind::RandomForest: return random_forest(100);
      case ModelKind::Gbm: return gbm(100);
      case ModelKind::Knn: return knn(12);
    }
    return majority();
  }

  std::string id() const {
    if (!name.empty()) return name;
    std::string suffix = criterion == Criterion::Entropy ? "_entropy" : "";
    switch (kind) {
      case ModelKind::Majority: return "majority";
      case ModelKind::DecisionTree: return "tree" + suffix;
      case ModelKind::RandomForest: return "rf" + std::to_string(trees) + suffix;
      case ModelKind::Gbm: return "gbm" + std::to_string(estimators);
      case ModelKind::Knn: return "knn" + std::to_string(neighbors);
    }
    return "model";
  }

  void validate() const {
    if (trees < 1) throw ConfigError("trees must be positive");
    if (estimators < 0) throw ConfigError("estimators must be >= 0");
    if (!(learning_rate > 0 && learning_rate <= 1)) throw ConfigError("learning_rate must lie in (0,1]");
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
    if (min_leaf < 1) throw ConfigError("min_leaf must be positive");
    if (neighbors < 1) throw ConfigError("neighbors must be positive");
    if (feature_subsample != "sqrt" && feature_subsample != "log2" && feature_subsample != "all")
      throw ConfigError("feature_subsample must be sqrt, log2 or all");
  }

  std::size_t features_per_split(std::size_t p) const {
    if (p == 0) return 0;
    double m = static_cast<double>(p);
    if (feature_subsample == "sqrt") m = std::floor(std::sqrt(m));
    else if (feature_subsample == "log2") m = std::floor(std::log2(m));
    return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, p);
  }

  bool operator==(const ModelSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"kind", model_kind_name(s.kind)},
       {"trees", s.trees},
       {"criterion", criterion_name(s.criterion)},
       {"estimators", s.estimators},
       {"learning_rate", s.learning_rate},
       {"max_depth", s.max_depth},
       {"min_leaf", s.min_leaf},
       {"neighbors", s.neighbors},
       {"feature_subsample", s.feature_subsample},
       {"seed", s.seed}};
  if (!s.name.empty()) j["name"] = s.name;
}

/// Missing keys take the defaults of the named kind; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("model spec needs a kind");
  auto kind = parse_model_kind(j.at("kind").get<std::string>());
  if (!kind) throw ConfigError("unknown model kind " + j.at("kind").dump());
  s = ModelSpec::defaults_for(*kind);
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") continue;
      else if (key == "trees") v.get_to(s.trees);
      else if (key == "criterion") {
        auto c = v.get<std::string>();
        if (c != "gini" && c != "entropy") throw ConfigError("criterion must be gini or entropy");
        s.criterion = c == "gini" ? Criterion::Gini : Criterion::Entropy;
      } else if (key == "estimators") v.get_to(s.estimators);
      else if (key == "learning_rate") v.get_to(s.learning_rate);
      else if (key == "max_depth") v.get_to(s.max_depth);
      else if (key == "min_leaf") v.get_to(s.min_leaf);
      else if (key == "neighbors") v.get_to(s.neighbors);
      else if (key == "feature_subsample") v.get_to(s.feature_subsample);
      else if (key == "seed") v.get_to(s.seed);
      else if (key == "name") v.get_to(s.name);
      else throw ConfigError("unknown model spec key " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model spec: ") + e.what());
  }
  s.validate();
}

// ---------------------------------------------------------------------------
// Impurity

namespace detail {

inline double gini_of(double p) { return 2.0 * p * (1.0 - p); }

inline double entropy_of(double p) {
  auto term = [](double q) { return q > 0 ? -q * std::log2(q) : 0.0; };
  return term(p) + term(1.0 - p);
}

inline double impurity_of(double p, Criterion c) { return c == Criterion::Gini ? gini_of(p) : entropy_of(p); }

}  // namespace detail

inline double impurity(std::span<const int> labels, Criterion c) {
  if (labels.empty()) throw DegenerateError("impurity of an empty label set");
  double pos = 0;
  for (int y : labels) pos += y != 0;
  return detail::impurity_of(pos / static_cast<double>(labels.size()), c);
}

// ---------------------------------------------------------------------------
// Trees

struct TreeNode {
  /// -1 for leaves.
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  /// Positive-class fraction for classification, output for regression.
  double value = 0;
  /// Weighted number of training rows reaching the node.
  double count = 0;
  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Rows go left when x[feature] <= threshold.
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    return nodes[i].value;
  }
  bool operator==(const Tree&) const = default;
};

inline constexpr double kGainTolerance = 1e-12;

namespace detail {

/// Row indices sorted by each feature value (ties by row index).
inline std::vector<std::vector<std::uint32_t>> presort(std::span<const double> x, std::size_t n, std::size_t p) {
  std::vector<std::vector<std::uint32_t>> order(p, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < p; ++f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return x[a * p + f] < x[b * p + f]; });
  }
  return order;
}

struct TreeParams {
  bool regression = false;
  Criterion criterion = Criterion::Gini;
  int max_depth = 0;
  double min_leaf = 1;
  std::size_t features_per_split = 0;
};

/// Greedy CART over presorted columns. Nodes own contiguous segments of every
/// per-feature order, kept sorted by stable partitioning after each split.
class TreeBuilder {
 public:
  TreeBuilder(std::span<const double> x, std::size_t p, std::span<const double> target,
              std::span<const double> weight, const std::vector<std::vector<std::uint32_t>>& base_order,
              const TreeParams& params, std::mt19937_64* rng, std::vector<double>* importance)
      : x_(x), p_(p), target_(target), weight_(weight), params_(params), rng_(rng), importance_(importance) {
    order_.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
      order_[f].reserve(base_order[f].size());
      for (auto r : base_order[f])
        if (weight[r] > 0) order_[f].push_back(r);
    }
    go_left_.assign(weight.size(), 0);
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree build() {
    Tree t;
    std::size_t m = p_ ? order_[0].size() : 0;
    if (m == 0) {
      // No columns: one leaf over every weighted row.
      double w = 0, s = 0;
      for (std::size_t r = 0; r < weight_.size(); ++r) w += weight_[r], s += weight_[r] * target_[r];
      t.nodes.push_back({-1, 0, -1, -1, w > 0 ? s / w : 0.0, w});
      return t;
    }
    tree_ = &t;
    grow(0, m, 0);
    return t;
  }

 private:
  double node_score(double w, double s) const {
    // Regression: s^2/w is the SSE reduction relative to zero; classification: weighted impurity.
    return params_.regression ? s * s / w : w * impurity_of(s / w, params_.criterion);
  }

  int grow(std::size_t begin, std::size_t end, int depth) {
    double w = 0, s = 0;
    for (std::size_t i = begin; i < end; ++i) {
      auto r = order_[0][i];
      w += weight_[r];
      s += weight_[r] * target_[r];
    }
    int id = static_cast<int>(tree_->nodes.size());
    tree_->nodes.push_back({-1, 0, -1, -1, s / w, w});
    bool pure = !params_.regression && (s == 0 || s == w);
    if (pure || (params_.max_depth > 0 && depth >= params_.max_depth) || w < 2 * params_.min_leaf) return id;

    std::size_t k = params_.features_per_split ? params_.features_per_split : p_;
    if (k < p_) {
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, p_ - 1);
        std::swap(features_[i], features_[pick(*rng_)]);
      }
      std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(k));
    }

    const double parent = node_score(w, s);
    double best_gain = 0;
    int best_f = -1;
    double best_t = 0;
    for (std::size_t fi = 0; fi < k; ++fi) {
      std::size_t f = k < p_ ? features_[fi] : fi;
      const auto& o = order_[f];
      double wl = 0, sl = 0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        auto r = o[i];
        wl += weight_[r];
        sl += weight_[r] * target_[r];
        double a = x_[r * p_ + f], b = x_[o[i + 1] * p_ + f];
        if (!(a < b)) continue;
        double wr = w - wl;
        if (wl < params_.min_leaf || wr < params_.min_leaf) continue;
        double sr = s - sl;
        double gain = params_.regression ? node_score(wl, sl) + node_score(wr, sr) - parent
                                         : parent - node_score(wl, sl) - node_score(wr, sr);
        if (gain > best_gain + kGainTolerance) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          double t = a + (b - a) / 2;
          best_t = t < b ? t : a;
        }
      }
    }
    if (best_f < 0) return id;

    auto bf = static_cast<std::size_t>(best_f);
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      auto r = order_[0][i];
      go_left_[r] = x_[r * p_ + bf] <= best_t;
      n_left += go_left_[r];
    }
    for (auto& o : order_) {
      scratch_.clear();
      std::size_t out = begin;
      for (std::size_t i = begin; i < end; ++i) {
        if (go_left_[o[i]]) o[out++] = o[i];
        else scratch_.push_back(o[i]);
      }
      std::copy(scratch_.begin(), scratch_.end(), o.begin() + static_cast<std::ptrdiff_t>(out));
    }
    if (importance_) (*importance_)[bf] += best_gain;
    int left = grow(begin, begin + n_left, depth + 1);
    int right = grow(begin + n_left, end, depth + 1);
    auto& node = tree_->nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_t;
    node.left = left;
    node.right = right;
    return id;
  }

  std::span<const double> x_;
  std::size_t p_;
  std::span<const double> target_;
  std::span<const double> weight_;
  TreeParams params_;
  std::mt19937_64* rng_;
  std::vector<double>* importance_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::uint8_t> go_left_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::size_t> features_;
  Tree* tree_ = nullptr;
};

/// Mean logistic loss of raw scores; stable for large |score|.
inline double logistic_loss(std::span<const double> score, std::span<const double> y) {
  long double total = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    double z = y[i] > 0.5 ? -score[i] : score[i];
    total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  }
  return static_cast<double>(total / static_cast<long double>(score.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trained models

struct ImportanceReport {
  /// One entry per column in schema order.
  std::vector<std::pair<std::string, double>> entries;

  /// Entries by decreasing importance, ties by column name.
  std::vector<std::pair<std::string, double>> ranked() const {
    auto out = entries;
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return out;
  }
  double of(const std::string& column) const {
    for (const auto& [n, v] : entries)
      if (n == column) return v;
    throw Error("no column " + column);
  }
};

inline std::string schema_fingerprint(const std::vector<std::string>& columns) {
  Fnv1a h;
  for (const auto& c : columns) h.add(c).add(std::string_view("\x1f"));
  return hex64(h.value());
}

struct TrainedModel {
  ModelSpec spec;
  std::vector<std::string> columns;
  std::string fingerprint;
  double prevalence = 0;
  std::size_t n_train = 0;
  /// Set when labels were single-class; every score equals the prevalence.
  bool constant = false;
  std::vector<std::string> warnings;
  std::vector<Tree> trees;
  double initial_score = 0;
  std::vector<double> importance_raw;
  /// Mean training logistic loss after each boosting stage (index 0 = initial score).
  std::vector<double> training_loss;
  std::vector<double> center, scale;
  std::vector<double> points;
  std::vector<std::uint8_t> labels;

  void check_schema(const FeatureMatrix& x) const {
    if (x.column_names() == columns) return;
    auto names = x.column_names();
    for (std::size_t i = 0; i < std::max(names.size(), columns.size()); ++i) {
      std::string got = i < names.size() ? names[i] : "<none>";
      std::string want = i < columns.size() ? columns[i] : "<none>";
      if (got != want)
        throw SchemaError("schema mismatch at column " + std::to_string(i) + ": expected '" + want + "', got '" + got + "'");
    }
  }

  double predict_row(std::span<const double> x) const {
    if (constant || spec.kind == ModelKind::Majority) return prevalence;
    switch (spec.kind) {
      case ModelKind::DecisionTree: return trees.front().predict(x);
      case ModelKind::RandomForest: {
        double s = 0;
        for (const auto& t : trees) s += t.predict(x);
        return s / static_cast<double>(trees.size());
      }
      case ModelKind::Gbm: {
        double z = initial_score;
        for (const auto& t : trees) z += spec.learning_rate * t.predict(x);
        return sigmoid(z);
      }
      case ModelKind::Knn: return knn_row(x);
      default: return prevalence;
    }
  }

  std::vector<double> predict_proba(const FeatureMatrix& x) const {
    check_schema(x);
    if (x.any_missing()) throw SchemaError("scoring requires a preprocessed matrix without missing values");
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
    return out;
  }

  ImportanceReport importances() const {
    if (spec.kind != ModelKind::DecisionTree && spec.kind != ModelKind::RandomForest && spec.kind != ModelKind::Gbm)
      throw UnsupportedModelError(std::string(model_kind_name(spec.kind)) + " has no feature importances");
    ImportanceReport rep;
    double total = 0;
    for (double v : importance_raw) total += v;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      double v = i < importance_raw.size() ? importance_raw[i] : 0.0;
      rep.entries.emplace_back(columns[i], total > 0 ? v / total : 0.0);
    }
    return rep;
  }

  bool operator==(const TrainedModel&) const = default;

 private:
  double knn_row(std::span<const double> x) const {
    std::size_t p = columns.size(), n = labels.size();
    std::vector<double> z(p);
    for (std::size_t j = 0; j < p; ++j) z[j] = (x[j] - center[j]) / scale[j];
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* q = points.data() + i * p;
      double s = 0;
      for (std::size_t j = 0; j < p; ++j) {
        double t = q[j] - z[j];
        s += t * t;
      }
      d[i] = s;
    }
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(spec.neighbors), n);
    auto sorted = d;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    double kth = sorted[k - 1];
    // Everything tied with the k-th neighbor votes.
    double hits = 0, votes = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (d[i] <= kth) {
        votes += 1;
        hits += labels[i];
      }
    return hits / votes;
  }
};

// ---------------------------------------------------------------------------
// Fitting

/// Fits on rows taken in row-id order, so the result does not depend on the
/// order rows arrive in.
inline TrainedModel fit(const ModelSpec& spec, const FeatureMatrix& x, std::span<const int> y) {
  spec.validate();
  if (x.rows() == 0) throw DegenerateError("cannot fit on an empty matrix");
  if (y.size() != x.rows()) throw AlignmentError("label count differs from matrix rows");
  if (x.any_missing()) throw SchemaError("fit requires a preprocessed matrix without missing values");
  const std::size_t n = x.rows(), p = x.cols();

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](auto a, auto b) { return x.row_ids[a] < x.row_ids[b]; });
  std::vector<double> xs(n * p), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.values.begin() + static_cast<std::ptrdiff_t>(perm[i] * p), p, xs.begin() + static_cast<std::ptrdiff_t>(i * p));
    ys[i] = y[perm[i]] != 0 ? 1.0 : 0.0;
  }

  TrainedModel m;
  m.spec = spec;
  m.columns = x.column_names();
  m.fingerprint = schema_fingerprint(m.columns);
  m.n_train = n;
  double pos = std::accumulate(ys.begin(), ys.end(), 0.0);
  m.prevalence = pos / static_cast<double>(n);
  if (spec.kind == ModelKind::Majority) return m;
  if (pos == 0 || pos == static_cast<double>(n)) {
    m.constant = true;
    m.warnings.push_back("single-class labels; constant model at prevalence " + format_double(m.prevalence));
    return m;
  }

  m.importance_raw.assign(p, 0.0);
  switch (spec.kind) {
    case ModelKind::DecisionTree: {
      auto order = detail::presort(xs, n, p);
      std::vector<double> w(n, 1.0);
      detail::TreeParams params{false, spec.criterion, spec.max_depth, static_cast<double>(spec.min_leaf), p};
      detail::TreeBuilder b(xs, p, ys, w, order, params, nullptr, &m.importance_raw);
      m.trees.push_back(b.build());
      break;
    }
    case ModelKind::RandomForest: {
      auto order = detail::presort(xs, n, p);
      detail::TreeParams params{false, spec.criterion, spec.max_depth, static_cast<double>(spec.min_leaf),
                                spec.features_per_split(p)};
      std::vector<double> w(n);
      for (int t = 0; t < spec.trees; ++t) {
        std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(t)));
        std::fill(w.begin(), w.end(), 0.0);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        for (std::size_t i = 0; i < n; ++i) w[draw(rng)] += 1.0;
        detail::TreeBuilder b(xs, p, ys, w, order, params, &rng, &m.importance_raw);
        m.trees.push_back(b.build());
      }
      break;
    }
    case ModelKind::Gbm: {
      auto order = detail::presort(xs, n, p);
      m.initial_score = std::log(m.prevalence / (1.0 - m.prevalence));
      std::vector<double> score(n, m.initial_score), resid(n), w(n, 1.0);
      m.training_loss.push_back(detail::logistic_loss(score, ys));
      detail::TreeParams params{true, spec.criterion, spec.max_depth, static_cast<double>(spec.min_leaf), p};
      for (int t = 0; t < spec.estimators; ++t) {
        for (std::size_t i = 0; i < n; ++i) resid[i] = ys[i] - sigmoid(score[i]);
        detail::TreeBuilder b(xs, p, resid, w, order, params, nullptr, &m.importance_raw);
        Tree tree = b.build();
        for (std::size_t i = 0; i < n; ++i)
          score[i] += spec.learning_rate * tree.predict({xs.data() + i * p, p});
        m.trees.push_back(std::move(tree));
        m.training_loss.push_back(detail::logistic_loss(score, ys));
      }
      break;
    }
    case ModelKind::Knn: {
      m.center.assign(p, 0.0);
      m.scale.assign(p, 1.0);
      for (std::size_t j = 0; j < p; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += xs[i * p + j];
        mean /= static_cast<double>(n);
        double var = 0;
        for (std::size_t i = 0; i < n; ++i) var += (xs[i * p + j] - mean) * (xs[i * p + j] - mean);
        double sd = std::sqrt(var / static_cast<double>(n));
        m.center[j] = mean;
        m.scale[j] = sd > 0 ? sd : 1.0;
      }
      m.points.resize(n * p);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) m.points[i * p + j] = (xs[i * p + j] - m.center[j]) / m.scale[j];
      m.labels.resize(n);
      for (std::size_t i = 0; i < n; ++i) m.labels[i] = ys[i] > 0.5;
      break;
    }
    case ModelKind::Majority: break;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const Tree& t) {
  j = nlohmann::json::array();
  for (const auto& n : t.nodes) j.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.count});
}

inline void from_json(const nlohmann::json& j, Tree& t) {
  t.nodes.clear();
  for (const auto& a : j) {
    TreeNode n;
    a.at(0).get_to(n.feature);
    a.at(1).get_to(n.threshold);
    a.at(2).get_to(n.left);
    a.at(3).get_to(n.right);
    a.at(4).get_to(n.value);
    a.at(5).get_to(n.count);
    t.nodes.push_back(n);
  }
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(std::max(n.left, n.right)) >= t.nodes.size()))
      throw SchemaError("tree node references a missing child");
}

inline constexpr int kModelFormatVersion = 1;

inline void to_json(nlohmann::json& j, const TrainedModel& m) {
  j = {{"format_version", kModelFormatVersion},
       {"spec", m.spec},
       {"columns", m.columns},
       {"fingerprint", m.fingerprint},
       {"prevalence", m.prevalence},
       {"n_train", m.n_train},
       {"constant", m.constant},
       {"warnings", m.warnings},
       {"trees", m.trees},
       {"initial_score", m.initial_score},
       {"importance_raw", m.importance_raw},
       {"training_loss", m.training_loss},
       {"center", m.center},
       {"scale", m.scale},
       {"points", m.points},
       {"labels", m.labels}};
}

inline void from_json(const nlohmann::json& j, TrainedModel& m) {
  if (j.value("format_version", 0) != kModelFormatVersion) throw SchemaError("unsupported model format version");
  j.at("spec").get_to(m.spec);
  j.at("columns").get_to(m.columns);
  j.at("fingerprint").get_to(m.fingerprint);
  if (schema_fingerprint(m.columns) != m.fingerprint) throw SchemaError("model fingerprint does not match its columns");
  j.at("prevalence").get_to(m.prevalence);
  j.at("n_train").get_to(m.n_train);
  j.at("constant").get_to(m.constant);
  j.at("warnings").get_to(m.warnings);
  j.at("trees").get_to(m.trees);
  j.at("initial_score").get_to(m.initial_score);
  j.at("importance_raw").get_to(m.importance_raw);
  j.at("training_loss").get_to(m.training_loss);
  j.at("center").get_to(m.center);
  j.at("scale").get_to(m.scale);
  j.at("points").get_to(m.points);
  j.at("labels").get_to(m.labels);
}

}  // namespace povml
