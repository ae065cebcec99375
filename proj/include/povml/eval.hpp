#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "povml/corpus_io.hpp"
#include "povml/features.hpp"
#include "povml/learners.hpp"

namespace povml {

// ---------------------------------------------------------------------------
// Grouped folds

/// Every household belongs to exactly one fold.
struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> fold_of;

  int fold(const std::string& id) const {
    auto it = fold_of.find(id);
    if (it == fold_of.end()) throw Error("household " + id + " has no fold");
    return it->second;
  }
  std::vector<std::string> members(int f) const {
    std::vector<std::string> out;
    for (const auto& [id, g] : fold_of)
      if (g == f) out.push_back(id);
    return out;
  }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(static_cast<std::size_t>(k), 0);
    for (const auto& [id, g] : fold_of) ++s[static_cast<std::size_t>(g)];
    return s;
  }
};

/// Seeded shuffle of the distinct ids, then round-robin assignment. Repeated
/// ids (several records of one household) share a fold by construction.
inline FoldAssignment make_grouped_folds(std::vector<std::string> household_ids, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  std::sort(household_ids.begin(), household_ids.end());
  household_ids.erase(std::unique(household_ids.begin(), household_ids.end()), household_ids.end());
  if (static_cast<std::size_t>(k) > household_ids.size())
    throw DegenerateError("fold count " + std::to_string(k) + " exceeds " + std::to_string(household_ids.size()) +
                          " households");
  std::mt19937_64 rng(seed);
  for (std::size_t i = household_ids.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(household_ids[i - 1], household_ids[pick(rng)]);
  }
  FoldAssignment a;
  a.k = k;
  for (std::size_t i = 0; i < household_ids.size(); ++i) a.fold_of[household_ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return a;
}

// ---------------------------------------------------------------------------
// Precision-recall curves

struct PrPoint {
  double threshold = 0;
  double proportion_flagged = 0;
  /// Undefined when nothing is flagged.
  std::optional<double> precision;
  double recall = 0;
  bool operator==(const PrPoint&) const = default;
};

struct PrCurve {
  std::vector<PrPoint> points;
  double prevalence = 0;
  std::size_t n = 0;
  std::size_t positives = 0;
  bool operator==(const PrCurve&) const = default;
};

namespace detail {

inline void check_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw AlignmentError("scores and labels differ in length");
  if (scores.empty()) throw DegenerateError("no scored rows");
}

}  // namespace detail

/// Flags score >= t for t on {0, step, ..., 1}.
inline PrCurve pr_curve(std::span<const double> scores, std::span<const int> labels, double grid_step = 0.01) {
  detail::check_scored(scores, labels);
  if (!(grid_step > 0 && grid_step <= 1)) throw ConfigError("grid_step must lie in (0,1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    sorted.emplace_back(scores[i], labels[i] != 0);
    positives += labels[i] != 0;
  }
  if (positives == 0) throw DegenerateError("precision-recall curve undefined without positives");
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  // prefix[i] = positives among the i highest scores
  std::vector<std::size_t> prefix(sorted.size() + 1, 0);
  for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + static_cast<std::size_t>(sorted[i].second);
  PrCurve c;
  c.n = scores.size();
  c.positives = positives;
  c.prevalence = static_cast<double>(positives) / static_cast<double>(c.n);
  for (std::size_t i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(steps);
    auto flagged = static_cast<std::size_t>(
        std::partition_point(sorted.begin(), sorted.end(), [&](const auto& s) { return s.first >= t; }) - sorted.begin());
    PrPoint p;
    p.threshold = t;
    p.proportion_flagged = static_cast<double>(flagged) / static_cast<double>(c.n);
    if (flagged) p.precision = static_cast<double>(prefix[flagged]) / static_cast<double>(flagged);
    p.recall = static_cast<double>(prefix[flagged]) / static_cast<double>(positives);
    c.points.push_back(p);
  }
  return c;
}

/// Reference lines for a classifier without skill.
struct BaselineReferences {
  double prevalence = 0;
  double precision_at(double /*proportion_flagged*/) const { return prevalence; }
  double recall_at(double proportion_flagged) const { return proportion_flagged; }
  /// (proportion_flagged, precision, recall) on the grid.
  std::vector<std::array<double, 3>> sample(double grid_step = 0.01) const {
    std::vector<std::array<double, 3>> out;
    auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    for (std::size_t i = 0; i <= steps; ++i) {
      double q = static_cast<double>(i) / static_cast<double>(steps);
      out.push_back({q, precision_at(q), recall_at(q)});
    }
    return out;
  }
};

inline BaselineReferences baseline_references(double prevalence) {
  if (!(prevalence > 0 && prevalence <= 1)) throw ConfigError("prevalence must lie in (0,1]");
  return {prevalence};
}

/// Precision among the top ceil(q * n) scores. Rows tied with the cutoff score
/// contribute fractionally, so the value does not depend on row order.
inline double precision_at_proportion(std::span<const double> scores, std::span<const int> labels, double q) {
  detail::check_scored(scores, labels);
  if (!(q > 0 && q <= 1)) throw ConfigError("proportion must lie in (0,1]");
  const std::size_t n = scores.size();
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::vector<double> s(scores.begin(), scores.end());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end(), std::greater<>());
  const double cut = s[k - 1];
  double above = 0, above_pos = 0, tied = 0, tied_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i] > cut) {
      above += 1;
      above_pos += labels[i] != 0;
    } else if (scores[i] == cut) {
      tied += 1;
      tied_pos += labels[i] != 0;
    }
  }
  double take = static_cast<double>(k) - above;
  return (above_pos + take * tied_pos / tied) / static_cast<double>(k);
}

/// Mean precision over flagged proportions 0.01, 0.02, ..., max_proportion.
inline double area_under_precision(std::span<const double> scores, std::span<const int> labels,
                                   double max_proportion = 0.5) {
  auto steps = static_cast<int>(std::llround(max_proportion * 100));
  if (steps < 1) throw ConfigError("max_proportion must be at least 0.01");
  double s = 0;
  for (int i = 1; i <= steps; ++i) s += precision_at_proportion(scores, labels, i / 100.0);
  return s / steps;
}

inline double prevalence_of(std::span<const int> labels) {
  if (labels.empty()) throw DegenerateError("no labels");
  double s = 0;
  for (int y : labels) s += y != 0;
  return s / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// Task data

inline constexpr std::string_view kAllRegions = "ALL";

/// Household ids (sorted) and binary labels for one task within one region.
struct TaskData {
  Task task = Task::underreporting();
  std::string region;
  std::vector<std::string> ids;
  std::vector<int> labels;
};

/// Underreporting: verified households, label = any discrepancy found.
/// Imputation: located households with an observed label for the indicator.
inline TaskData task_data(const CorpusIndex& index, const Task& task, const std::string& region) {
  const auto& c = index.corpus();
  TaskData d{task, region, {}, {}};
  for (const auto& h : c.households) {
    if (region != kAllRegions && h.region_id != region) continue;
    if (task.is_underreporting()) {
      const auto* v = index.verification(h.household_id);
      if (!v) continue;
      d.ids.push_back(h.household_id);
      d.labels.push_back(v->any_discrepancy() ? 1 : 0);
    } else {
      if (!h.locality_id) continue;
      const auto* s = index.survey(h.household_id);
      if (!s) continue;
      auto l = s->indicator_labels[idx(task.indicator())];
      if (l == LabelState::Missing) continue;
      d.ids.push_back(h.household_id);
      d.labels.push_back(l == LabelState::Lacking ? 1 : 0);
    }
  }
  std::vector<std::size_t> perm(d.ids.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](auto a, auto b) { return d.ids[a] < d.ids[b]; });
  TaskData sorted{task, region, {}, {}};
  for (auto i : perm) {
    sorted.ids.push_back(d.ids[i]);
    sorted.labels.push_back(d.labels[i]);
  }
  return sorted;
}

// ---------------------------------------------------------------------------
// Per-fold pipeline

/// Everything fit on a fold's training rows; held-out rows influence none of it.
struct FoldArtifacts {
  FeatureSet feature_set = FeatureSet::Combined;
  std::optional<SpatialAverages> averages;
  Preprocessor preprocessor;
  TrainedModel model;
};

/// Raw feature families for `ids`, ready to assemble. Spatial columns use the
/// supplied averages.
inline std::vector<FeatureMatrix> build_families(const CorpusIndex& index, std::span<const std::string> ids,
                                                 const std::vector<Family>& families,
                                                 const std::optional<SpatialAverages>& averages) {
  std::vector<FeatureMatrix> out;
  const auto& cfg = index.corpus().config;
  for (auto f : families) {
    switch (f) {
      case Family::Survey: {
        auto s = build_survey_features(index, ids);
        if (!s.skipped.empty()) throw AlignmentError("household " + s.skipped.front() + " has no survey");
        out.push_back(std::move(s.matrix));
        break;
      }
      case Family::Transactional:
        out.push_back(build_transactional_features(index, ids, {cfg.window_start, cfg.window_end}));
        break;
      case Family::Spatial:
        out.push_back(build_spatial_features(index, ids, averages.value()));
        break;
      case Family::Socioeconomic:
        out.push_back(build_socioeconomic_features(index, ids));
        break;
    }
  }
  return out;
}

inline bool needs_spatial(const std::vector<Family>& families) {
  return std::find(families.begin(), families.end(), Family::Spatial) != families.end();
}

/// Assembled, unimputed matrix for `ids`.
inline FeatureMatrix raw_features(const CorpusIndex& index, std::span<const std::string> ids, const Task& task,
                                  FeatureSet set, const std::optional<SpatialAverages>& averages) {
  auto families = families_for(set, task);
  auto mats = build_families(index, ids, families, averages);
  return assemble(mats, set, task);
}

struct FoldOutput {
  FoldArtifacts artifacts;
  std::vector<double> test_scores;
};

/// Fits averages, imputation statistics and the model on `train`, then scores `test`.
inline FoldOutput fit_fold(const CorpusIndex& index, const Task& task, FeatureSet set, const ModelSpec& spec,
                           const std::vector<std::string>& train, const std::vector<int>& train_labels,
                           const std::vector<std::string>& test) {
  FoldOutput out;
  out.artifacts.feature_set = set;
  auto families = families_for(set, task);
  if (needs_spatial(families)) out.artifacts.averages = compute_spatial_averages(index, train);
  std::vector<std::string> all = train;
  all.insert(all.end(), test.begin(), test.end());
  auto raw = raw_features(index, all, task, set, out.artifacts.averages);
  std::vector<std::size_t> train_rows(train.size()), test_rows(test.size());
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::iota(test_rows.begin(), test_rows.end(), train.size());
  out.artifacts.preprocessor = Preprocessor::fit(raw, train_rows);
  auto x = out.artifacts.preprocessor.transform(raw);
  out.artifacts.model = fit(spec, select_rows(x, train_rows), train_labels);
  if (!test.empty()) out.test_scores = out.artifacts.model.predict_proba(select_rows(x, test_rows));
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
  int fold = 0;
  bool degenerate = false;
  std::string note;
  std::size_t n_train = 0;
  /// Digest of the training ids.
  std::string train_digest;
  std::optional<PrCurve> curve;
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct CvResult {
  Task task = Task::underreporting();
  std::string region;
  std::string model_id;
  FeatureSet feature_set = FeatureSet::Combined;
  std::vector<FoldResult> folds;
  /// Importances per non-degenerate fold, when the model supports them.
  std::vector<ImportanceReport> importances;

  /// Held-out scores of every non-degenerate fold.
  std::tuple<std::vector<std::string>, std::vector<double>, std::vector<int>> pooled() const {
    std::vector<std::string> ids;
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& f : folds) {
      if (f.degenerate) continue;
      ids.insert(ids.end(), f.ids.begin(), f.ids.end());
      s.insert(s.end(), f.scores.begin(), f.scores.end());
      y.insert(y.end(), f.labels.begin(), f.labels.end());
    }
    return {ids, s, y};
  }
};

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  double grid_step = 0.01;
};

inline CvResult run_cv(const CorpusIndex& index, const TaskData& data, const ModelSpec& spec, FeatureSet set,
                       const CvOptions& opt) {
  CvResult res;
  res.task = data.task;
  res.region = data.region;
  res.model_id = spec.id();
  res.feature_set = set;
  families_for(set, data.task);  // rejects survey features for imputation up front
  auto folds = make_grouped_folds(data.ids, opt.folds, opt.seed);
  for (int f = 0; f < opt.folds; ++f) {
    FoldResult fr;
    fr.fold = f;
    std::vector<std::string> train;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
      if (folds.fold(data.ids[i]) == f) {
        fr.ids.push_back(data.ids[i]);
        fr.labels.push_back(data.labels[i]);
      } else {
        train.push_back(data.ids[i]);
        train_y.push_back(data.labels[i]);
      }
    }
    fr.n_train = train.size();
    fr.train_digest = digest_ids(train);
    double prev = prevalence_of(train_y);
    if (prev == 0 || prev == 1) {
      fr.degenerate = true;
      fr.note = "single-class training labels";
      res.folds.push_back(std::move(fr));
      continue;
    }
    auto fold_spec = spec;
    fold_spec.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(f));
    auto out = fit_fold(index, data.task, set, fold_spec, train, train_y, fr.ids);
    fr.scores = std::move(out.test_scores);
    if (std::none_of(fr.labels.begin(), fr.labels.end(), [](int y) { return y != 0; })) {
      fr.degenerate = true;
      fr.note = "no positives in held-out fold";
    } else {
      fr.curve = pr_curve(fr.scores, fr.labels, opt.grid_step);
    }
    if (spec.kind == ModelKind::DecisionTree || spec.kind == ModelKind::RandomForest || spec.kind == ModelKind::Gbm)
      res.importances.push_back(out.artifacts.model.importances());
    res.folds.push_back(std::move(fr));
  }
  return res;
}

/// Mean importance per column across folds.
inline ImportanceReport mean_importances(const std::vector<ImportanceReport>& reports) {
  ImportanceReport out;
  if (reports.empty()) return out;
  out.entries = reports.front().entries;
  for (auto& e : out.entries) e.second = 0;
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.entries.size() && i < out.entries.size(); ++i) out.entries[i].second += r.entries[i].second;
  for (auto& e : out.entries) e.second /= static_cast<double>(reports.size());
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation grid

struct GridKey {
  std::string region;
  std::string task;
  std::string model;
  std::string feature_set;
  int fold = 0;
  auto operator<=>(const GridKey&) const = default;
};

struct GridEntry {
  std::optional<PrCurve> curve;
  /// Set for entries that have no curve.
  std::string degenerate_note;
};

using EvalGrid = std::map<GridKey, GridEntry>;

inline void add_to_grid(EvalGrid& grid, const CvResult& r) {
  for (const auto& f : r.folds) {
    GridKey key{r.region, r.task.name(), r.model_id, std::string(feature_set_name(r.feature_set)), f.fold};
    if (grid.count(key)) throw Error("duplicate grid entry");
    grid[key] = GridEntry{f.curve, f.degenerate ? f.note : ""};
  }
}

inline constexpr std::string_view kGridHeader =
    "region,task,model,feature_set,fold,threshold,proportion_flagged,precision,recall";

/// One row per curve point; degenerate entries get a single row of NA.
inline std::string export_grid(const EvalGrid& grid) {
  std::string out(kGridHeader);
  out += "\n";
  for (const auto& [k, e] : grid) {
    std::string prefix = k.region + "," + k.task + "," + k.model + "," + k.feature_set + "," + std::to_string(k.fold) + ",";
    if (!e.curve) {
      out += prefix + "NA,NA,NA,NA\n";
      continue;
    }
    for (const auto& p : e.curve->points)
      out += prefix + format_double(p.threshold) + "," + format_double(p.proportion_flagged) + "," +
             (p.precision ? format_double(*p.precision) : "NA") + "," + format_double(p.recall) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analytics

struct ProgramIndicatorRow {
  std::string program;
  std::size_t count = 0;
  double proportion = 0;
  double ci_low = 0;
  double ci_high = 0;
};

struct ProgramIndicatorTable {
  PovertyIndicator indicator = PovertyIndicator::Education;
  std::vector<ProgramIndicatorRow> rows;
  /// Share lacking among all labeled households.
  double overall = 0;
  std::vector<std::string> notes;
};

inline std::set<std::string> enrolled_programs(const CorpusIndex& index, const std::string& household) {
  std::set<std::string> out;
  for (auto t : index.transactions(household)) out.insert(index.corpus().transactions[t].program_id);
  return out;
}

/// Share of each program's enrolled households lacking the indicator, with a
/// normal-approximation 95% interval.
inline ProgramIndicatorTable program_indicator_table(const Corpus& c, PovertyIndicator indicator) {
  CorpusIndex index(c);
  ProgramIndicatorTable t;
  t.indicator = indicator;
  std::map<std::string, std::pair<double, double>> counts;  // (n, lacking)
  double n_all = 0, lack_all = 0;
  for (const auto& s : c.surveys) {
    auto l = s.indicator_labels[idx(indicator)];
    if (l == LabelState::Missing) continue;
    double y = l == LabelState::Lacking;
    n_all += 1;
    lack_all += y;
    for (const auto& p : enrolled_programs(index, s.household_id)) {
      counts[p].first += 1;
      counts[p].second += y;
    }
  }
  t.overall = n_all > 0 ? lack_all / n_all : 0.0;
  for (const auto& p : c.programs) {
    auto it = counts.find(p);
    if (it == counts.end()) {
      t.notes.push_back(p + ": no enrolled households with a label; omitted");
      continue;
    }
    ProgramIndicatorRow r;
    r.program = p;
    r.count = static_cast<std::size_t>(it->second.first);
    r.proportion = it->second.second / it->second.first;
    double half = 1.96 * std::sqrt(r.proportion * (1 - r.proportion) / it->second.first);
    r.ci_low = std::max(0.0, r.proportion - half);
    r.ci_high = std::min(1.0, r.proportion + half);
    t.rows.push_back(r);
  }
  return t;
}

struct BenefitShareHistogram {
  std::string program;
  std::vector<double> bin_edges;
  std::vector<std::size_t> lacking;
  std::vector<std::size_t> not_lacking;
};

/// Share of each household's in-window benefit amount paid by `program`.
/// Households with no benefits or a zero share are left out.
inline BenefitShareHistogram benefit_share_histogram(const Corpus& c, PovertyIndicator indicator,
                                                     const std::string& program, int bins = 20) {
  if (bins < 1) throw ConfigError("bins must be positive");
  CorpusIndex index(c);
  BenefitShareHistogram h;
  h.program = program;
  for (int i = 0; i <= bins; ++i) h.bin_edges.push_back(static_cast<double>(i) / bins);
  h.lacking.assign(static_cast<std::size_t>(bins), 0);
  h.not_lacking.assign(static_cast<std::size_t>(bins), 0);
  for (const auto& s : c.surveys) {
    auto l = s.indicator_labels[idx(indicator)];
    if (l == LabelState::Missing) continue;
    double total = 0, mine = 0;
    for (auto t : index.transactions(s.household_id)) {
      const auto& tx = c.transactions[t];
      total += tx.amount;
      if (tx.program_id == program) mine += tx.amount;
    }
    if (total <= 0 || mine <= 0) continue;
    double share = mine / total;
    auto b = std::min<std::size_t>(static_cast<std::size_t>(share * bins), static_cast<std::size_t>(bins) - 1);
    (l == LabelState::Lacking ? h.lacking : h.not_lacking)[b] += 1;
  }
  return h;
}

struct DirectionRow {
  std::string question;
  std::size_t n_verified = 0;
  std::size_t n_discrepancies = 0;
  std::size_t n_under = 0;
  std::size_t n_over = 0;
  double share_without_discrepancy() const {
    return n_verified ? 1.0 - static_cast<double>(n_discrepancies) / static_cast<double>(n_verified) : 1.0;
  }
};

/// Per verifiable question, how often verification disagreed and in which direction.
inline std::vector<DirectionRow> discrepancy_direction_report(const Corpus& c) {
  const auto& schema = survey_schema();
  std::map<std::size_t, DirectionRow> rows;
  for (auto q : verifiable_questions()) rows[q].question = schema[q].id;
  for (const auto& v : c.verifications)
    for (const auto& [q, s] : v.entries) {
      auto& r = rows[q];
      r.question = schema[q].id;
      ++r.n_verified;
      if (s == VerificationStatus::Match) continue;
      ++r.n_discrepancies;
      ++(s == VerificationStatus::UnderReported ? r.n_under : r.n_over);
    }
  std::vector<DirectionRow> out;
  for (auto& [q, r] : rows) out.push_back(r);
  return out;
}

/// Number of verified households by count of discrepant answers.
inline std::map<std::size_t, std::size_t> discrepancy_count_histogram(const Corpus& c) {
  std::map<std::size_t, std::size_t> h;
  for (const auto& v : c.verifications) ++h[v.n_discrepancies()];
  return h;
}

}  // namespace povml
