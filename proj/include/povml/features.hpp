#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <tuple>

#include "povml/corpus.hpp"

namespace povml {

enum class Family : int { Survey = 0, Transactional, Spatial, Socioeconomic };
enum class Kind : int { Numeric = 0, Indicator, Categorical };

inline std::string_view family_name(Family f) {
  static constexpr std::array<std::string_view, 4> n = {"survey", "transactional", "spatial", "socioeconomic"};
  return n[static_cast<std::size_t>(f)];
}

inline std::string_view kind_name(Kind k) {
  static constexpr std::array<std::string_view, 3> n = {"numeric", "indicator", "categorical"};
  return n[static_cast<std::size_t>(k)];
}

struct Column {
  std::string source;
  /// Dummy level; empty unless this column encodes one level of a categorical source.
  std::string level;
  Family family = Family::Survey;
  Kind kind = Kind::Numeric;
  /// Categorical columns store an index into this list.
  std::vector<std::string> categories;

  std::string name() const { return level.empty() ? source : source + "=" + level; }
  bool operator==(const Column&) const = default;
};

/// Dense household-by-feature grid with a per-cell missingness mask.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<Column> columns;
  std::vector<double> values;          // row-major
  std::vector<std::uint8_t> missing;   // row-major; 1 = missing

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  bool is_missing(std::size_t r, std::size_t c) const { return missing[r * cols() + c] != 0; }
  bool any_missing() const { return std::any_of(missing.begin(), missing.end(), [](auto m) { return m != 0; }); }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns) out.push_back(c.name());
    return out;
  }

  bool operator==(const FeatureMatrix&) const = default;
};

namespace detail {

/// Builds a matrix row by row; cells start missing.
class MatrixBuilder {
 public:
  MatrixBuilder(std::vector<Column> cols, std::vector<std::string> rows) {
    m_.columns = std::move(cols);
    m_.row_ids = std::move(rows);
    m_.values.assign(m_.rows() * m_.cols(), 0.0);
    m_.missing.assign(m_.rows() * m_.cols(), 1);
  }
  void set(std::size_t r, std::size_t c, double v) {
    m_.values[r * m_.cols() + c] = v;
    m_.missing[r * m_.cols() + c] = 0;
  }
  FeatureMatrix take() { return std::move(m_); }

 private:
  FeatureMatrix m_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Tasks and feature-set selection

/// Either the underreporting task or imputation of one poverty indicator.
class Task {
 public:
  static Task underreporting() { return Task(std::nullopt); }
  static Task imputation(PovertyIndicator k) { return Task(k); }
  static std::optional<Task> parse(std::string_view s) {
    if (s == "underreporting") return underreporting();
    if (auto k = parse_indicator(s)) return imputation(*k);
    return std::nullopt;
  }

  bool is_underreporting() const { return !indicator_; }
  PovertyIndicator indicator() const { return *indicator_; }
  std::string name() const { return indicator_ ? std::string(indicator_name(*indicator_)) : "underreporting"; }
  bool operator==(const Task&) const = default;

 private:
  explicit Task(std::optional<PovertyIndicator> k) : indicator_(k) {}
  std::optional<PovertyIndicator> indicator_;
};

enum class FeatureSet { Geographic, Socioeconomic, Transactional, Survey, Combined };

inline std::string_view feature_set_name(FeatureSet f) {
  switch (f) {
    case FeatureSet::Geographic: return "geographic";
    case FeatureSet::Socioeconomic: return "socioeconomic";
    case FeatureSet::Transactional: return "transactional";
    case FeatureSet::Survey: return "survey";
    case FeatureSet::Combined: return "combined";
  }
  return "combined";
}

inline std::optional<FeatureSet> parse_feature_set(std::string_view s) {
  for (auto f : {FeatureSet::Geographic, FeatureSet::Socioeconomic, FeatureSet::Transactional, FeatureSet::Survey,
                 FeatureSet::Combined})
    if (feature_set_name(f) == s) return f;
  return std::nullopt;
}

/// Families a feature set draws on. Survey answers require a completed
/// questionnaire, so imputation never sees them.
inline std::vector<Family> families_for(FeatureSet set, const Task& task) {
  switch (set) {
    case FeatureSet::Geographic: return {Family::Spatial};
    case FeatureSet::Socioeconomic: return {Family::Socioeconomic};
    case FeatureSet::Transactional: return {Family::Transactional};
    case FeatureSet::Survey:
      if (!task.is_underreporting()) throw ConfigError("survey features are unavailable for imputation tasks");
      return {Family::Survey};
    case FeatureSet::Combined:
      if (task.is_underreporting()) return {Family::Survey, Family::Transactional, Family::Spatial, Family::Socioeconomic};
      return {Family::Transactional, Family::Spatial, Family::Socioeconomic};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Survey features

struct SurveyFeatures {
  FeatureMatrix matrix;
  /// Households without a questionnaire; they get no row.
  std::vector<std::string> skipped;
};

inline SurveyFeatures build_survey_features(const CorpusIndex& index, std::span<const std::string> households) {
  const auto& schema = survey_schema();
  std::vector<Column> cols;
  for (const auto& q : schema) {
    Column c{q.id, "", Family::Survey, Kind::Numeric, {}};
    if (q.kind == AnswerKind::Boolean) c.kind = Kind::Indicator;
    if (q.kind == AnswerKind::Categorical) {
      c.kind = Kind::Categorical;
      c.categories = q.levels;
      std::sort(c.categories.begin(), c.categories.end());
    }
    cols.push_back(std::move(c));
  }
  SurveyFeatures out;
  std::vector<std::string> rows;
  std::vector<const CuisSurvey*> surveys;
  for (const auto& id : households) {
    const auto* s = index.survey(id);
    if (!s) {
      out.skipped.push_back(id);
      continue;
    }
    rows.push_back(id);
    surveys.push_back(s);
  }
  detail::MatrixBuilder b(cols, rows);
  for (std::size_t r = 0; r < surveys.size(); ++r) {
    for (std::size_t q = 0; q < schema.size(); ++q) {
      const auto& a = surveys[r]->answers[q];
      if (answer_missing(a)) continue;
      if (const auto* d = std::get_if<double>(&a)) b.set(r, q, *d);
      else if (const auto* flag = std::get_if<bool>(&a)) b.set(r, q, *flag ? 1.0 : 0.0);
      else {
        const auto& levels = cols[q].categories;
        auto it = std::find(levels.begin(), levels.end(), std::get<std::string>(a));
        if (it != levels.end()) b.set(r, q, static_cast<double>(it - levels.begin()));
      }
    }
  }
  out.matrix = b.take();
  return out;
}

// ---------------------------------------------------------------------------
// Transactional features

struct DateWindow {
  Date start;
  Date end;  // inclusive

  /// Calendar months touched by the window.
  double months() const {
    auto a = start.ymd(), b = end.ymd();
    int m = (static_cast<int>(b.year()) - static_cast<int>(a.year())) * 12 +
            (static_cast<int>(static_cast<unsigned>(b.month())) - static_cast<int>(static_cast<unsigned>(a.month()))) + 1;
    return static_cast<double>(m);
  }
  bool contains(const Date& d) const { return !(d < start) && !(end < d); }
};

inline constexpr double kDaysPerMonth = 365.25 / 12.0;

/// Per program: enrollment flag, payment count, total amount, payments per month,
/// and months from the first payment to the end of the window; plus totals.
inline FeatureMatrix build_transactional_features(const CorpusIndex& index, std::span<const std::string> households,
                                                  const DateWindow& window) {
  const auto& programs = index.corpus().programs;
  std::vector<Column> cols;
  auto add = [&](const std::string& name, Kind kind) { cols.push_back({name, "", Family::Transactional, kind, {}}); };
  for (const auto& p : programs) {
    add(p + ".enrolled", Kind::Indicator);
    add(p + ".n_payments", Kind::Numeric);
    add(p + ".total_amount", Kind::Numeric);
    add(p + ".payment_rate", Kind::Numeric);
    add(p + ".months_since_first", Kind::Numeric);
  }
  add("all.n_programs", Kind::Numeric);
  add("all.n_payments", Kind::Numeric);
  add("all.total_amount", Kind::Numeric);
  add("all.payment_rate", Kind::Numeric);
  const double months = window.months();
  detail::MatrixBuilder b(cols, std::vector<std::string>(households.begin(), households.end()));
  const auto& txs = index.corpus().transactions;
  for (std::size_t r = 0; r < households.size(); ++r) {
    std::vector<double> count(programs.size(), 0), total(programs.size(), 0);
    std::vector<std::optional<Date>> first(programs.size());
    for (auto t : index.transactions(households[r])) {
      const auto& tx = txs[t];
      if (!window.contains(tx.date)) continue;
      auto p = index.program(tx.program_id);
      if (!p) continue;
      count[*p] += 1;
      total[*p] += tx.amount;
      if (!first[*p] || tx.date < *first[*p]) first[*p] = tx.date;
    }
    double all_count = 0, all_total = 0, n_enrolled = 0;
    for (std::size_t p = 0; p < programs.size(); ++p) {
      std::size_t base = 5 * p;
      bool enrolled = count[p] > 0;
      b.set(r, base, enrolled ? 1.0 : 0.0);
      b.set(r, base + 1, count[p]);
      b.set(r, base + 2, total[p]);
      b.set(r, base + 3, count[p] / months);
      b.set(r, base + 4, first[p] ? static_cast<double>(days_between(*first[p], window.end)) / kDaysPerMonth : 0.0);
      all_count += count[p];
      all_total += total[p];
      n_enrolled += enrolled;
    }
    std::size_t base = 5 * programs.size();
    b.set(r, base, n_enrolled);
    b.set(r, base + 1, all_count);
    b.set(r, base + 2, all_total);
    b.set(r, base + 3, all_count / months);
  }
  return b.take();
}

// ---------------------------------------------------------------------------
// Fold-restricted spatial averages

/// Label sum and count over training households in one area.
struct AreaTally {
  double sum = 0;
  double count = 0;
  double mean() const { return sum / count; }
  bool operator==(const AreaTally&) const = default;
};

/// Mean of one indicator over training households, by block and by locality.
/// A training household's own label never enters its own feature: its lookup
/// removes that label (leave-one-out), so training and held-out rows see
/// features built the same way.
struct FoldRestrictedAverages {
  PovertyIndicator indicator = PovertyIndicator::Education;
  std::map<std::string, AreaTally> blocks;
  std::map<std::string, AreaTally> localities;
  AreaTally global;
  /// Labels of the training households that contributed.
  std::map<std::string, int> members;
  /// Digest of the sorted training row ids the averages were computed from.
  std::string training_rows;

  double block_mean(const std::string& id) const { return blocks.at(id).mean(); }
  double locality_mean(const std::string& id) const { return localities.at(id).mean(); }
  double global_prevalence() const { return global.mean(); }

  /// Block mean, else locality mean, else global training prevalence; each
  /// level is skipped when nothing is left after removing the household itself.
  double lookup(const Household& h) const {
    double own = 0, self = 0;
    if (auto m = members.find(h.household_id); m != members.end()) {
      own = m->second;
      self = 1;
    }
    auto pick = [&](const std::map<std::string, AreaTally>& areas, const std::optional<std::string>& key) -> std::optional<double> {
      if (!key) return std::nullopt;
      auto it = areas.find(*key);
      if (it == areas.end() || it->second.count - self <= 0) return std::nullopt;
      return (it->second.sum - own) / (it->second.count - self);
    };
    if (auto v = pick(blocks, h.block_id)) return *v;
    if (auto v = pick(localities, h.locality_id)) return *v;
    if (global.count - self <= 0) return global.mean();
    return (global.sum - own) / (global.count - self);
  }
  bool operator==(const FoldRestrictedAverages&) const = default;
};

inline std::string digest_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  Fnv1a h;
  for (const auto& id : ids) h.add(id).add(std::string_view("\n"));
  return hex64(h.value());
}

inline FoldRestrictedAverages compute_fold_averages(const CorpusIndex& index, PovertyIndicator indicator,
                                                    std::span<const std::string> training_rows) {
  if (training_rows.empty()) throw DegenerateError("fold averages need a nonempty training set");
  FoldRestrictedAverages out;
  out.indicator = indicator;
  out.training_rows = digest_ids({training_rows.begin(), training_rows.end()});
  for (const auto& id : training_rows) {
    const auto* s = index.survey(id);
    const auto* h = index.household(id);
    if (!s || !h) continue;
    auto label = s->indicator_labels[idx(indicator)];
    if (label == LabelState::Missing) continue;
    int y = label == LabelState::Lacking ? 1 : 0;
    if (!out.members.emplace(id, y).second) continue;
    auto add = [y](AreaTally& t) {
      t.sum += y;
      t.count += 1;
    };
    add(out.global);
    if (h->block_id) add(out.blocks[*h->block_id]);
    if (h->locality_id) add(out.localities[*h->locality_id]);
  }
  if (out.global.count == 0) throw DegenerateError("no training labels for " + std::string(indicator_name(indicator)));
  return out;
}

using SpatialAverages = std::array<FoldRestrictedAverages, kNumIndicators>;

inline SpatialAverages compute_spatial_averages(const CorpusIndex& index, std::span<const std::string> training_rows) {
  SpatialAverages out;
  for (auto k : kAllIndicators) out[idx(k)] = compute_fold_averages(index, k, training_rows);
  return out;
}

/// Block coordinates plus one fold-averaged column per indicator.
inline FeatureMatrix build_spatial_features(const CorpusIndex& index, std::span<const std::string> households,
                                            const SpatialAverages& averages) {
  std::vector<Column> cols = {{"manzana_latitude", "", Family::Spatial, Kind::Numeric, {}},
                              {"manzana_longitude", "", Family::Spatial, Kind::Numeric, {}}};
  for (auto k : kAllIndicators) cols.push_back({"avg_" + std::string(indicator_name(k)), "", Family::Spatial, Kind::Numeric, {}});
  detail::MatrixBuilder b(cols, std::vector<std::string>(households.begin(), households.end()));
  for (std::size_t r = 0; r < households.size(); ++r) {
    const auto* h = index.household(households[r]);
    if (!h) throw Error("unknown household " + households[r]);
    if (h->block_coords) {
      b.set(r, 0, h->block_coords->latitude);
      b.set(r, 1, h->block_coords->longitude);
    }
    for (auto k : kAllIndicators) b.set(r, 2 + idx(k), averages[idx(k)].lookup(*h));
  }
  return b.take();
}

// ---------------------------------------------------------------------------
// Socioeconomic features

/// Census aggregates of the household's block, falling back to its locality.
inline FeatureMatrix build_socioeconomic_features(const CorpusIndex& index, std::span<const std::string> households) {
  const auto& names = aggregate_names();
  std::vector<Column> cols;
  for (const auto& n : names) cols.push_back({"census." + n, "", Family::Socioeconomic, Kind::Numeric, {}});
  detail::MatrixBuilder b(cols, std::vector<std::string>(households.begin(), households.end()));
  for (std::size_t r = 0; r < households.size(); ++r) {
    const auto* h = index.household(households[r]);
    if (!h) throw Error("unknown household " + households[r]);
    const std::map<std::string, double>* agg = nullptr;
    if (h->block_id)
      if (const auto* blk = index.block(*h->block_id)) agg = &blk->aggregates;
    if (!agg && h->locality_id)
      if (const auto* loc = index.locality(*h->locality_id)) agg = &loc->aggregates;
    if (!agg) continue;
    for (std::size_t c = 0; c < names.size(); ++c)
      if (auto it = agg->find(names[c]); it != agg->end()) b.set(r, c, it->second);
  }
  return b.take();
}

// ---------------------------------------------------------------------------
// Assembly

/// Column-wise concatenation of the families the selector permits for the task,
/// ordered by family, then source name, then level.
inline FeatureMatrix assemble(std::span<const FeatureMatrix> matrices, FeatureSet selector, const Task& task) {
  auto families = families_for(selector, task);
  std::vector<std::pair<std::size_t, std::size_t>> picked;  // (matrix, column)
  const std::vector<std::string>* rows = nullptr;
  for (std::size_t m = 0; m < matrices.size(); ++m) {
    if (!rows) rows = &matrices[m].row_ids;
    else if (matrices[m].row_ids != *rows)
      throw AlignmentError("feature matrices disagree on row ids or row order");
    for (std::size_t c = 0; c < matrices[m].cols(); ++c) {
      const auto& col = matrices[m].columns[c];
      if (std::find(families.begin(), families.end(), col.family) != families.end()) picked.emplace_back(m, c);
    }
  }
  std::stable_sort(picked.begin(), picked.end(), [&](const auto& a, const auto& b) {
    const auto& ca = matrices[a.first].columns[a.second];
    const auto& cb = matrices[b.first].columns[b.second];
    return std::tie(ca.family, ca.source, ca.level) < std::tie(cb.family, cb.source, cb.level);
  });
  FeatureMatrix out;
  if (rows) out.row_ids = *rows;
  for (auto [m, c] : picked) out.columns.push_back(matrices[m].columns[c]);
  for (std::size_t i = 1; i < out.columns.size(); ++i)
    if (out.columns[i].name() == out.columns[i - 1].name()) throw SchemaError("duplicate column " + out.columns[i].name());
  out.values.resize(out.rows() * out.cols());
  out.missing.resize(out.rows() * out.cols());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < picked.size(); ++j) {
      auto [m, c] = picked[j];
      out.values[r * out.cols() + j] = matrices[m].at(r, c);
      out.missing[r * out.cols() + j] = matrices[m].missing[r * matrices[m].cols() + c];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Imputation statistics for one input column, fit on training rows.
struct ColumnStats {
  /// Median for numeric columns, modal value (or category code) otherwise.
  double fill = 0;
  /// Category codes observed in training, ascending; categorical columns only.
  std::vector<std::size_t> levels;
  bool all_missing = false;
  bool operator==(const ColumnStats&) const = default;
};

/// Median/mode imputation plus dummy encoding of categorical columns.
class Preprocessor {
 public:
  static Preprocessor fit(const FeatureMatrix& m) {
    std::vector<std::size_t> all(m.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit(m, all);
  }

  static Preprocessor fit(const FeatureMatrix& m, std::span<const std::size_t> training_rows) {
    Preprocessor p;
    p.input_ = m.columns;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto& col = m.columns[c];
      std::vector<double> vals;
      vals.reserve(training_rows.size());
      for (auto r : training_rows)
        if (!m.is_missing(r, c)) vals.push_back(m.at(r, c));
      ColumnStats s;
      if (vals.empty()) {
        s.all_missing = true;
        p.report_.push_back(col.name() + ": no observed training values; imputed with 0");
      } else if (col.kind == Kind::Numeric) {
        std::sort(vals.begin(), vals.end());
        std::size_t n = vals.size();
        s.fill = n % 2 ? vals[n / 2] : (vals[n / 2 - 1] + vals[n / 2]) / 2.0;
      } else {
        std::map<double, std::size_t> counts;
        for (double v : vals) ++counts[v];
        std::size_t best = 0;
        for (const auto& [v, n] : counts) {
          if (col.kind == Kind::Categorical) s.levels.push_back(static_cast<std::size_t>(v));
          // Categories are stored sorted by name, so the first maximum is the
          // lexicographically smallest level.
          if (n > best) {
            best = n;
            s.fill = v;
          }
        }
      }
      p.stats_.push_back(std::move(s));
    }
    return p;
  }

  FeatureMatrix transform(const FeatureMatrix& m) const {
    if (m.columns != input_) {
      for (std::size_t c = 0; c < std::min(m.cols(), input_.size()); ++c)
        if (m.columns[c] != input_[c]) throw SchemaError("preprocessor column mismatch at " + m.columns[c].name());
      throw SchemaError("preprocessor expects " + std::to_string(input_.size()) + " columns, got " +
                        std::to_string(m.cols()));
    }
    FeatureMatrix out;
    out.row_ids = m.row_ids;
    std::vector<std::size_t> source;  // input column per output column
    for (std::size_t c = 0; c < input_.size(); ++c) {
      const auto& col = input_[c];
      if (col.kind != Kind::Categorical) {
        out.columns.push_back(col);
        source.push_back(c);
        continue;
      }
      for (auto lv : stats_[c].levels) {
        out.columns.push_back({col.source, col.categories.at(lv), col.family, Kind::Indicator, {}});
        source.push_back(c);
      }
    }
    out.values.assign(out.rows() * out.cols(), 0.0);
    out.missing.assign(out.rows() * out.cols(), 0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t j = 0; j < out.cols(); ++j) {
        std::size_t c = source[j];
        const auto& s = stats_[c];
        double v = m.is_missing(r, c) ? s.fill : m.at(r, c);
        if (input_[c].kind == Kind::Categorical) {
          // Levels never seen in training fall back to the modal level.
          if (!std::binary_search(s.levels.begin(), s.levels.end(), static_cast<std::size_t>(v))) v = s.fill;
          const auto& level = out.columns[j].level;
          v = input_[c].categories[static_cast<std::size_t>(v)] == level ? 1.0 : 0.0;
        }
        out.values[r * out.cols() + j] = v;
      }
    }
    return out;
  }

  const std::vector<Column>& input_columns() const { return input_; }
  const std::vector<ColumnStats>& stats() const { return stats_; }
  /// Columns that had no training values.
  const std::vector<std::string>& report() const { return report_; }

  bool operator==(const Preprocessor&) const = default;

  friend void to_json(nlohmann::json& j, const Preprocessor& p);
  friend void from_json(const nlohmann::json& j, Preprocessor& p);

 private:
  std::vector<Column> input_;
  std::vector<ColumnStats> stats_;
  std::vector<std::string> report_;
};

/// Fits on all rows and transforms.
inline FeatureMatrix preprocess(const FeatureMatrix& m) { return Preprocessor::fit(m).transform(m); }

/// Fits on the training rows only and transforms every row.
inline FeatureMatrix preprocess(const FeatureMatrix& m, std::span<const std::size_t> training_rows) {
  return Preprocessor::fit(m, training_rows).transform(m);
}

/// Copies the listed rows, in the given order.
inline FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.columns = m.columns;
  out.row_ids.reserve(rows.size());
  out.values.reserve(rows.size() * m.cols());
  out.missing.reserve(rows.size() * m.cols());
  for (auto r : rows) {
    out.row_ids.push_back(m.row_ids[r]);
    out.values.insert(out.values.end(), m.values.begin() + r * m.cols(), m.values.begin() + (r + 1) * m.cols());
    out.missing.insert(out.missing.end(), m.missing.begin() + r * m.cols(), m.missing.begin() + (r + 1) * m.cols());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const Column& c) {
  j = {{"source", c.source}, {"level", c.level}, {"family", family_name(c.family)}, {"kind", kind_name(c.kind)},
       {"categories", c.categories}};
}

inline void from_json(const nlohmann::json& j, Column& c) {
  j.at("source").get_to(c.source);
  j.at("level").get_to(c.level);
  auto fam = j.at("family").get<std::string>();
  auto kind = j.at("kind").get<std::string>();
  bool ok_f = false, ok_k = false;
  for (int f = 0; f < 4; ++f)
    if (family_name(static_cast<Family>(f)) == fam) c.family = static_cast<Family>(f), ok_f = true;
  for (int k = 0; k < 3; ++k)
    if (kind_name(static_cast<Kind>(k)) == kind) c.kind = static_cast<Kind>(k), ok_k = true;
  if (!ok_f || !ok_k) throw SchemaError("unknown column family or kind: " + fam + "/" + kind);
  j.at("categories").get_to(c.categories);
}

inline void to_json(nlohmann::json& j, const ColumnStats& s) {
  j = {{"fill", s.fill}, {"levels", s.levels}, {"all_missing", s.all_missing}};
}

inline void from_json(const nlohmann::json& j, ColumnStats& s) {
  j.at("fill").get_to(s.fill);
  j.at("levels").get_to(s.levels);
  j.at("all_missing").get_to(s.all_missing);
}

inline void to_json(nlohmann::json& j, const Preprocessor& p) {
  j = {{"columns", p.input_}, {"stats", p.stats_}, {"report", p.report_}};
}

inline void from_json(const nlohmann::json& j, Preprocessor& p) {
  j.at("columns").get_to(p.input_);
  j.at("stats").get_to(p.stats_);
  j.at("report").get_to(p.report_);
  if (p.input_.size() != p.stats_.size()) throw SchemaError("preprocessor columns and stats differ in length");
}

inline void to_json(nlohmann::json& j, const AreaTally& t) { j = nlohmann::json::array({t.sum, t.count}); }
inline void from_json(const nlohmann::json& j, AreaTally& t) {
  j.at(0).get_to(t.sum);
  j.at(1).get_to(t.count);
}

inline void to_json(nlohmann::json& j, const FoldRestrictedAverages& a) {
  j = {{"indicator", indicator_name(a.indicator)},
       {"blocks", a.blocks},
       {"localities", a.localities},
       {"global", a.global},
       {"members", a.members},
       {"training_rows", a.training_rows}};
}

inline void from_json(const nlohmann::json& j, FoldRestrictedAverages& a) {
  auto k = parse_indicator(j.at("indicator").get<std::string>());
  if (!k) throw SchemaError("unknown indicator in averages");
  a.indicator = *k;
  j.at("blocks").get_to(a.blocks);
  j.at("localities").get_to(a.localities);
  j.at("global").get_to(a.global);
  j.at("members").get_to(a.members);
  j.at("training_rows").get_to(a.training_rows);
}

// ---------------------------------------------------------------------------
// Matrix dump

/// Header `name:family:kind`, then one line of numbers per row; NA marks missing.
inline std::string dump_matrix(const FeatureMatrix& m) {
  std::string out;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (c) out += ",";
    out += m.columns[c].name() + ":" + std::string(family_name(m.columns[c].family)) + ":" +
           std::string(kind_name(m.columns[c].kind));
  }
  out += "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ",";
      out += m.is_missing(r, c) ? "NA" : format_double(m.at(r, c));
    }
    out += "\n";
  }
  return out;
}

}  // namespace povml
