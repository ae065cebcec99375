#pragma once

// Underreporting triage: per-household scores placed next to income
// discrepancy and distance from the minimum welfare line, and a tunable
// ranking over the three.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "povml/eval.hpp"

namespace povml {

/// Pinned so that clients and tests can tell which scoring formula produced a ranking.
inline constexpr std::string_view kFormulaVersion = "linear-minmax-triangular/1";

/// Default fading distance as a share of the household's minimum welfare line.
inline constexpr double kDefaultTauShare = 0.25;

// ---------------------------------------------------------------------------
// Fitted pipeline

/// Everything needed to score new households for one task: fit on all rows of a job.
struct ScoringPipeline {
  Task task = Task::underreporting();
  std::string region;
  FoldArtifacts artifacts;
};

inline void to_json(nlohmann::json& j, const ScoringPipeline& p) {
  j = {{"task", p.task.name()},
       {"region", p.region},
       {"feature_set", feature_set_name(p.artifacts.feature_set)},
       {"averages", p.artifacts.averages ? nlohmann::json(*p.artifacts.averages) : nlohmann::json()},
       {"preprocessor", p.artifacts.preprocessor},
       {"model", p.artifacts.model}};
}

inline void from_json(const nlohmann::json& j, ScoringPipeline& p) {
  auto task = Task::parse(j.at("task").get<std::string>());
  auto set = parse_feature_set(j.at("feature_set").get<std::string>());
  if (!task || !set) throw SchemaError("pipeline names an unknown task or feature set");
  p.task = *task;
  p.region = j.at("region").get<std::string>();
  p.artifacts.feature_set = *set;
  p.artifacts.averages.reset();
  if (!j.at("averages").is_null()) p.artifacts.averages = j.at("averages").get<SpatialAverages>();
  p.artifacts.preprocessor = j.at("preprocessor").get<Preprocessor>();
  p.artifacts.model = j.at("model").get<TrainedModel>();
}

/// Fits the fold pipeline on every row of `data`.
inline ScoringPipeline fit_pipeline(const CorpusIndex& index, const TaskData& data, FeatureSet set,
                                    const ModelSpec& spec) {
  auto out = fit_fold(index, data.task, set, spec, data.ids, data.labels, {});
  return {data.task, data.region, std::move(out.artifacts)};
}

// ---------------------------------------------------------------------------
// Records

struct TriageRecord {
  std::string household_id;
  double p_underreport = 0;
  double estimated_income = 0;
  double self_reported_income = 0;
  /// estimated - self-reported, currency/month.
  double income_discrepancy = 0;
  double lbm = 0;
  /// estimated - lbm, signed currency/month.
  double distance_from_line = 0;
  bool eligible = false;
  /// Against the default fading distance.
  bool faded = false;
  bool operator==(const TriageRecord&) const = default;
};

inline double default_tau(double lbm) { return kDefaultTauShare * lbm; }

/// Builds a record from its three inputs; derived fields follow the sign conventions.
inline TriageRecord make_record(std::string id, double p, double estimated, double self_reported, double lbm) {
  TriageRecord r;
  r.household_id = std::move(id);
  r.p_underreport = p;
  r.estimated_income = estimated;
  r.self_reported_income = self_reported;
  r.income_discrepancy = estimated - self_reported;
  r.lbm = lbm;
  r.distance_from_line = estimated - lbm;
  r.eligible = r.distance_from_line < 0;
  r.faded = std::abs(r.distance_from_line) > default_tau(lbm);
  return r;
}

inline void to_json(nlohmann::json& j, const TriageRecord& r) {
  j = {{"household_id", r.household_id},
       {"p_underreport", r.p_underreport},
       {"estimated_income", r.estimated_income},
       {"self_reported_income", r.self_reported_income},
       {"income_discrepancy", r.income_discrepancy},
       {"lbm", r.lbm},
       {"distance_from_line", r.distance_from_line},
       {"eligible", r.eligible},
       {"faded", r.faded}};
}

inline void from_json(const nlohmann::json& j, TriageRecord& r) {
  r = make_record(j.at("household_id").get<std::string>(), j.at("p_underreport").get<double>(),
                  j.at("estimated_income").get<double>(), j.at("self_reported_income").get<double>(),
                  j.at("lbm").get<double>());
}

/// One record per surveyed household in the pipeline's region, sorted by id.
inline std::vector<TriageRecord> score_corpus(const ScoringPipeline& pipeline, const CorpusIndex& index) {
  if (!pipeline.task.is_underreporting()) throw ConfigError("triage needs a model for the underreporting task");
  const auto& c = index.corpus();
  std::vector<std::string> ids;
  for (const auto& s : c.surveys) {
    const auto* h = index.household(s.household_id);
    if (!h) continue;
    if (pipeline.region != kAllRegions && h->region_id != pipeline.region) continue;
    ids.push_back(s.household_id);
  }
  std::sort(ids.begin(), ids.end());
  std::vector<TriageRecord> out;
  if (ids.empty()) return out;
  auto raw = raw_features(index, ids, pipeline.task, pipeline.artifacts.feature_set, pipeline.artifacts.averages);
  auto p = pipeline.artifacts.model.predict_proba(pipeline.artifacts.preprocessor.transform(raw));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto* s = index.survey(ids[i]);
    double lbm = c.config.lines(index.household(ids[i])->location_class).lbm;
    out.push_back(make_record(ids[i], p[i], s->estimated_income, s->self_reported_income, lbm));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranking

struct TriageWeights {
  double w_prob = 1;
  double w_discrepancy = 0;
  double w_proximity = 0;
  /// Fading distance; unset means a share of each household's own line.
  std::optional<double> tau;

  /// Returns the offending field and a message, or nothing when valid.
  std::optional<std::pair<std::string, std::string>> problem() const {
    auto bad = [](double v) { return !std::isfinite(v) || v < 0; };
    if (bad(w_prob)) return std::pair<std::string, std::string>{"w_prob", "must be a finite number >= 0"};
    if (bad(w_discrepancy)) return std::pair<std::string, std::string>{"w_discrepancy", "must be a finite number >= 0"};
    if (bad(w_proximity)) return std::pair<std::string, std::string>{"w_proximity", "must be a finite number >= 0"};
    if (w_prob == 0 && w_discrepancy == 0 && w_proximity == 0)
      return std::pair<std::string, std::string>{"weights", "at least one weight must be positive"};
    if (tau && !(std::isfinite(*tau) && *tau > 0)) return std::pair<std::string, std::string>{"tau", "must be > 0"};
    return std::nullopt;
  }
  void validate() const {
    if (auto p = problem()) throw ConfigError(p->first + " " + p->second);
  }
  double tau_for(double lbm) const { return tau ? *tau : default_tau(lbm); }
};

inline void to_json(nlohmann::json& j, const TriageWeights& w) {
  j = {{"w_prob", w.w_prob}, {"w_discrepancy", w.w_discrepancy}, {"w_proximity", w.w_proximity},
       {"tau", w.tau ? nlohmann::json(*w.tau) : nlohmann::json()}};
}

struct RankedRecord {
  TriageRecord record;
  double score = 0;
  double discrepancy_term = 0;
  double proximity_term = 0;
  /// Fading under the weights' tau.
  bool faded = false;
};

/// Triangular kernel: 1 on the line, 0 at and beyond tau.
inline double proximity(double distance, double tau) { return std::max(0.0, 1.0 - std::abs(distance) / tau); }

/// Non-faded records first, then score descending, then household id.
inline std::vector<RankedRecord> rank(const std::vector<TriageRecord>& records, const TriageWeights& w) {
  w.validate();
  std::vector<RankedRecord> out;
  if (records.empty()) return out;
  // Only self-reports below the estimate motivate follow-up; the rest count as zero.
  double lo = 0, hi = 0;
  bool first = true;
  for (const auto& r : records) {
    double d = std::max(0.0, r.income_discrepancy);
    lo = first ? d : std::min(lo, d);
    hi = first ? d : std::max(hi, d);
    first = false;
  }
  for (const auto& r : records) {
    RankedRecord x;
    x.record = r;
    double d = std::max(0.0, r.income_discrepancy);
    x.discrepancy_term = hi > lo ? (d - lo) / (hi - lo) : 0.0;
    double tau = w.tau_for(r.lbm);
    x.proximity_term = proximity(r.distance_from_line, tau);
    x.faded = std::abs(r.distance_from_line) > tau;
    x.score = w.w_prob * r.p_underreport + w.w_discrepancy * x.discrepancy_term + w.w_proximity * x.proximity_term;
    out.push_back(std::move(x));
  }
  std::sort(out.begin(), out.end(), [](const RankedRecord& a, const RankedRecord& b) {
    if (a.faded != b.faded) return !a.faded;
    if (a.score != b.score) return a.score > b.score;
    return a.record.household_id < b.record.household_id;
  });
  return out;
}

}  // namespace povml
