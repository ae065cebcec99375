#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "povml/common.hpp"

namespace povml {

// ---------------------------------------------------------------------------
// Poverty indicators

enum class PovertyIndicator : int {
  Education = 0,
  HealthServices,
  SocialSecurity,
  DwellingQuality,
  BasicServices,
  Food,
};

inline constexpr std::size_t kNumIndicators = 6;

inline constexpr std::array<PovertyIndicator, kNumIndicators> kAllIndicators = {
    PovertyIndicator::Education,       PovertyIndicator::HealthServices,
    PovertyIndicator::SocialSecurity,  PovertyIndicator::DwellingQuality,
    PovertyIndicator::BasicServices,   PovertyIndicator::Food,
};

inline std::string_view indicator_name(PovertyIndicator k) {
  static constexpr std::array<std::string_view, kNumIndicators> names = {
      "education", "health_services", "social_security", "dwelling_quality", "basic_services", "food"};
  return names[static_cast<std::size_t>(k)];
}

inline std::optional<PovertyIndicator> parse_indicator(std::string_view s) {
  for (auto k : kAllIndicators)
    if (indicator_name(k) == s) return k;
  return std::nullopt;
}

inline std::size_t idx(PovertyIndicator k) { return static_cast<std::size_t>(k); }

enum class LocationClass { Urban, Rural };

inline std::string_view location_class_name(LocationClass c) { return c == LocationClass::Urban ? "urban" : "rural"; }

inline std::optional<LocationClass> parse_location_class(std::string_view s) {
  if (s == "urban") return LocationClass::Urban;
  if (s == "rural") return LocationClass::Rural;
  return std::nullopt;
}

enum class LabelState : std::uint8_t { NotLacking = 0, Lacking = 1, Missing = 2 };

// ---------------------------------------------------------------------------
// Survey schema

enum class AnswerKind { Numeric, Categorical, Boolean };

struct Question {
  std::string id;
  AnswerKind kind;
  bool verifiable;
  /// Categorical levels, ordered from worst to best where the question is ordinal.
  std::vector<std::string> levels;
  /// Lower bound of a numeric answer.
  double min_value = 0.0;
  /// Relative frequency with which the question carries a discrepancy.
  double discrepancy_weight = 0.0;
};

/// Fixed CUIS-style questionnaire. Ordinal order of this table is the column order
/// of surveys.csv.
inline const std::vector<Question>& survey_schema() {
  static const std::vector<Question> schema = {
      {"respondent_age", AnswerKind::Numeric, false, {}, 18, 0},
      {"n_members_reported", AnswerKind::Numeric, true, {}, 1, 0.5},
      {"rooms_reported", AnswerKind::Numeric, true, {}, 1, 0.6},
      {"food_spending", AnswerKind::Numeric, false, {}, 0, 0},
      {"meals_per_day", AnswerKind::Numeric, false, {}, 1, 0},
      {"vegetable_freq", AnswerKind::Numeric, false, {}, 0, 0},
      {"milk_freq", AnswerKind::Numeric, false, {}, 0, 0},
      {"fruit_freq", AnswerKind::Numeric, false, {}, 0, 0},
      {"meat_freq", AnswerKind::Numeric, false, {}, 0, 0},
      {"years_schooling_head", AnswerKind::Numeric, false, {}, 0, 0},
      {"n_children", AnswerKind::Numeric, false, {}, 0, 0},
      {"n_elderly", AnswerKind::Numeric, false, {}, 0, 0},
      {"state_of_birth",
       AnswerKind::Categorical,
       false,
       {"CDMX", "CHIS", "GRO", "JAL", "MEX", "OAX", "OTHER", "PUE", "VER"},
       0,
       0},
      {"occupation", AnswerKind::Categorical, false, {"agricultural", "domestic", "formal", "informal", "unemployed"}, 0, 0},
      {"floor_material", AnswerKind::Categorical, true, {"dirt", "cement", "tile"}, 0, 0.45},
      {"wall_material", AnswerKind::Categorical, true, {"precarious", "adobe", "brick"}, 0, 0.4},
      {"roof_material", AnswerKind::Categorical, true, {"cardboard", "sheet", "concrete"}, 0, 0.4},
      {"water_source", AnswerKind::Categorical, true, {"none", "well", "piped"}, 0, 0.35},
      {"has_stove", AnswerKind::Boolean, true, {}, 0, 3.0},
      {"has_air_conditioning", AnswerKind::Boolean, true, {}, 0, 2.2},
      {"has_refrigerator", AnswerKind::Boolean, true, {}, 0, 0.5},
      {"has_washing_machine", AnswerKind::Boolean, true, {}, 0, 0.45},
      {"has_toilet", AnswerKind::Boolean, true, {}, 0, 0.35},
      {"has_electricity", AnswerKind::Boolean, false, {}, 0, 0},
      {"has_health_insurance", AnswerKind::Boolean, false, {}, 0, 0},
  };
  return schema;
}

inline std::optional<std::size_t> question_index(std::string_view id) {
  const auto& s = survey_schema();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].id == id) return i;
  return std::nullopt;
}

inline std::vector<std::size_t> verifiable_questions() {
  std::vector<std::size_t> out;
  const auto& s = survey_schema();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].verifiable) out.push_back(i);
  return out;
}

/// Census aggregates carried by blocks and localities, as proportions.
inline const std::vector<std::string>& aggregate_names() {
  static const std::vector<std::string> names = {"drainage",  "dirt_floor",   "electricity",    "health_coverage",
                                                 "literacy",  "overcrowding", "piped_water"};
  return names;
}

/// A survey answer: absent, numeric, categorical level, or boolean.
using Answer = std::variant<std::monostate, double, std::string, bool>;

inline bool answer_missing(const Answer& a) { return std::holds_alternative<std::monostate>(a); }

// ---------------------------------------------------------------------------
// Entities

struct WelfareLines {
  double lbm = 0;  // minimum welfare line, currency/month
  double lb = 0;   // welfare line, currency/month
  bool operator==(const WelfareLines&) const = default;
};

struct Coords {
  double latitude = 0;
  double longitude = 0;
  bool operator==(const Coords&) const = default;
};

struct Household {
  std::string household_id;
  std::string region_id;
  std::optional<std::string> locality_id;
  std::optional<std::string> block_id;
  std::optional<Coords> block_coords;
  LocationClass location_class = LocationClass::Urban;
  int n_members = 1;
  bool operator==(const Household&) const = default;
};

struct CuisSurvey {
  std::string household_id;
  /// Indexed by position in survey_schema().
  std::vector<Answer> answers;
  double self_reported_income = 0;
  double estimated_income = 0;
  std::array<LabelState, kNumIndicators> indicator_labels{};
  bool operator==(const CuisSurvey&) const = default;
};

enum class VerificationStatus : std::uint8_t { Match, UnderReported, OverReported };

inline std::string_view verification_status_name(VerificationStatus s) {
  switch (s) {
    case VerificationStatus::Match: return "match";
    case VerificationStatus::UnderReported: return "under";
    case VerificationStatus::OverReported: return "over";
  }
  return "match";
}

struct VerificationRecord {
  std::string household_id;
  /// Keyed by question index; only verifiable questions appear.
  std::map<std::size_t, VerificationStatus> entries;
  bool surveyor_flag = false;

  std::size_t n_discrepancies() const {
    std::size_t n = 0;
    for (const auto& [q, s] : entries) n += s != VerificationStatus::Match;
    return n;
  }
  bool any_discrepancy() const { return n_discrepancies() > 0; }
  bool operator==(const VerificationRecord&) const = default;
};

struct PubTransaction {
  std::string household_id;
  std::string program_id;
  std::string benefit_id;
  double amount = 0;
  Date date;
  bool operator==(const PubTransaction&) const = default;
};

struct CensusBlock {
  std::string block_id;
  std::string locality_id;
  Coords coords;
  std::map<std::string, double> aggregates;
  bool operator==(const CensusBlock&) const = default;
};

struct Locality {
  std::string locality_id;
  std::string region_id;
  LocationClass location_class = LocationClass::Urban;
  Coords coords;
  std::map<std::string, double> aggregates;
  bool operator==(const Locality&) const = default;
};

/// Synthetic-only truth. Never fed to learners.
struct GroundTruth {
  std::string household_id;
  std::array<bool, kNumIndicators> true_indicators{};
  double underreport_propensity = 0;
  double development_level = 0;
  bool operator==(const GroundTruth&) const = default;
};

// ---------------------------------------------------------------------------
// Configuration

inline void to_json(nlohmann::json& j, const WelfareLines& w) { j = {{"lbm", w.lbm}, {"lb", w.lb}}; }
inline void from_json(const nlohmann::json& j, WelfareLines& w) {
  j.at("lbm").get_to(w.lbm);
  j.at("lb").get_to(w.lb);
}

struct CorpusConfig {
  std::int64_t n_households = 10000;
  int n_regions = 34;
  int n_localities = 100;
  int n_blocks_per_locality = 8;
  int n_programs = 8;
  double locality_known_fraction = 0.41;
  double block_known_fraction = 0.85;
  double survey_fraction = 1.0;
  double verification_fraction = 0.06;
  double target_any_discrepancy_rate = 0.70;
  double target_leq3_share = 0.91;
  double social_security_lack_prevalence = 0.92;
  /// Target prevalence for the indicators other than social security.
  double education_prevalence = 0.30;
  double health_services_prevalence = 0.35;
  double dwelling_quality_prevalence = 0.25;
  double basic_services_prevalence = 0.25;
  double food_prevalence = 0.30;
  /// Share of a question's discrepancies that are over-reports.
  std::map<std::string, double> overreport_bias = {{"has_stove", 0.98}, {"has_air_conditioning", 0.99}};
  double default_overreport_bias = 0.30;
  double geographic_signal = 1.5;
  double programmatic_signal = 1.5;
  double geocode_noise_deg = 0.0005;
  double missing_label_rate = 0.02;
  double missing_answer_rate = 0.02;
  double income_underreport_scale = 0.4;
  WelfareLines urban_lines{1330.0, 2660.0};
  WelfareLines rural_lines{950.0, 1720.0};
  Date window_start = Date::from_ymd(2015, 10, 1);
  Date window_end = Date::from_ymd(2015, 12, 31);
  std::uint64_t seed = 42;

  double prevalence_target(PovertyIndicator k) const {
    switch (k) {
      case PovertyIndicator::Education: return education_prevalence;
      case PovertyIndicator::HealthServices: return health_services_prevalence;
      case PovertyIndicator::SocialSecurity: return social_security_lack_prevalence;
      case PovertyIndicator::DwellingQuality: return dwelling_quality_prevalence;
      case PovertyIndicator::BasicServices: return basic_services_prevalence;
      case PovertyIndicator::Food: return food_prevalence;
    }
    return 0.0;
  }

  double bias_for(const std::string& question) const {
    auto it = overreport_bias.find(question);
    return it == overreport_bias.end() ? default_overreport_bias : it->second;
  }

  const WelfareLines& lines(LocationClass c) const { return c == LocationClass::Urban ? urban_lines : rural_lines; }

  void validate() const {
    auto fraction = [](const char* name, double v) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1], got " + format_double(v));
    };
    fraction("locality_known_fraction", locality_known_fraction);
    fraction("block_known_fraction", block_known_fraction);
    fraction("survey_fraction", survey_fraction);
    fraction("verification_fraction", verification_fraction);
    fraction("target_any_discrepancy_rate", target_any_discrepancy_rate);
    fraction("target_leq3_share", target_leq3_share);
    fraction("default_overreport_bias", default_overreport_bias);
    fraction("missing_label_rate", missing_label_rate);
    fraction("missing_answer_rate", missing_answer_rate);
    fraction("income_underreport_scale", income_underreport_scale);
    for (auto k : kAllIndicators) {
      double p = prevalence_target(k);
      if (!(p > 0.0 && p < 1.0))
        throw ConfigError(std::string(indicator_name(k)) + " prevalence must lie in (0,1)");
    }
    for (const auto& [q, b] : overreport_bias) {
      auto qi = question_index(q);
      if (!qi || !survey_schema()[*qi].verifiable) throw ConfigError("overreport_bias names unknown verifiable question " + q);
      fraction(q.c_str(), b);
    }
    if (n_households < 0) throw ConfigError("n_households must be >= 0");
    if (n_regions < 1 || n_regions > 34) throw ConfigError("n_regions must lie in [1,34]");
    if (n_households > 0 && (n_localities < 1 || n_blocks_per_locality < 1))
      throw ConfigError("n_localities and n_blocks_per_locality must be positive");
    if (n_programs < 0) throw ConfigError("n_programs must be >= 0");
    if (!(geographic_signal >= 0) || !(programmatic_signal >= 0)) throw ConfigError("signal strengths must be >= 0");
    if (!(geocode_noise_deg >= 0)) throw ConfigError("geocode_noise_deg must be >= 0");
    for (auto c : {LocationClass::Urban, LocationClass::Rural}) {
      const auto& l = lines(c);
      if (!(0 < l.lbm && l.lbm < l.lb)) throw ConfigError("welfare lines must satisfy 0 < lbm < lb");
    }
    if (window_end < window_start) throw ConfigError("transaction window end precedes start");
  }
};

inline void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = nlohmann::json{
      {"n_households", c.n_households},
      {"n_regions", c.n_regions},
      {"n_localities", c.n_localities},
      {"n_blocks_per_locality", c.n_blocks_per_locality},
      {"n_programs", c.n_programs},
      {"locality_known_fraction", c.locality_known_fraction},
      {"block_known_fraction", c.block_known_fraction},
      {"survey_fraction", c.survey_fraction},
      {"verification_fraction", c.verification_fraction},
      {"target_any_discrepancy_rate", c.target_any_discrepancy_rate},
      {"target_leq3_share", c.target_leq3_share},
      {"social_security_lack_prevalence", c.social_security_lack_prevalence},
      {"education_prevalence", c.education_prevalence},
      {"health_services_prevalence", c.health_services_prevalence},
      {"dwelling_quality_prevalence", c.dwelling_quality_prevalence},
      {"basic_services_prevalence", c.basic_services_prevalence},
      {"food_prevalence", c.food_prevalence},
      {"overreport_bias", c.overreport_bias},
      {"default_overreport_bias", c.default_overreport_bias},
      {"geographic_signal", c.geographic_signal},
      {"programmatic_signal", c.programmatic_signal},
      {"geocode_noise_deg", c.geocode_noise_deg},
      {"missing_label_rate", c.missing_label_rate},
      {"missing_answer_rate", c.missing_answer_rate},
      {"income_underreport_scale", c.income_underreport_scale},
      {"urban_lines", {{"lbm", c.urban_lines.lbm}, {"lb", c.urban_lines.lb}}},
      {"rural_lines", {{"lbm", c.rural_lines.lbm}, {"lb", c.rural_lines.lb}}},
      {"window_start", c.window_start.str()},
      {"window_end", c.window_end.str()},
      {"seed", c.seed},
  };
}

/// Reads a config, starting from defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, CorpusConfig& c) {
  if (!j.is_object()) throw ConfigError("corpus config must be a JSON object");
  const nlohmann::json defaults = CorpusConfig{};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!defaults.contains(it.key())) throw ConfigError("unknown corpus config key '" + it.key() + "'");
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("corpus config key '") + key + "': " + e.what());
    }
  };
  get("n_households", c.n_households);
  get("n_regions", c.n_regions);
  get("n_localities", c.n_localities);
  get("n_blocks_per_locality", c.n_blocks_per_locality);
  get("n_programs", c.n_programs);
  get("locality_known_fraction", c.locality_known_fraction);
  get("block_known_fraction", c.block_known_fraction);
  get("survey_fraction", c.survey_fraction);
  get("verification_fraction", c.verification_fraction);
  get("target_any_discrepancy_rate", c.target_any_discrepancy_rate);
  get("target_leq3_share", c.target_leq3_share);
  get("social_security_lack_prevalence", c.social_security_lack_prevalence);
  get("education_prevalence", c.education_prevalence);
  get("health_services_prevalence", c.health_services_prevalence);
  get("dwelling_quality_prevalence", c.dwelling_quality_prevalence);
  get("basic_services_prevalence", c.basic_services_prevalence);
  get("food_prevalence", c.food_prevalence);
  get("overreport_bias", c.overreport_bias);
  get("default_overreport_bias", c.default_overreport_bias);
  get("geographic_signal", c.geographic_signal);
  get("programmatic_signal", c.programmatic_signal);
  get("geocode_noise_deg", c.geocode_noise_deg);
  get("missing_label_rate", c.missing_label_rate);
  get("missing_answer_rate", c.missing_answer_rate);
  get("income_underreport_scale", c.income_underreport_scale);
  get("seed", c.seed);
  for (auto [key, lines] : {std::pair{"urban_lines", &c.urban_lines}, std::pair{"rural_lines", &c.rural_lines}}) {
    if (!j.contains(key)) continue;
    get(key, *lines);
  }
  for (auto [key, date] : {std::pair{"window_start", &c.window_start}, std::pair{"window_end", &c.window_end}}) {
    if (!j.contains(key)) continue;
    auto d = Date::parse(j.at(key).get<std::string>());
    if (!d) throw ConfigError(std::string("corpus config key '") + key + "' is not an ISO-8601 date");
    *date = *d;
  }
}

// ---------------------------------------------------------------------------
// Planted generative model, echoed so that Bayes-optimal scores can be recomputed.

struct ProgramArchetype {
  std::string name;
  double base_logit;
  double poverty_coef;  // multiplies -development_level
  double elderly_coef;  // multiplies [respondent_age >= 65]
  std::array<double, kNumIndicators> indicator_effects;
  double payment_amount;
};

struct PlantedModel {
  std::array<double, kNumIndicators> intercepts{};
  std::array<double, kNumIndicators> geographic_coefs{};
  /// programs x indicators, already scaled by the programmatic signal strength.
  std::vector<std::array<double, kNumIndicators>> program_effects;
  bool operator==(const PlantedModel&) const = default;

  /// Indicator probability given development level and program enrollment vector.
  double probability(PovertyIndicator k, double development, const std::vector<bool>& enrolled) const {
    double z = intercepts[idx(k)] - geographic_coefs[idx(k)] * development;
    for (std::size_t p = 0; p < program_effects.size() && p < enrolled.size(); ++p)
      if (enrolled[p]) z += program_effects[p][idx(k)];
    return 1.0 / (1.0 + std::exp(-z));
  }
};

inline void to_json(nlohmann::json& j, const PlantedModel& m) {
  j = {{"intercepts", m.intercepts}, {"geographic_coefs", m.geographic_coefs}, {"program_effects", m.program_effects}};
}
inline void from_json(const nlohmann::json& j, PlantedModel& m) {
  j.at("intercepts").get_to(m.intercepts);
  j.at("geographic_coefs").get_to(m.geographic_coefs);
  j.at("program_effects").get_to(m.program_effects);
}

// ---------------------------------------------------------------------------
// Corpus

inline constexpr int kSchemaVersion = 1;

struct Corpus {
  CorpusConfig config;
  std::vector<std::string> programs;
  std::vector<Locality> localities;
  std::vector<CensusBlock> blocks;
  std::vector<Household> households;
  std::vector<CuisSurvey> surveys;
  std::vector<VerificationRecord> verifications;
  std::vector<PubTransaction> transactions;
  std::vector<GroundTruth> ground_truth;
  PlantedModel planted;

  bool operator==(const Corpus& o) const {
    return nlohmann::json(config) == nlohmann::json(o.config) && programs == o.programs &&
           localities == o.localities && blocks == o.blocks && households == o.households && surveys == o.surveys &&
           verifications == o.verifications && transactions == o.transactions && ground_truth == o.ground_truth &&
           planted == o.planted;
  }

  std::vector<std::string> region_ids() const {
    std::vector<std::string> out;
    for (int r = 1; r <= config.n_regions; ++r) out.push_back("R" + std::to_string(r));
    return out;
  }
};

/// Read-only lookups over a corpus. The corpus must outlive the index.
class CorpusIndex {
 public:
  explicit CorpusIndex(const Corpus& c) : corpus_(&c) {
    for (std::size_t i = 0; i < c.households.size(); ++i) household_[c.households[i].household_id] = i;
    for (std::size_t i = 0; i < c.surveys.size(); ++i) survey_[c.surveys[i].household_id] = i;
    for (std::size_t i = 0; i < c.verifications.size(); ++i) verification_[c.verifications[i].household_id] = i;
    for (std::size_t i = 0; i < c.blocks.size(); ++i) block_[c.blocks[i].block_id] = i;
    for (std::size_t i = 0; i < c.localities.size(); ++i) locality_[c.localities[i].locality_id] = i;
    for (std::size_t i = 0; i < c.ground_truth.size(); ++i) truth_[c.ground_truth[i].household_id] = i;
    for (std::size_t i = 0; i < c.programs.size(); ++i) program_[c.programs[i]] = i;
    for (std::size_t i = 0; i < c.transactions.size(); ++i)
      transactions_[c.transactions[i].household_id].push_back(i);
  }

  const Corpus& corpus() const { return *corpus_; }

  const Household* household(const std::string& id) const { return find(household_, corpus_->households, id); }
  const CuisSurvey* survey(const std::string& id) const { return find(survey_, corpus_->surveys, id); }
  const VerificationRecord* verification(const std::string& id) const {
    return find(verification_, corpus_->verifications, id);
  }
  const CensusBlock* block(const std::string& id) const { return find(block_, corpus_->blocks, id); }
  const Locality* locality(const std::string& id) const { return find(locality_, corpus_->localities, id); }
  const GroundTruth* truth(const std::string& id) const { return find(truth_, corpus_->ground_truth, id); }
  std::optional<std::size_t> program(const std::string& id) const {
    auto it = program_.find(id);
    if (it == program_.end()) return std::nullopt;
    return it->second;
  }
  /// Indices into corpus().transactions, in file order.
  const std::vector<std::size_t>& transactions(const std::string& id) const {
    static const std::vector<std::size_t> empty;
    auto it = transactions_.find(id);
    return it == transactions_.end() ? empty : it->second;
  }

 private:
  template <typename T>
  static const T* find(const std::unordered_map<std::string, std::size_t>& m, const std::vector<T>& v,
                       const std::string& id) {
    auto it = m.find(id);
    return it == m.end() ? nullptr : &v[it->second];
  }

  const Corpus* corpus_;
  std::unordered_map<std::string, std::size_t> household_, survey_, verification_, block_, locality_, truth_, program_;
  std::unordered_map<std::string, std::vector<std::size_t>> transactions_;
};

}  // namespace povml
