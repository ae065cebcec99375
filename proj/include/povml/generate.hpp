#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "povml/corpus.hpp"

namespace povml {

namespace detail {

inline double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

inline std::string padded(const char* prefix, std::size_t n, int width) {
  std::string digits = std::to_string(n);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

/// Weighted sampling of `m` items without replacement (Efraimidis-Spirakis keys).
/// Returns chosen positions in ascending order.
inline std::vector<std::size_t> weighted_sample(const std::vector<double>& weights, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double u = std::max(unif(rng), 1e-300);
    double w = std::max(weights[i], 1e-12);
    keys.emplace_back(std::log(u) / w, i);
  }
  m = std::min(m, keys.size());
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(m), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(keys[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

/// Program archetypes. Effects are on the logit of lacking each indicator, in the
/// order education, health, social security, dwelling, basic services, food.
inline const std::vector<ProgramArchetype>& program_archetypes() {
  static const std::vector<ProgramArchetype> a = {
      {"senior_pension", -2.6, 0.3, 3.2, {1.6, 0.3, 0, 0, 0, 0}, 1160},
      {"food_support", -1.2, 0.4, 0.0, {-0.9, 0, 0, 0, 0, 1.4}, 640},
      {"scholarship", -1.3, 0.3, -1.5, {-1.4, 0, 0, 0, 0, 0}, 820},
      {"milk_distribution", -1.5, 0.3, 0.0, {-0.6, 0, 0, 0, 0, 0.8}, 90},
      {"health_enrollment", -1.0, 0.3, 0.3, {0, -1.6, 0, 0, 0, 0}, 300},
      {"literacy", -2.0, 0.3, 0.5, {1.6, 0, 0, 0, 0, 0}, 210},
      {"renewable_energy", -1.8, 0.2, 0.0, {-0.7, 0, 0, 0, 0, 0}, 450},
      {"cash_transfer", -0.8, 0.4, 0.0, {0, 1.0, 0, 0, 0, 1.0}, 980},
  };
  return a;
}

inline ProgramArchetype archetype_for(std::size_t p) {
  const auto& a = program_archetypes();
  if (p < a.size()) return a[p];
  return {"generic", -2.0, 0.2, 0.0, {0, 0, 0, 0, 0, 0}, 400};
}

/// Development loading of each indicator; social security carries no signal.
inline constexpr std::array<double, kNumIndicators> kGeographicLoading = {0.25, 0.25, 0.0, 1.0, 1.0, 0.25};

/// Intercept such that the mean probability over `offsets` equals `target`.
inline double calibrate_intercept(const std::vector<double>& offsets, double target) {
  if (offsets.empty()) return std::log(target / (1.0 - target));
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double o : offsets) mean += sigmoid(mid + o);
    mean /= static_cast<double>(offsets.size());
    (mean < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct LatentHousehold {
  std::size_t block = 0;
  double development = 0;
  int age = 40;
  std::vector<bool> enrolled;
  std::array<bool, kNumIndicators> truth{};
  double propensity = 0;
};

// Rewrites a reported answer in the given direction. Over-reporting claims a
// better situation than observed; under-reporting claims a worse one.
inline void apply_discrepancy(const Question& q, bool over, Answer& reported, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> delta(1, 2);
  switch (q.kind) {
    case AnswerKind::Boolean:
      reported = over;
      break;
    case AnswerKind::Numeric: {
      double truth = std::get<double>(reported);
      int d = delta(rng);
      reported = over ? truth + d : std::max(q.min_value, truth - d);
      break;
    }
    case AnswerKind::Categorical:
      reported = over ? q.levels.back() : q.levels.front();
      break;
  }
}

}  // namespace detail

/// Generates a reproducible synthetic population with planted geographic,
/// programmatic and misreporting structure. Deterministic in config.seed.
inline Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  Corpus c;
  c.config = config;
  const std::size_t n_programs = static_cast<std::size_t>(config.n_programs);
  for (std::size_t p = 0; p < n_programs; ++p) c.programs.push_back(detail::padded("P", p + 1, 2));
  c.planted.geographic_coefs = detail::kGeographicLoading;
  for (auto& g : c.planted.geographic_coefs) g *= config.geographic_signal;
  for (std::size_t p = 0; p < n_programs; ++p) {
    auto e = detail::archetype_for(p).indicator_effects;
    for (auto& v : e) v *= config.programmatic_signal;
    c.planted.program_effects.push_back(e);
  }
  const std::size_t n = static_cast<std::size_t>(config.n_households);
  if (n == 0) {
    for (auto k : kAllIndicators) {
      double t = config.prevalence_target(k);
      c.planted.intercepts[idx(k)] = std::log(t / (1.0 - t));
    }
    return c;
  }

  std::mt19937_64 geo_rng(mix_seed(config.seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Regions, localities, blocks -----------------------------------------------
  const std::size_t n_regions = static_cast<std::size_t>(config.n_regions);
  std::vector<Coords> region_center(n_regions);
  std::vector<double> region_dev(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    region_center[r] = {16.0 + 15.0 * unif(geo_rng), -115.0 + 28.0 * unif(geo_rng)};
    region_dev[r] = 0.4 * normal(geo_rng);
  }
  const std::size_t n_loc = static_cast<std::size_t>(config.n_localities);
  const std::size_t bpl = static_cast<std::size_t>(config.n_blocks_per_locality);
  std::vector<double> block_dev;
  std::vector<std::size_t> block_locality;
  const auto& agg_names = aggregate_names();
  // Per aggregate: intercept and development slope of its logit.
  const std::map<std::string, std::pair<double, double>> agg_model = {
      {"drainage", {0.5, 1.2}},      {"dirt_floor", {-1.5, -1.0}},   {"electricity", {2.0, 1.0}},
      {"health_coverage", {0.3, 0.6}}, {"literacy", {1.5, 0.8}},     {"overcrowding", {-0.8, -0.7}},
      {"piped_water", {1.0, 1.2}}};
  for (std::size_t l = 0; l < n_loc; ++l) {
    Locality loc;
    loc.locality_id = detail::padded("L", l + 1, 4);
    std::size_t r = l % n_regions;
    loc.region_id = "R" + std::to_string(r + 1);
    bool urban = unif(geo_rng) < 0.55;
    loc.location_class = urban ? LocationClass::Urban : LocationClass::Rural;
    double dev_loc = region_dev[r] + (urban ? 0.4 : -0.4) + 0.6 * normal(geo_rng);
    loc.coords = {region_center[r].latitude + 0.6 * normal(geo_rng), region_center[r].longitude + 0.6 * normal(geo_rng)};
    std::map<std::string, double> agg_sum;
    for (std::size_t b = 0; b < bpl; ++b) {
      CensusBlock blk;
      blk.block_id = loc.locality_id + "-B" + detail::padded("", b + 1, 3);
      blk.locality_id = loc.locality_id;
      blk.coords = {loc.coords.latitude + 0.01 * normal(geo_rng), loc.coords.longitude + 0.01 * normal(geo_rng)};
      double dev = dev_loc + 0.5 * normal(geo_rng);
      for (const auto& name : agg_names) {
        auto [a, s] = agg_model.at(name);
        double v = std::round(sigmoid(a + s * dev + 0.3 * normal(geo_rng)) * 1e4) / 1e4;
        blk.aggregates[name] = v;
        agg_sum[name] += v;
      }
      block_dev.push_back(dev);
      block_locality.push_back(l);
      c.blocks.push_back(std::move(blk));
    }
    for (const auto& name : agg_names) loc.aggregates[name] = std::round(agg_sum[name] / static_cast<double>(bpl) * 1e4) / 1e4;
    c.localities.push_back(std::move(loc));
  }

  // Households ------------------------------------------------------------------
  std::mt19937_64 hh_rng(mix_seed(config.seed, 2));
  std::uniform_int_distribution<std::size_t> pick_block(0, c.blocks.size() - 1);
  std::poisson_distribution<int> members(2.6);
  std::vector<detail::LatentHousehold> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& lat = latent[i];
    lat.block = pick_block(hh_rng);
    lat.development = block_dev[lat.block];
    const auto& blk = c.blocks[lat.block];
    const auto& loc = c.localities[block_locality[lat.block]];
    Household h;
    h.household_id = detail::padded("H", i + 1, 7);
    h.region_id = loc.region_id;
    h.location_class = loc.location_class;
    h.n_members = 1 + std::min(members(hh_rng), 11);
    bool locality_known = unif(hh_rng) < config.locality_known_fraction;
    bool block_known = unif(hh_rng) < config.block_known_fraction;
    double dlat = config.geocode_noise_deg * normal(hh_rng);
    double dlon = config.geocode_noise_deg * normal(hh_rng);
    if (locality_known) {
      h.locality_id = loc.locality_id;
      if (block_known) {
        h.block_id = blk.block_id;
        h.block_coords = Coords{blk.coords.latitude + dlat, blk.coords.longitude + dlon};
      }
    }
    lat.age = static_cast<int>(std::clamp(std::round(46.0 + 16.0 * normal(hh_rng)), 18.0, 95.0));
    c.households.push_back(std::move(h));
  }

  // Program enrollment and indicators -----------------------------------------
  std::mt19937_64 prog_rng(mix_seed(config.seed, 3));
  for (auto& lat : latent) {
    lat.enrolled.assign(n_programs, false);
    for (std::size_t p = 0; p < n_programs; ++p) {
      auto a = detail::archetype_for(p);
      double z = a.base_logit - a.poverty_coef * lat.development + a.elderly_coef * (lat.age >= 65 ? 1.0 : 0.0);
      lat.enrolled[p] = unif(prog_rng) < sigmoid(z);
    }
  }
  std::mt19937_64 ind_rng(mix_seed(config.seed, 4));
  for (auto k : kAllIndicators) {
    std::vector<double> offsets(n);
    for (std::size_t i = 0; i < n; ++i) {
      double z = -c.planted.geographic_coefs[idx(k)] * latent[i].development;
      for (std::size_t p = 0; p < n_programs; ++p)
        if (latent[i].enrolled[p]) z += c.planted.program_effects[p][idx(k)];
      offsets[i] = z;
    }
    double b = detail::calibrate_intercept(offsets, config.prevalence_target(k));
    c.planted.intercepts[idx(k)] = b;
    for (std::size_t i = 0; i < n; ++i) latent[i].truth[idx(k)] = unif(ind_rng) < sigmoid(b + offsets[i]);
  }

  // Transactions ----------------------------------------------------------------
  std::mt19937_64 tx_rng(mix_seed(config.seed, 5));
  std::lognormal_distribution<double> amount_noise(0.0, 0.2);
  std::vector<Date> month_starts;
  {
    auto ymd = config.window_start.ymd();
    std::chrono::year_month ym{ymd.year(), ymd.month()};
    auto end = config.window_end.ymd();
    std::chrono::year_month end_ym{end.year(), end.month()};
    for (; ym <= end_ym; ym += std::chrono::months{1})
      month_starts.push_back(Date{std::chrono::sys_days{ym / std::chrono::day{1}}});
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<PubTransaction> txs;
    for (std::size_t p = 0; p < n_programs; ++p) {
      if (!latent[i].enrolled[p]) continue;
      auto a = detail::archetype_for(p);
      std::string benefit = c.programs[p] + "-B" + std::to_string(1 + (unif(tx_rng) < 0.3 ? 1 : 0));
      double base = a.payment_amount * amount_noise(tx_rng);
      bool regular = unif(tx_rng) < 0.7;
      for (std::size_t m = 0; m < month_starts.size(); ++m) {
        if (!regular && unif(tx_rng) < 0.5 && !(m + 1 == month_starts.size() && txs.empty())) continue;
        Date start = std::max(month_starts[m], config.window_start);
        Date month_end = m + 1 < month_starts.size() ? Date{month_starts[m + 1].days - std::chrono::days{1}} : config.window_end;
        long long span = days_between(start, month_end);
        std::uniform_int_distribution<long long> day(0, std::max(0LL, span));
        PubTransaction t;
        t.household_id = c.households[i].household_id;
        t.program_id = c.programs[p];
        t.benefit_id = benefit;
        t.amount = detail::round_cents(base * (0.95 + 0.1 * unif(tx_rng)));
        t.date = Date{start.days + std::chrono::days{day(tx_rng)}};
        txs.push_back(std::move(t));
      }
    }
    std::stable_sort(txs.begin(), txs.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    for (auto& t : txs) c.transactions.push_back(std::move(t));
  }

  std::mt19937_64 prop_rng(mix_seed(config.seed, 9));
  for (auto& lat : latent)
    lat.propensity = sigmoid(-0.8 * lat.development + 0.03 * (lat.age - 46) + 0.7 * normal(prop_rng));

  // Surveys ---------------------------------------------------------------------
  std::mt19937_64 sv_rng(mix_seed(config.seed, 6));
  const auto& schema = survey_schema();
  static const std::array<const char*, 9> home_states = {"CDMX", "CHIS", "GRO", "JAL", "MEX", "OAX", "OTHER", "PUE", "VER"};
  auto bern = [&](double p) { return unif(sv_rng) < p; };
  auto binom7 = [&](double p) {
    double k = 0;
    for (int d = 0; d < 7; ++d) k += bern(p);
    return k;
  };
  std::vector<std::size_t> surveyed;
  std::vector<std::vector<Answer>> truth_answers;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(unif(sv_rng) < config.survey_fraction)) continue;
    const auto& lat = latent[i];
    const auto& t = lat.truth;
    double dev = lat.development;
    auto lacking = [&](PovertyIndicator k) { return t[idx(k)] ? 1.0 : 0.0; };
    std::vector<Answer> a(schema.size());
    auto set = [&](const char* id, Answer v) { a[*question_index(id)] = std::move(v); };
    set("respondent_age", static_cast<double>(lat.age));
    set("n_members_reported", static_cast<double>(c.households[i].n_members));
    set("rooms_reported", static_cast<double>(1 + std::min(7, std::poisson_distribution<int>(std::exp(0.4 + 0.2 * dev - 0.4 * lacking(PovertyIndicator::DwellingQuality)))(sv_rng))));
    set("food_spending", detail::round_cents(std::exp(7.0 + 0.25 * dev - 0.2 * lacking(PovertyIndicator::Food) + 0.3 * normal(sv_rng))));
    set("meals_per_day", 3.0 - (bern(t[idx(PovertyIndicator::Food)] ? 0.5 : 0.1) ? 1.0 : 0.0));
    double food_logit = 0.3 + 0.3 * dev - 0.8 * lacking(PovertyIndicator::Food);
    set("vegetable_freq", binom7(sigmoid(food_logit)));
    set("milk_freq", binom7(sigmoid(food_logit - 0.2)));
    set("fruit_freq", binom7(sigmoid(food_logit - 0.4)));
    set("meat_freq", binom7(sigmoid(food_logit - 1.0)));
    set("years_schooling_head", std::max(0.0, std::round(8.0 + 1.5 * dev - 3.0 * lacking(PovertyIndicator::Education) + 2.5 * normal(sv_rng))));
    set("n_children", static_cast<double>(std::poisson_distribution<int>(1.3)(sv_rng)));
    set("n_elderly", static_cast<double>((lat.age >= 65 ? 1 : 0) + (bern(0.1) ? 1 : 0)));
    {
      std::size_t r = static_cast<std::size_t>(std::stoi(c.households[i].region_id.substr(1)) - 1);
      std::string state = home_states[r % home_states.size()];
      double u = unif(sv_rng);
      if (u > 0.6) state = u < 0.8 ? "MEX" : home_states[std::uniform_int_distribution<std::size_t>(0, home_states.size() - 1)(sv_rng)];
      set("state_of_birth", state);
    }
    {
      bool urban = c.households[i].location_class == LocationClass::Urban;
      double pf = sigmoid(-1.0 + 0.8 * dev);
      double u = unif(sv_rng);
      std::string occ;
      if (u < pf) occ = "formal";
      else if (u < pf + (1 - pf) * (urban ? 0.15 : 0.45)) occ = "agricultural";
      else if (u < pf + (1 - pf) * (urban ? 0.65 : 0.75)) occ = "informal";
      else if (u < pf + (1 - pf) * 0.85) occ = "domestic";
      else occ = "unemployed";
      set("occupation", occ);
    }
    auto ordinal = [&](const char* id, double z) {
      const auto& lv = schema[*question_index(id)].levels;
      double u = sigmoid(z + 0.8 * normal(sv_rng));
      set(id, lv[std::min(lv.size() - 1, static_cast<std::size_t>(u * static_cast<double>(lv.size())))]);
    };
    double dwell = lacking(PovertyIndicator::DwellingQuality);
    double basic = lacking(PovertyIndicator::BasicServices);
    ordinal("floor_material", 0.6 + 0.6 * dev - 1.5 * dwell);
    ordinal("wall_material", 0.5 + 0.6 * dev - 1.5 * dwell);
    ordinal("roof_material", 0.4 + 0.6 * dev - 1.2 * dwell);
    ordinal("water_source", 0.8 + 0.5 * dev - 2.0 * basic);
    set("has_stove", bern(sigmoid(1.0 + 1.2 * dev)));
    set("has_air_conditioning", bern(sigmoid(-2.2 + 0.8 * dev)));
    set("has_refrigerator", bern(sigmoid(0.8 + 1.0 * dev)));
    set("has_washing_machine", bern(sigmoid(-0.2 + 1.0 * dev)));
    set("has_toilet", bern(sigmoid(1.0 + 1.0 * dev - 1.5 * basic)));
    set("has_electricity", bern(sigmoid(2.5 + dev - 1.5 * basic)));
    set("has_health_insurance", bern(t[idx(PovertyIndicator::HealthServices)] ? 0.1 : 0.8));
    surveyed.push_back(i);
    truth_answers.push_back(std::move(a));
  }

  // Misreporting and home verification -----------------------------------------
  std::mt19937_64 mr_rng(mix_seed(config.seed, 7));
  const auto verifiable = verifiable_questions();
  std::vector<bool> verified(surveyed.size(), false);
  {
    std::size_t n_verified = static_cast<std::size_t>(std::llround(config.verification_fraction * static_cast<double>(surveyed.size())));
    std::vector<std::size_t> order(surveyed.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), mr_rng);
    for (std::size_t j = 0; j < n_verified; ++j) verified[order[j]] = true;
  }
  std::vector<std::vector<Answer>> reported = truth_answers;
  std::vector<std::map<std::size_t, VerificationStatus>> status(surveyed.size());
  // Quotas are applied separately to the verified and unverified groups so the
  // observed rates match their targets exactly up to rounding.
  const double p_geom = 1.0 - std::cbrt(1.0 - config.target_leq3_share);
  for (bool group : {true, false}) {
    std::vector<std::size_t> members_in;
    std::vector<double> weights;
    for (std::size_t s = 0; s < surveyed.size(); ++s)
      if (verified[s] == group) {
        members_in.push_back(s);
        weights.push_back(latent[surveyed[s]].propensity);
      }
    std::size_t m = static_cast<std::size_t>(std::llround(config.target_any_discrepancy_rate * static_cast<double>(members_in.size())));
    auto chosen = detail::weighted_sample(weights, m, mr_rng);
    std::size_t n_leq3 = static_cast<std::size_t>(std::llround(config.target_leq3_share * static_cast<double>(chosen.size())));
    std::vector<double> w_many;
    for (auto pos : chosen) w_many.push_back(weights[pos]);
    auto many = detail::weighted_sample(w_many, chosen.size() - n_leq3, mr_rng);
    std::vector<bool> is_many(chosen.size(), false);
    for (auto j : many) is_many[j] = true;
    // (survey position, question) pairs per question, for direction quotas.
    std::map<std::size_t, std::vector<std::size_t>> by_question;
    std::geometric_distribution<int> geom(p_geom);
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      std::size_t s = members_in[chosen[j]];
      std::size_t k;
      if (is_many[j]) {
        k = std::min<std::size_t>(verifiable.size(), 4 + static_cast<std::size_t>(geom(mr_rng)));
      } else {
        do k = 1 + static_cast<std::size_t>(geom(mr_rng));
        while (k > 3);
      }
      std::vector<double> qw;
      for (auto q : verifiable) qw.push_back(schema[q].discrepancy_weight);
      for (auto qpos : detail::weighted_sample(qw, k, mr_rng)) by_question[verifiable[qpos]].push_back(s);
    }
    for (auto& [q, holders] : by_question) {
      std::shuffle(holders.begin(), holders.end(), mr_rng);
      std::size_t n_over = static_cast<std::size_t>(std::llround(config.bias_for(schema[q].id) * static_cast<double>(holders.size())));
      std::sort(holders.begin(), holders.begin() + static_cast<std::ptrdiff_t>(n_over));
      for (std::size_t h = 0; h < holders.size(); ++h) {
        bool over = h < n_over;
        std::size_t s = holders[h];
        Answer& rep = reported[s][q];
        Answer& obs = truth_answers[s][q];
        detail::apply_discrepancy(schema[q], over, rep, mr_rng);
        // Keep the observed value consistent with the direction.
        switch (schema[q].kind) {
          case AnswerKind::Boolean: obs = !over; break;
          case AnswerKind::Numeric: {
            double r = std::get<double>(rep), o = std::get<double>(obs);
            if (over && !(r > o)) obs = r - 1;
            if (!over && !(r < o)) obs = r + 1;
            break;
          }
          case AnswerKind::Categorical: {
            const auto& lv = schema[q].levels;
            if (over && std::get<std::string>(obs) == lv.back()) obs = lv[lv.size() - 2];
            if (!over && std::get<std::string>(obs) == lv.front()) obs = lv[1];
            break;
          }
        }
        status[s][q] = over ? VerificationStatus::OverReported : VerificationStatus::UnderReported;
      }
    }
  }

  // Assemble surveys, verification records, ground truth ------------------------
  std::mt19937_64 out_rng(mix_seed(config.seed, 8));
  for (std::size_t s = 0; s < surveyed.size(); ++s) {
    std::size_t i = surveyed[s];
    const auto& lat = latent[i];
    CuisSurvey sv;
    sv.household_id = c.households[i].household_id;
    sv.answers = reported[s];
    for (std::size_t q = 0; q < schema.size(); ++q)
      if (!schema[q].verifiable && unif(out_rng) < config.missing_answer_rate) sv.answers[q] = std::monostate{};
    double n_lacking = 0;
    for (bool b : lat.truth) n_lacking += b;
    const auto& lines = config.lines(c.households[i].location_class);
    double est = lines.lbm * 1.3 * std::exp(-0.15 * n_lacking + 0.15 * lat.development + 0.3 * normal(out_rng));
    sv.estimated_income = detail::round_cents(est);
    double u = std::clamp(config.income_underreport_scale * lat.propensity, 0.0, 1.0);
    sv.self_reported_income = detail::round_cents(sv.estimated_income * (1.0 - u));
    for (auto k : kAllIndicators) {
      bool missing = unif(out_rng) < config.missing_label_rate;
      sv.indicator_labels[idx(k)] =
          missing ? LabelState::Missing : (lat.truth[idx(k)] ? LabelState::Lacking : LabelState::NotLacking);
    }
    c.surveys.push_back(std::move(sv));
    if (verified[s]) {
      VerificationRecord v;
      v.household_id = c.households[i].household_id;
      bool any_under = false;
      for (auto q : verifiable) {
        auto it = status[s].find(q);
        auto st = it == status[s].end() ? VerificationStatus::Match : it->second;
        any_under |= st == VerificationStatus::UnderReported;
        v.entries[q] = st;
      }
      v.surveyor_flag = any_under ? unif(out_rng) < 0.8 : unif(out_rng) < 0.05;
      c.verifications.push_back(std::move(v));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    GroundTruth g;
    g.household_id = c.households[i].household_id;
    g.true_indicators = latent[i].truth;
    g.development_level = latent[i].development;
    g.underreport_propensity = latent[i].propensity;
    c.ground_truth.push_back(g);
  }
  return c;
}

}  // namespace povml
