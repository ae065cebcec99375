// Acceptance checks: one PASS/FAIL line per criterion at its stated tolerance.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "povml/povml.hpp"

using namespace povml;
using namespace povml::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += pass ? 0 : 1;
}

/// Runs a criterion, turning an unexpected exception into a failure line.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [pass, detail] = body();
    report(pass, name, detail);
  } catch (const std::exception& e) {
    report(false, name, std::string("exception: ") + e.what());
  }
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

constexpr int kSeeds = 5;

CorpusConfig calibration_config(std::uint64_t seed) {
  CorpusConfig c;
  c.n_households = 10000;
  c.seed = seed;
  return c;
}

CorpusConfig planted_config(std::uint64_t seed) {
  CorpusConfig c;
  c.n_households = 20000;
  c.n_regions = 3;
  c.seed = seed;
  return c;
}

/// Held-out scores pooled over regions and folds, each region fit separately.
struct Pooled {
  std::vector<double> scores;
  std::vector<int> labels;
  double prevalence() const { return prevalence_of(labels); }
  double precision_at(double q) const { return precision_at_proportion(scores, labels, q); }
  double area() const { return area_under_precision(scores, labels); }
};

Pooled pooled_cv(const Corpus& c, const CorpusIndex& index, const Task& task, FeatureSet set, const ModelSpec& spec,
                 std::uint64_t seed) {
  Pooled p;
  for (const auto& region : c.region_ids()) {
    auto data = task_data(index, task, region);
    auto res = run_cv(index, data, spec, set, {5, seed, 0.01});
    auto [ids, s, y] = res.pooled();
    p.scores.insert(p.scores.end(), s.begin(), s.end());
    p.labels.insert(p.labels.end(), y.begin(), y.end());
  }
  return p;
}

}  // namespace

int main() {
  std::cout << "acceptance: " << kSeeds << " seeds where seeded" << std::endl;

  // Generator statistics over five default-sized corpora.
  std::vector<Corpus> calibration;
  double generation_seconds = 0;
  for (int s = 1; s <= kSeeds; ++s) {
    auto t = Clock::now();
    calibration.push_back(generate_corpus(calibration_config(static_cast<std::uint64_t>(s))));
    generation_seconds += seconds_since(t);
  }

  criterion("generator calibration", [&] {
    double any = 0, leq3 = 0;
    for (const auto& c : calibration) {
      std::size_t n_any = 0, n_leq3 = 0;
      for (const auto& v : c.verifications) {
        auto k = v.n_discrepancies();
        n_any += k > 0;
        n_leq3 += k > 0 && k <= 3;
      }
      any += static_cast<double>(n_any) / static_cast<double>(c.verifications.size());
      leq3 += static_cast<double>(n_leq3) / static_cast<double>(n_any);
    }
    any /= kSeeds;
    leq3 /= kSeeds;
    bool pass = any >= 0.68 && any <= 0.72 && leq3 >= 0.89 && leq3 <= 0.93 && generation_seconds < 30;
    return std::pair{pass, "any-discrepancy rate " + fmt(any) + " in [0.68,0.72], <=3 share " + fmt(leq3) +
                               " in [0.89,0.93], 5 corpora of 10000 in " + fmt(generation_seconds, 2) + " s (< 30 s)"};
  });

  criterion("stove direction", [&] {
    auto stove = *question_index("has_stove");
    double worst = 0;
    bool report_matches = true;
    for (const auto& c : calibration) {
      std::size_t under = 0, disc = 0;
      for (const auto& v : c.verifications) {
        auto it = v.entries.find(stove);
        if (it == v.entries.end() || it->second == VerificationStatus::Match) continue;
        ++disc;
        under += it->second == VerificationStatus::UnderReported;
      }
      worst = std::max(worst, disc ? static_cast<double>(under) / static_cast<double>(disc) : 0.0);
      for (const auto& row : discrepancy_direction_report(c))
        if (row.question == "has_stove") report_matches &= row.n_under == under && row.n_discrepancies == disc;
    }
    return std::pair{worst <= 0.03 && report_matches, "max under-reported share of stove discrepancies " + fmt(worst) +
                                                          " (<= 0.03); report equals recount: " +
                                                          (report_matches ? "yes" : "no")};
  });

  criterion("pr curve oracle", [&] {
    std::mt19937_64 rng(77);
    std::size_t points = 0, mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::size_t n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = trial % 2 ? std::uniform_real_distribution<double>(0, 1)(rng)
                         : std::uniform_int_distribution<int>(0, 20)(rng) / 20.0;
        y[i] = std::uniform_int_distribution<int>(0, 1)(rng);
      }
      y[0] = 1;
      for (const auto& p : pr_curve(s, y).points) {
        auto b = oracle::brute_pr_point(s, y, p.threshold);
        ++points;
        mismatches += !(p.proportion_flagged == b.proportion_flagged && p.precision == b.precision && p.recall == b.recall);
      }
    }
    return std::pair{mismatches == 0, "100 instances, " + std::to_string(points) + " grid points, " +
                                          std::to_string(mismatches) + " exact mismatches"};
  });

  criterion("grouped cv invariants", [&] {
    std::mt19937_64 rng(2024);
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::size_t n = std::uniform_int_distribution<std::size_t>(2, 300)(rng);
      int k = std::uniform_int_distribution<int>(2, static_cast<int>(std::min<std::size_t>(10, n)))(rng);
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < n; ++i) ids.push_back("H" + std::to_string(i));
      auto a = make_grouped_folds(ids, k, rng());
      std::map<std::string, int> seen;
      for (int f = 0; f < k; ++f)
        for (const auto& id : a.members(f)) ++seen[id];
      bool exclusive_and_covering = seen.size() == n;
      for (const auto& id : ids) exclusive_and_covering &= seen[id] == 1;
      auto sizes = a.sizes();
      auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      violations += !(exclusive_and_covering && sizes.size() == static_cast<std::size_t>(k) && *hi - *lo <= 1);
    }
    return std::pair{violations == 0, "1000 assignments, " + std::to_string(violations) + " violations"};
  });

  criterion("leakage suite", [&] {
    auto c = generate_corpus([] {
      auto cfg = calibration_config(21);
      cfg.n_households = 3000;
      cfg.n_regions = 2;
      cfg.n_localities = 12;
      cfg.n_blocks_per_locality = 4;
      return cfg;
    }());
    CorpusIndex index(c);
    struct Case {
      Task task;
      FeatureSet set;
      ModelSpec spec;
    };
    std::vector<Case> cases = {
        {Task::imputation(PovertyIndicator::Education), FeatureSet::Combined, ModelSpec::gbm(20)},
        {Task::imputation(PovertyIndicator::BasicServices), FeatureSet::Geographic, ModelSpec::random_forest(10)},
        {Task::imputation(PovertyIndicator::Food), FeatureSet::Combined, ModelSpec::knn(12)},
        {Task::underreporting(), FeatureSet::Combined, ModelSpec::decision_tree(Criterion::Entropy)},
    };
    std::size_t checked = 0, differing = 0;
    for (const auto& cs : cases) {
      std::string region = cs.task.is_underreporting() ? std::string(kAllRegions) : "R1";
      auto d = task_data(index, cs.task, region);
      auto folds = make_grouped_folds(d.ids, 5, 13);
      for (int f = 0; f < 5; ++f) {
        std::vector<std::string> train, test;
        std::vector<int> train_y;
        for (std::size_t i = 0; i < d.ids.size(); ++i) {
          if (folds.fold(d.ids[i]) == f) {
            test.push_back(d.ids[i]);
          } else {
            train.push_back(d.ids[i]);
            train_y.push_back(d.labels[i]);
          }
        }
        Corpus flipped = flip_labels(c, {test.begin(), test.end()});
        CorpusIndex flipped_index(flipped);
        auto a = fit_fold(index, cs.task, cs.set, cs.spec, train, train_y, test);
        auto b = fit_fold(flipped_index, cs.task, cs.set, cs.spec, train, train_y, test);
        nlohmann::json ja = {a.artifacts.averages ? nlohmann::json(*a.artifacts.averages) : nlohmann::json(),
                             a.artifacts.preprocessor, a.artifacts.model};
        nlohmann::json jb = {b.artifacts.averages ? nlohmann::json(*b.artifacts.averages) : nlohmann::json(),
                             b.artifacts.preprocessor, b.artifacts.model};
        ++checked;
        differing += ja.dump() != jb.dump() || !(a.artifacts.preprocessor == b.artifacts.preprocessor);
      }
    }
    return std::pair{differing == 0, std::to_string(checked) +
                                         " folds with held-out labels flipped; averages, imputation statistics and "
                                         "models differ in " +
                                         std::to_string(differing)};
  });

  // Planted-signal corpora shared by the next three criteria.
  std::size_t regime_wins = 0, knn_ok = 0, margin_ok = 0, ss_ok = 0;
  double regime_seconds = 0, worst_margin = 1, worst_ss = -1, ss_prev = 0;
  std::ostringstream regime_detail, model_detail;
  std::string planted_error;
  try {
    for (int s = 1; s <= kSeeds; ++s) {
      auto seed = static_cast<std::uint64_t>(s);
      auto t = Clock::now();
      auto c = generate_corpus(planted_config(seed));
      CorpusIndex index(c);
      auto gbm = ModelSpec::gbm(100);
      auto aup = [&](PovertyIndicator k, FeatureSet f) {
        return pooled_cv(c, index, Task::imputation(k), f, gbm, seed).area();
      };
      double bs_geo = aup(PovertyIndicator::BasicServices, FeatureSet::Geographic);
      double bs_tx = aup(PovertyIndicator::BasicServices, FeatureSet::Transactional);
      double ed_geo = aup(PovertyIndicator::Education, FeatureSet::Geographic);
      double ed_tx = aup(PovertyIndicator::Education, FeatureSet::Transactional);
      regime_seconds += seconds_since(t);
      regime_wins += bs_geo > bs_tx && ed_tx > ed_geo;
      regime_detail << " s" << s << "[bs " << fmt(bs_geo, 3) << ">" << fmt(bs_tx, 3) << " ed " << fmt(ed_tx, 3) << ">"
                    << fmt(ed_geo, 3) << "]";

      auto edu = Task::imputation(PovertyIndicator::Education);
      auto p_gbm = pooled_cv(c, index, edu, FeatureSet::Combined, gbm, seed);
      auto p_rf = pooled_cv(c, index, edu, FeatureSet::Combined, ModelSpec::random_forest(100), seed);
      auto p_knn = pooled_cv(c, index, edu, FeatureSet::Combined, ModelSpec::knn(12), seed);
      double prev = p_gbm.prevalence();
      double g = p_gbm.precision_at(0.2), r = p_rf.precision_at(0.2), k = p_knn.precision_at(0.2);
      worst_margin = std::min({worst_margin, g - prev, r - prev});
      margin_ok += g >= prev + 0.10 && r >= prev + 0.10;
      knn_ok += k <= g && k <= r;
      model_detail << " s" << s << "[prev " << fmt(prev, 3) << " gbm " << fmt(g, 3) << " rf " << fmt(r, 3) << " knn "
                   << fmt(k, 3) << "]";

      auto ss = Task::imputation(PovertyIndicator::SocialSecurity);
      bool seed_ok = true;
      for (const auto& spec : {gbm, ModelSpec::random_forest(100), ModelSpec::knn(12)}) {
        auto p = pooled_cv(c, index, ss, FeatureSet::Combined, spec, seed);
        double excess = p.precision_at(0.5) - p.prevalence();
        worst_ss = std::max(worst_ss, excess);
        ss_prev = p.prevalence();
        seed_ok &= excess <= 0.03;
      }
      ss_ok += seed_ok;
    }
  } catch (const std::exception& e) {
    planted_error = e.what();
  }

  criterion("feature regime", [&] {
    if (!planted_error.empty()) throw Error(planted_error);
    bool pass = regime_wins >= 4 && regime_seconds < 600;
    return std::pair{pass, std::to_string(regime_wins) + "/5 seeds with geographic > transactional for basic_services "
                               "and the reverse for education (need >= 4), GBM(100) area under precision at <=50%, " +
                               fmt(regime_seconds, 1) + " s (< 600 s);" + regime_detail.str()};
  });

  criterion("model over baseline", [&] {
    if (!planted_error.empty()) throw Error(planted_error);
    bool pass = margin_ok == kSeeds && knn_ok >= 4;
    return std::pair{pass, "education combined p@20: GBM(100) and RF(100) >= prevalence + 0.10 in " +
                               std::to_string(margin_ok) + "/5 seeds (worst margin " + fmt(worst_margin, 3) +
                               "), kNN(12) <= both in " + std::to_string(knn_ok) + "/5 (need >= 4);" +
                               model_detail.str()};
  });

  criterion("social security null result", [&] {
    if (!planted_error.empty()) throw Error(planted_error);
    return std::pair{ss_ok == kSeeds, "max p@50 - prevalence over GBM/RF/kNN and 5 seeds " + fmt(worst_ss) +
                                          " (<= 0.03), prevalence " + fmt(ss_prev, 3)};
  });

  criterion("gbm loss monotonicity", [&] {
    std::mt19937_64 rng(555);
    std::size_t increases = 0;
    for (int i = 0; i < 20; ++i) {
      auto d = oracle::random_instance(rng, 60, 4);
      auto m = fit(ModelSpec::gbm(50), oracle::to_matrix(d), d.y);
      for (std::size_t t = 1; t < m.training_loss.size(); ++t) increases += m.training_loss[t] > m.training_loss[t - 1];
    }
    return std::pair{increases == 0, "20 instances x 50 stages, " + std::to_string(increases) + " stage increases"};
  });

  criterion("split oracle", [&] {
    std::mt19937_64 rng(909);
    std::size_t mismatches = 0;
    for (int i = 0; i < 50; ++i) {
      auto d = oracle::random_instance(rng, 12, 3);
      for (auto c : {Criterion::Gini, Criterion::Entropy}) {
        auto spec = ModelSpec::decision_tree(c);
        spec.min_leaf = 1;
        auto m = fit(spec, oracle::to_matrix(d), d.y);
        mismatches += !(m.trees[0] == oracle::exhaustive_tree(d, c, 1));
      }
    }
    return std::pair{mismatches == 0, "50 instances x {gini, entropy}, " + std::to_string(mismatches) +
                                          " trees differing from exhaustive search"};
  });

  criterion("rank endpoint properties", [&] {
    std::mt19937_64 rng(4242);
    std::size_t scaling = 0, monotone = 0, partition = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      auto recs = random_records(rng);
      auto w = random_weights(rng);
      double c = std::exp(std::uniform_real_distribution<double>(-5, 5)(rng));
      TriageWeights scaled{w.w_prob * c, w.w_discrepancy * c, w.w_proximity * c, w.tau};
      auto base = rank(recs, w);
      scaling += order_of(base) != order_of(rank(recs, scaled));

      std::size_t i = std::uniform_int_distribution<std::size_t>(0, recs.size() - 1)(rng);
      auto bumped = recs;
      bumped[i].p_underreport = std::min(1.0, recs[i].p_underreport + std::uniform_real_distribution<double>(0, 0.5)(rng));
      const auto& id = recs[i].household_id;
      monotone += non_faded_position(rank(bumped, w), id) > non_faded_position(base, id);

      bool seen_faded = false;
      for (const auto& x : base) {
        partition += seen_faded && !x.faded;
        seen_faded |= x.faded;
      }
    }
    return std::pair{scaling + monotone + partition == 0,
                     "1000 record sets each; scaling violations " + std::to_string(scaling) + ", monotonicity " +
                         std::to_string(monotone) + ", fading partition " + std::to_string(partition)};
  });

  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : "acceptance: all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
