#pragma once

// Random inputs shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "povml/triage.hpp"

namespace povml::testing {

/// Copy of `c` with every held-out household's labels inverted: survey
/// indicators and verification outcomes.
inline Corpus flip_labels(const Corpus& c, const std::set<std::string>& held_out) {
  Corpus out = c;
  for (auto& s : out.surveys) {
    if (!held_out.count(s.household_id)) continue;
    for (auto& l : s.indicator_labels)
      if (l != LabelState::Missing) l = l == LabelState::Lacking ? LabelState::NotLacking : LabelState::Lacking;
  }
  for (auto& v : out.verifications) {
    if (!held_out.count(v.household_id)) continue;
    bool any = v.any_discrepancy();
    for (auto& [q, s] : v.entries) s = any ? VerificationStatus::Match : VerificationStatus::OverReported;
  }
  return out;
}

/// Records around two welfare lines; some far enough to fade, some tied in p.
inline std::vector<TriageRecord> random_records(std::mt19937_64& rng) {
  std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<TriageRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    double p = u(rng) < 0.2 ? 0.5 : u(rng);
    double lbm = u(rng) < 0.5 ? 1000.0 : 1330.0;
    double est = lbm + std::uniform_real_distribution<double>(-600, 600)(rng);
    double self = est - std::uniform_real_distribution<double>(-300, 500)(rng);
    out.push_back(make_record("H" + std::to_string(1000 + i), p, est, self, lbm));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

/// Valid weights with w_prob > 0; sometimes a zero weight or an explicit tau.
inline TriageWeights random_weights(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 2);
  TriageWeights w{u(rng), u(rng), u(rng), std::nullopt};
  if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) w.w_discrepancy = 0;
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) w.tau = std::uniform_real_distribution<double>(50, 500)(rng);
  w.w_prob += 0.01;
  return w;
}

inline std::vector<std::string> order_of(const std::vector<RankedRecord>& r) {
  std::vector<std::string> out;
  for (const auto& x : r) out.push_back(x.record.household_id);
  return out;
}

/// Position of `id` among the non-faded records of a ranking.
inline std::size_t non_faded_position(const std::vector<RankedRecord>& r, const std::string& id) {
  std::size_t pos = 0;
  for (const auto& x : r) {
    if (x.record.household_id == id) return pos;
    if (!x.faded) ++pos;
  }
  return pos;
}

}  // namespace povml::testing
