#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "povml/corpus_io.hpp"
#include "povml/generate.hpp"
#include "test_util.hpp"

using namespace povml;
using povml::testing::small_config;
using povml::testing::TempDir;

namespace {

const Corpus& shared_corpus() {
  static const Corpus c = generate_corpus(small_config(7, 3000));
  return c;
}

std::string slurp(const std::filesystem::path& p) { return read_file(p.string()); }

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

}  // namespace

TEST(Generate, SameSeedSameCorpus) {
  auto a = generate_corpus(small_config(11, 800));
  auto b = generate_corpus(small_config(11, 800));
  EXPECT_TRUE(a == b);
  auto c = generate_corpus(small_config(12, 800));
  EXPECT_FALSE(a == c);
}

TEST(Generate, ZeroHouseholdsGivesEmptyCorpus) {
  auto cfg = small_config(1, 0);
  auto c = generate_corpus(cfg);
  EXPECT_TRUE(c.households.empty());
  EXPECT_TRUE(c.surveys.empty());
  EXPECT_TRUE(c.transactions.empty());
  EXPECT_TRUE(validate_corpus(c).ok());
}

TEST(Generate, RejectsBadConfig) {
  auto cfg = small_config(1);
  cfg.n_regions = 0;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
  cfg = small_config(1);
  cfg.verification_fraction = 1.5;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
  cfg = small_config(1);
  cfg.overreport_bias["respondent_age"] = 0.5;
  EXPECT_THROW(generate_corpus(cfg), ConfigError);
}

TEST(Generate, ConfigJsonRoundTripAndUnknownKey) {
  auto cfg = small_config(5);
  cfg.overreport_bias["has_toilet"] = 0.6;
  nlohmann::json j = cfg;
  auto back = j.get<CorpusConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  j["n_househods"] = 10;
  EXPECT_THROW(j.get<CorpusConfig>(), ConfigError);
}

TEST(Generate, CorpusIsValidAndRegionsBounded) {
  const auto& c = shared_corpus();
  auto rep = validate_corpus(c);
  EXPECT_TRUE(rep.ok()) << (rep.problems.empty() ? "" : rep.problems.front());
  std::set<std::string> regions;
  for (const auto& h : c.households) regions.insert(h.region_id);
  EXPECT_LE(regions.size(), 3u);
  for (const auto& b : c.blocks)
    for (const auto& [k, v] : b.aggregates) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Generate, DiscrepancyQuotasAreExact) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto c = generate_corpus(small_config(seed, 5000));
    std::size_t m = c.verifications.size(), any = 0, leq3 = 0;
    for (const auto& v : c.verifications) {
      auto k = v.n_discrepancies();
      any += k > 0;
      leq3 += k > 0 && k <= 3;
    }
    ASSERT_GT(m, 0u);
    EXPECT_EQ(any, static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(m))));
    EXPECT_EQ(leq3, static_cast<std::size_t>(std::llround(0.91 * static_cast<double>(any))));
  }
}

TEST(Generate, StoveDiscrepanciesAreMostlyOverReports) {
  // Recount straight from the verification ledger.
  auto c = generate_corpus(small_config(4, 10000));
  auto stove = *question_index("has_stove");
  std::size_t total = 0, under = 0;
  for (const auto& v : c.verifications) {
    auto it = v.entries.find(stove);
    ASSERT_NE(it, v.entries.end());
    total += it->second != VerificationStatus::Match;
    under += it->second == VerificationStatus::UnderReported;
  }
  ASSERT_GT(total, 50u);
  EXPECT_LE(static_cast<double>(under) / static_cast<double>(total), 0.03);
}

TEST(Generate, LabelsAgreeWithTruthWhenPresent) {
  const auto& c = shared_corpus();
  CorpusIndex index(c);
  std::size_t missing = 0, cells = 0;
  for (const auto& s : c.surveys) {
    const auto* g = index.truth(s.household_id);
    ASSERT_NE(g, nullptr);
    for (auto k : kAllIndicators) {
      ++cells;
      auto l = s.indicator_labels[idx(k)];
      if (l == LabelState::Missing) {
        ++missing;
        continue;
      }
      EXPECT_EQ(l == LabelState::Lacking, g->true_indicators[idx(k)]);
    }
  }
  double rate = static_cast<double>(missing) / static_cast<double>(cells);
  EXPECT_NEAR(rate, 0.02, 0.01);
}

TEST(Generate, PlantedModelReproducesPrevalence) {
  // Mean planted probability and observed prevalence agree, and both sit near the target.
  auto c = generate_corpus(small_config(9, 10000));
  CorpusIndex index(c);
  for (auto k : kAllIndicators) {
    double mean_p = 0, observed = 0;
    for (const auto& h : c.households) {
      std::vector<bool> enrolled(c.programs.size(), false);
      for (auto t : index.transactions(h.household_id)) enrolled[*index.program(c.transactions[t].program_id)] = true;
      const auto* g = index.truth(h.household_id);
      mean_p += c.planted.probability(k, g->development_level, enrolled);
      observed += g->true_indicators[idx(k)];
    }
    mean_p /= static_cast<double>(c.households.size());
    observed /= static_cast<double>(c.households.size());
    EXPECT_NEAR(mean_p, c.config.prevalence_target(k), 0.01) << indicator_name(k);
    EXPECT_NEAR(observed, mean_p, 0.02) << indicator_name(k);
  }
}

TEST(Generate, TransactionsInsideWindowAndSorted) {
  const auto& c = shared_corpus();
  for (std::size_t i = 0; i < c.transactions.size(); ++i) {
    const auto& t = c.transactions[i];
    EXPECT_FALSE(t.date < c.config.window_start);
    EXPECT_FALSE(c.config.window_end < t.date);
    EXPECT_GT(t.amount, 0.0);
    if (i && c.transactions[i - 1].household_id == t.household_id) {
      EXPECT_FALSE(t.date < c.transactions[i - 1].date);
    }
  }
}

TEST(CorpusIo, SaveLoadRoundTrip) {
  TempDir dir("roundtrip");
  const auto& c = shared_corpus();
  save_corpus(c, dir.str());
  auto back = load_corpus(dir.str());
  EXPECT_TRUE(back == c);
}

TEST(CorpusIo, TruncatedRowReportsLine) {
  TempDir dir("truncated");
  save_corpus(generate_corpus(small_config(3, 50)), dir.str());
  auto p = dir / "households.csv";
  auto text = slurp(p);
  // Cut the fourth line (third data row) after its first field.
  std::vector<std::string> lines = split(text, '\n');
  lines[3] = split(lines[3])[0];
  spit(p, join(lines, '\n'));
  try {
    load_corpus(dir.str());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "households.csv");
    EXPECT_EQ(e.line(), 4u);
    EXPECT_EQ(e.field(), "region_id");
  }
}

TEST(CorpusIo, UnknownSurveyColumnIsSchemaError) {
  TempDir dir("schema");
  save_corpus(generate_corpus(small_config(3, 50)), dir.str());
  auto p = dir / "surveys.csv";
  auto text = slurp(p);
  auto nl = text.find('\n');
  text.replace(0, nl, text.substr(0, nl) + ",favourite_colour");
  // Append a value to each data row so only the header is at fault.
  std::vector<std::string> lines = split(text, '\n');
  for (std::size_t i = 1; i < lines.size(); ++i)
    if (!lines[i].empty()) lines[i] += ",blue";
  spit(p, join(lines, '\n'));
  EXPECT_THROW(load_corpus(dir.str()), SchemaError);
}

TEST(CorpusIo, BadAggregateRejectedAtLoad) {
  TempDir dir("aggregate");
  save_corpus(generate_corpus(small_config(3, 50)), dir.str());
  auto p = dir / "blocks.csv";
  std::vector<std::string> lines = split(slurp(p), '\n');
  auto f = split(lines[1]);
  f.back() = "1.5";
  lines[1] = join(f);
  spit(p, join(lines, '\n'));
  EXPECT_THROW(load_corpus(dir.str()), ParseError);
}

TEST(CorpusIo, MissingDirectory) { EXPECT_THROW(load_corpus("/nonexistent/povml"), Error); }

TEST(Filters, LocalityFilterKeepsExactlyLocatedHouseholds) {
  const auto& c = shared_corpus();
  auto f = apply_locality_filter(c);
  std::size_t expected = 0;
  for (const auto& h : c.households) expected += h.locality_id.has_value();
  EXPECT_EQ(f.households.size(), expected);
  for (const auto& h : f.households) EXPECT_TRUE(h.locality_id.has_value());
  std::set<std::string> kept;
  for (const auto& h : f.households) kept.insert(h.household_id);
  for (const auto& t : f.transactions) EXPECT_TRUE(kept.count(t.household_id));
  for (const auto& s : f.surveys) EXPECT_TRUE(kept.count(s.household_id));
  EXPECT_TRUE(validate_corpus(f).ok());
}

TEST(Filters, DropMissingLabels) {
  const auto& c = shared_corpus();
  auto f = drop_missing_labels(c, PovertyIndicator::Food);
  std::size_t expected = 0;
  for (const auto& s : c.surveys) expected += s.indicator_labels[idx(PovertyIndicator::Food)] != LabelState::Missing;
  EXPECT_EQ(f.surveys.size(), expected);
  for (const auto& s : f.surveys) EXPECT_NE(s.indicator_labels[idx(PovertyIndicator::Food)], LabelState::Missing);
}

TEST(Common, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    double v = u(rng);
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::nan("")), "NA");
}

TEST(Common, DateParsing) {
  auto d = Date::parse("2015-12-31");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->str(), "2015-12-31");
  EXPECT_FALSE(Date::parse("2015-02-30"));
  EXPECT_EQ(days_between(*Date::parse("2015-10-01"), *d), 91);
}
