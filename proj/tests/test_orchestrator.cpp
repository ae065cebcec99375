#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "povml/orchestrator.hpp"
#include "test_util.hpp"

using namespace povml;
using povml::testing::small_config;
using povml::testing::TempDir;

namespace fs = std::filesystem;

namespace {

ExperimentConfig small_experiment(const std::string& out) {
  ExperimentConfig c;
  c.name = "t";
  c.generate = small_config(5, 2400, 3);
  c.tasks = {Task::underreporting(), Task::imputation(PovertyIndicator::Education)};
  c.regions = {"R1", "R2", "R3"};
  c.models = {ModelSpec::gbm(10), ModelSpec::decision_tree(Criterion::Gini)};
  c.models[1].max_depth = 4;
  c.feature_sets = {FeatureSet::Transactional, FeatureSet::Combined};
  c.seed = 3;
  c.output_dir = out;
  return c;
}

/// Manifest without wall-clock fields, for comparing runs.
nlohmann::json stable(const RunManifest& m) {
  nlohmann::json j = m;
  for (auto& job : j["jobs"]) job.erase("seconds");
  j["config"].erase("output_dir");
  j["config"].erase("parallelism");
  return j;
}

}  // namespace

TEST(ExperimentConfig, ParsesAndRejectsUnknownKeys) {
  auto j = nlohmann::json::parse(R"({
    "name": "x", "corpus": {"generate": {"n_households": 100, "n_regions": 2}},
    "tasks": ["underreporting", "education"], "models": [{"kind": "knn", "neighbors": 25}],
    "feature_sets": ["geographic"], "folds": 3, "seed": 9, "parallelism": 2})");
  auto c = j.get<ExperimentConfig>();
  c.validate();
  EXPECT_EQ(c.tasks.size(), 2u);
  EXPECT_EQ(c.models[0].id(), "knn25");
  EXPECT_EQ(c.generate->n_households, 100);
  auto round = nlohmann::json(c).get<ExperimentConfig>();
  EXPECT_EQ(nlohmann::json(round), nlohmann::json(c));

  auto bad = j;
  bad["colour"] = 1;
  EXPECT_THROW(bad.get<ExperimentConfig>(), ConfigError);
  bad = j;
  bad["tasks"] = {"poverty"};
  EXPECT_THROW(bad.get<ExperimentConfig>(), ConfigError);
  bad = j;
  bad["models"] = nlohmann::json::array();
  EXPECT_THROW(bad.get<ExperimentConfig>().validate(), ConfigError);
  bad = j;
  bad["corpus"] = {{"generate", {{"n_households", 10}}}, {"load", "x"}};
  EXPECT_THROW(bad.get<ExperimentConfig>().validate(), ConfigError);
  bad = j;
  bad["models"] = {{{"kind", "gbm"}}, {{"kind", "gbm"}}};
  EXPECT_THROW(bad.get<ExperimentConfig>().validate(), ConfigError);
}

TEST(ExperimentConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_experiment_config("/nonexistent/exp.json"), ConfigError);
}

TEST(ExperimentConfig, OutputRootFromEnvironment) {
  ExperimentConfig c;
  c.name = "abc";
  ::setenv(kOutputRootEnv, "/tmp/rootdir", 1);
  EXPECT_EQ(c.resolved_output_dir(), "/tmp/rootdir/abc");
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(c.resolved_output_dir(), "runs/abc");
  c.output_dir = "/x";
  EXPECT_EQ(c.resolved_output_dir(), "/x");
}

TEST(Jobs, ProductCount) {
  auto c = small_experiment("");
  EXPECT_EQ(enumerate_jobs(c, c.regions).size(), 24u);
}

TEST(Jobs, FullScaleEnumeration) {
  ExperimentConfig c;
  c.generate = CorpusConfig{};
  for (auto k : kAllIndicators) c.tasks.push_back(Task::imputation(k));
  c.models = {ModelSpec::knn(12), ModelSpec::knn(25), ModelSpec::gbm(100), ModelSpec::gbm(150),
              ModelSpec::random_forest(50), ModelSpec::random_forest(100)};
  c.feature_sets = {FeatureSet::Geographic, FeatureSet::Socioeconomic, FeatureSet::Transactional, FeatureSet::Combined};
  c.validate();
  auto regions = CorpusConfig{}.n_regions;
  std::vector<std::string> ids;
  for (int r = 1; r <= regions; ++r) ids.push_back("R" + std::to_string(r));
  auto jobs = enumerate_jobs(c, ids);
  EXPECT_EQ(jobs.size(), 34u * 6 * 6 * 4);
  std::set<std::string> unique;
  for (const auto& j : jobs) unique.insert(job_id(c, j));
  EXPECT_EQ(unique.size(), jobs.size());
}

class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("orch");
    summary_ = new RunSummary(run_experiment(small_experiment((*dir_ / "a").string())));
  }
  static void TearDownTestSuite() {
    delete summary_;
    delete dir_;
  }
  static TempDir* dir_;
  static RunSummary* summary_;
};
TempDir* SmallRun::dir_ = nullptr;
RunSummary* SmallRun::summary_ = nullptr;

TEST_F(SmallRun, ManifestHasEveryJobFinished) {
  const auto& m = summary_->manifest;
  EXPECT_EQ(m.jobs.size(), 24u);
  EXPECT_EQ(summary_->executed, 24u);
  EXPECT_EQ(summary_->exit_code(), 0);
  for (const auto& j : m.jobs) {
    EXPECT_TRUE(j.finished()) << j.id << " " << j.reason;
    if (j.status != JobStatus::Done) continue;
    EXPECT_TRUE(fs::exists(fs::path(summary_->run_dir) / j.artifacts.at("curves")));
    EXPECT_TRUE(fs::exists(fs::path(summary_->run_dir) / j.artifacts.at("scores")));
    EXPECT_EQ(j.artifacts.count("triage"), j.task == "underreporting" ? 1u : 0u);
  }
  auto on_disk = load_manifest(summary_->run_dir);
  EXPECT_EQ(stable(on_disk), stable(m));
  EXPECT_FALSE(m.triage_job.empty());
  EXPECT_TRUE(fs::exists(fs::path(summary_->run_dir) / kGridFile));
  EXPECT_TRUE(fs::exists(fs::path(summary_->run_dir) / "corpus" / "households.csv"));
}

TEST_F(SmallRun, RerunExecutesNothing) {
  auto again = run_experiment(small_experiment(summary_->run_dir));
  EXPECT_EQ(again.executed, 0u);
  EXPECT_EQ(again.skipped, 24u);
  EXPECT_EQ(stable(again.manifest), stable(summary_->manifest));
}

TEST_F(SmallRun, IdenticalConfigGivesIdenticalGrid) {
  auto cfg = small_experiment((*dir_ / "b").string());
  cfg.parallelism = 3;
  auto other = run_experiment(cfg);
  EXPECT_EQ(read_file((fs::path(other.run_dir) / kGridFile).string()),
            read_file((fs::path(summary_->run_dir) / kGridFile).string()));
}

TEST_F(SmallRun, DifferentConfigInSameDirectoryIsRejected) {
  auto cfg = small_experiment(summary_->run_dir);
  cfg.seed = 99;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST_F(SmallRun, TrainingRowsStayInTheirRegion) {
  const auto& m = summary_->manifest;
  auto corpus = load_corpus((fs::path(summary_->run_dir) / "corpus").string());
  CorpusIndex index(corpus);
  auto cfg = small_experiment("");
  for (const auto& j : m.jobs) {
    if (j.status != JobStatus::Done) continue;
    auto data = task_data(index, *Task::parse(j.task), j.region);
    auto folds = make_grouped_folds(data.ids, cfg.folds, cfg.seed);
    ASSERT_EQ(j.train_digests.size(), static_cast<std::size_t>(cfg.folds));
    for (int f = 0; f < cfg.folds; ++f) {
      std::vector<std::string> train;
      for (const auto& id : data.ids) {
        ASSERT_EQ(index.household(id)->region_id, j.region);
        if (folds.fold(id) != f) train.push_back(id);
      }
      EXPECT_EQ(j.train_digests[static_cast<std::size_t>(f)], digest_ids(train)) << j.id << " fold " << f;
    }
  }
}

TEST_F(SmallRun, InterruptedRunFinishesToTheSameManifest) {
  auto copy = fs::path(dir_->str()) / "c";
  fs::copy(summary_->run_dir, copy, fs::copy_options::recursive);
  // Simulate a kill after a handful of jobs: later entries back to pending, artifacts half written.
  auto m = load_manifest(copy.string());
  for (std::size_t i = 5; i < m.jobs.size(); ++i) {
    auto& j = m.jobs[i];
    if (j.artifacts.count("scores")) fs::remove(copy / j.artifacts.at("scores"));
    j.status = JobStatus::Pending;
    j.artifacts.clear();
    j.metrics.clear();
    j.train_digests.clear();
  }
  m.triage_job.clear();
  write_file_atomic((copy / kManifestFile).string(), nlohmann::json(m).dump(2));
  fs::remove(copy / kGridFile);
  auto resumed = run_experiment(small_experiment(copy.string()));
  EXPECT_EQ(resumed.executed, 19u);
  EXPECT_EQ(stable(resumed.manifest), stable(summary_->manifest));
  EXPECT_EQ(read_file((copy / kGridFile).string()), read_file((fs::path(summary_->run_dir) / kGridFile).string()));
}

TEST(Run, FailingJobIsRecordedAndRunContinues) {
  TempDir dir("orchfail");
  ExperimentConfig c;
  c.generate = small_config(6, 1200, 2);
  c.tasks = {Task::imputation(PovertyIndicator::Education)};
  c.models = {ModelSpec::majority()};
  c.feature_sets = {FeatureSet::Survey, FeatureSet::Transactional};
  c.output_dir = dir.str();
  auto s = run_experiment(c);
  EXPECT_EQ(s.manifest.jobs.size(), 4u);
  EXPECT_EQ(s.manifest.count(JobStatus::Failed), 2u);
  EXPECT_EQ(s.manifest.count(JobStatus::Done), 2u);
  EXPECT_EQ(s.exit_code(), 1);
  for (const auto& j : s.manifest.jobs) {
    if (j.status == JobStatus::Failed) {
      EXPECT_NE(j.reason.find("survey"), std::string::npos) << j.reason;
    }
  }
}

TEST(Run, UnknownRegionIsRejected) {
  TempDir dir("orchregion");
  ExperimentConfig c;
  c.generate = small_config(6, 300, 2);
  c.tasks = {Task::underreporting()};
  c.models = {ModelSpec::majority()};
  c.feature_sets = {FeatureSet::Survey};
  c.regions = {"R7"};
  c.output_dir = dir.str();
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Run, TinyRegionIsDegenerateNotFailed) {
  TempDir dir("orchtiny");
  ExperimentConfig c;
  c.generate = small_config(6, 60, 1);
  c.tasks = {Task::underreporting()};
  c.models = {ModelSpec::majority()};
  c.feature_sets = {FeatureSet::Survey};
  c.output_dir = dir.str();
  auto s = run_experiment(c);
  ASSERT_EQ(s.manifest.jobs.size(), 1u);
  EXPECT_EQ(s.manifest.jobs[0].status, JobStatus::Degenerate) << s.manifest.jobs[0].reason;
  EXPECT_EQ(s.exit_code(), 0);
}
