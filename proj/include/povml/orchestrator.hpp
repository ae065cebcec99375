#pragma once

// Config-driven experiment runner: one job per region x task x model x feature
// set, each a cross-validated evaluation, with a manifest that makes re-runs
// skip finished work.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "povml/corpus_io.hpp"
#include "povml/eval.hpp"
#include "povml/generate.hpp"
#include "povml/triage.hpp"

namespace povml {

/// Environment variable naming the directory under which runs without an explicit output_dir go.
inline constexpr const char* kOutputRootEnv = "POVML_OUTPUT_ROOT";

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string name = "experiment";
  /// Exactly one of the two is set.
  std::optional<CorpusConfig> generate;
  std::optional<std::string> load;
  std::vector<Task> tasks;
  /// Empty means every region of the corpus.
  std::vector<std::string> regions;
  std::vector<ModelSpec> models;
  std::vector<FeatureSet> feature_sets;
  int folds = 5;
  std::uint64_t seed = 0;
  std::string output_dir;
  int parallelism = 1;
  double grid_step = 0.01;
  /// Job whose full-data pipeline feeds triage; defaults to the first finished underreporting job.
  std::string triage_job;

  void validate() const {
    if (generate.has_value() == load.has_value()) throw ConfigError("corpus must either generate or load");
    if (generate) generate->validate();
    if (tasks.empty()) throw ConfigError("at least one task is required");
    if (models.empty()) throw ConfigError("at least one model is required");
    if (feature_sets.empty()) throw ConfigError("at least one feature set is required");
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (!(grid_step > 0 && grid_step <= 1)) throw ConfigError("grid_step must lie in (0,1]");
    std::set<std::string> ids;
    for (const auto& m : models) {
      m.validate();
      if (!ids.insert(m.id()).second) throw ConfigError("duplicate model id " + m.id() + "; give one a name");
    }
  }

  /// Output directory, falling back to the environment's output root.
  std::string resolved_output_dir() const {
    if (!output_dir.empty()) return output_dir;
    const char* root = std::getenv(kOutputRootEnv);
    return (std::filesystem::path(root && *root ? root : "runs") / name).string();
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json corpus;
  if (c.generate) corpus["generate"] = *c.generate;
  if (c.load) corpus["load"] = *c.load;
  std::vector<std::string> tasks, sets;
  for (const auto& t : c.tasks) tasks.push_back(t.name());
  for (auto f : c.feature_sets) sets.push_back(std::string(feature_set_name(f)));
  j = {{"name", c.name},       {"corpus", corpus},        {"tasks", tasks},
       {"regions", c.regions}, {"models", c.models},      {"feature_sets", sets},
       {"folds", c.folds},     {"seed", c.seed},          {"output_dir", c.output_dir},
       {"parallelism", c.parallelism}, {"grid_step", c.grid_step}, {"triage_job", c.triage_job}};
}

/// Unknown keys are rejected; omitted keys keep their defaults.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  c = ExperimentConfig{};
  static const std::set<std::string> known = {"name", "corpus", "tasks", "regions", "models", "feature_sets", "folds",
                                              "seed", "output_dir", "parallelism", "grid_step", "triage_job"};
  for (const auto& [key, v] : j.items())
    if (!known.count(key)) throw ConfigError("unknown experiment config key '" + key + "'");
  try {
    if (j.contains("name")) j.at("name").get_to(c.name);
    if (!j.contains("corpus") || !j.at("corpus").is_object()) throw ConfigError("corpus section is required");
    for (const auto& [key, v] : j.at("corpus").items()) {
      if (key == "generate") c.generate = v.get<CorpusConfig>();
      else if (key == "load") c.load = v.get<std::string>();
      else throw ConfigError("unknown corpus key '" + key + "'");
    }
    for (const auto& t : j.value("tasks", nlohmann::json::array())) {
      auto task = Task::parse(t.get<std::string>());
      if (!task) throw ConfigError("unknown task " + t.dump());
      c.tasks.push_back(*task);
    }
    if (j.contains("regions")) j.at("regions").get_to(c.regions);
    for (const auto& m : j.value("models", nlohmann::json::array())) c.models.push_back(m.get<ModelSpec>());
    for (const auto& f : j.value("feature_sets", nlohmann::json::array())) {
      auto set = parse_feature_set(f.get<std::string>());
      if (!set) throw ConfigError("unknown feature set " + f.dump());
      c.feature_sets.push_back(*set);
    }
    if (j.contains("folds")) j.at("folds").get_to(c.folds);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
    if (j.contains("parallelism")) j.at("parallelism").get_to(c.parallelism);
    if (j.contains("grid_step")) j.at("grid_step").get_to(c.grid_step);
    if (j.contains("triage_job")) j.at("triage_job").get_to(c.triage_job);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  auto c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

/// Digest of the settings that determine results; output location and parallelism are excluded.
inline std::string config_fingerprint(const ExperimentConfig& c) {
  nlohmann::json j = c;
  j.erase("output_dir");
  j.erase("parallelism");
  return hex64(Fnv1a().add(j.dump()).value());
}

// ---------------------------------------------------------------------------
// Jobs and manifest

struct Job {
  std::string region;
  Task task = Task::underreporting();
  std::size_t model = 0;  // index into the config's models
  FeatureSet feature_set = FeatureSet::Combined;
};

inline std::string job_id(const std::string& region, const std::string& task, const std::string& model,
                          std::string_view set) {
  return region + "." + task + "." + model + "." + std::string(set);
}

inline std::string job_id(const ExperimentConfig& c, const Job& j) {
  return job_id(j.region, j.task.name(), c.models[j.model].id(), feature_set_name(j.feature_set));
}

/// Every region x task x model x feature set combination.
inline std::vector<Job> enumerate_jobs(const ExperimentConfig& c, const std::vector<std::string>& regions) {
  std::vector<Job> jobs;
  for (const auto& r : regions)
    for (const auto& t : c.tasks)
      for (std::size_t m = 0; m < c.models.size(); ++m)
        for (auto f : c.feature_sets) jobs.push_back({r, t, m, f});
  return jobs;
}

enum class JobStatus { Pending, Done, Degenerate, Failed };

inline std::string_view job_status_name(JobStatus s) {
  switch (s) {
    case JobStatus::Pending: return "pending";
    case JobStatus::Done: return "done";
    case JobStatus::Degenerate: return "degenerate";
    case JobStatus::Failed: return "failed";
  }
  return "pending";
}

inline JobStatus parse_job_status(std::string_view s) {
  for (auto v : {JobStatus::Pending, JobStatus::Done, JobStatus::Degenerate, JobStatus::Failed})
    if (job_status_name(v) == s) return v;
  throw SchemaError("unknown job status " + std::string(s));
}

struct JobRecord {
  std::string id;
  std::string region;
  std::string task;
  std::string model;
  std::string feature_set;
  JobStatus status = JobStatus::Pending;
  std::string reason;
  /// Artifact name -> path relative to the run directory.
  std::map<std::string, std::string> artifacts;
  /// Digest of the training ids fed to each fold.
  std::vector<std::string> train_digests;
  /// Pooled held-out metrics; empty unless done.
  std::map<std::string, double> metrics;
  double seconds = 0;

  bool finished() const { return status == JobStatus::Done || status == JobStatus::Degenerate; }
};

inline void to_json(nlohmann::json& j, const JobRecord& r) {
  j = {{"id", r.id},
       {"region", r.region},
       {"task", r.task},
       {"model", r.model},
       {"feature_set", r.feature_set},
       {"status", job_status_name(r.status)},
       {"reason", r.reason},
       {"artifacts", r.artifacts},
       {"train_digests", r.train_digests},
       {"metrics", r.metrics},
       {"seconds", r.seconds}};
}

inline void from_json(const nlohmann::json& j, JobRecord& r) {
  j.at("id").get_to(r.id);
  j.at("region").get_to(r.region);
  j.at("task").get_to(r.task);
  j.at("model").get_to(r.model);
  j.at("feature_set").get_to(r.feature_set);
  r.status = parse_job_status(j.at("status").get<std::string>());
  j.at("reason").get_to(r.reason);
  j.at("artifacts").get_to(r.artifacts);
  j.at("train_digests").get_to(r.train_digests);
  j.at("metrics").get_to(r.metrics);
  j.at("seconds").get_to(r.seconds);
}

struct RunManifest {
  nlohmann::json config;
  std::string fingerprint;
  std::vector<JobRecord> jobs;
  /// Job whose triage records the service serves; empty when none qualifies.
  std::string triage_job;

  const JobRecord* find(const std::string& id) const {
    for (const auto& j : jobs)
      if (j.id == id) return &j;
    return nullptr;
  }
  std::size_t count(JobStatus s) const {
    return static_cast<std::size_t>(std::count_if(jobs.begin(), jobs.end(), [&](const auto& j) { return j.status == s; }));
  }
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"config", m.config}, {"fingerprint", m.fingerprint}, {"jobs", m.jobs}, {"triage_job", m.triage_job}};
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
  j.at("config").get_to(m.config);
  j.at("fingerprint").get_to(m.fingerprint);
  j.at("jobs").get_to(m.jobs);
  j.at("triage_job").get_to(m.triage_job);
}

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kGridFile = "grid.csv";

inline RunManifest load_manifest(const std::string& run_dir) {
  auto path = (std::filesystem::path(run_dir) / kManifestFile).string();
  if (!std::filesystem::exists(path)) throw ConfigError("no manifest in " + run_dir);
  try {
    return nlohmann::json::parse(read_file(path)).get<RunManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// One job

namespace detail {

inline std::string scores_csv(const CvResult& r) {
  std::string out = "household_id,fold,label,score\n";
  for (const auto& f : r.folds)
    for (std::size_t i = 0; i < f.scores.size(); ++i)
      out += f.ids[i] + "," + std::to_string(f.fold) + "," + std::to_string(f.labels[i]) + "," +
             format_double(f.scores[i]) + "\n";
  return out;
}

inline std::string importances_csv(const ImportanceReport& r) {
  std::string out = "column,importance\n";
  for (const auto& [name, v] : r.ranked()) out += name + "," + format_double(v) + "\n";
  return out;
}

inline nlohmann::json cv_summary(const CvResult& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_test", f.ids.size()},
                     {"train_digest", f.train_digest},
                     {"degenerate", f.degenerate},
                     {"note", f.note},
                     {"prevalence", f.curve ? nlohmann::json(f.curve->prevalence) : nlohmann::json()}});
  return {{"region", r.region}, {"task", r.task.name()}, {"model", r.model_id},
          {"feature_set", feature_set_name(r.feature_set)}, {"folds", folds}};
}

}  // namespace detail

/// Runs one job and writes its artifacts under `run_dir`. Pure apart from those files.
inline JobRecord run_job(const CorpusIndex& index, const ExperimentConfig& cfg, const Job& job,
                         const std::string& run_dir) {
  namespace fs = std::filesystem;
  const auto& spec_in = cfg.models[job.model];
  JobRecord rec;
  rec.id = job_id(cfg, job);
  rec.region = job.region;
  rec.task = job.task.name();
  rec.model = spec_in.id();
  rec.feature_set = std::string(feature_set_name(job.feature_set));
  auto start = std::chrono::steady_clock::now();
  try {
    auto data = task_data(index, job.task, job.region);
    auto spec = spec_in;
    spec.seed = mix_seed(cfg.seed, spec_in.seed);
    auto res = run_cv(index, data, spec, job.feature_set, {cfg.folds, cfg.seed, cfg.grid_step});
    const std::string rel = (fs::path("jobs") / rec.id).string();
    const fs::path dir = fs::path(run_dir) / rel;
    auto put = [&](const std::string& name, const std::string& file, const std::string& body) {
      write_file_atomic((dir / file).string(), body);
      rec.artifacts[name] = (fs::path(rel) / file).string();
    };
    EvalGrid grid;
    add_to_grid(grid, res);
    put("curves", "curves.csv", export_grid(grid));
    put("scores", "scores.csv", detail::scores_csv(res));
    put("cv", "cv.json", detail::cv_summary(res).dump(2) + "\n");
    if (!res.importances.empty()) put("importances", "importances.csv", detail::importances_csv(mean_importances(res.importances)));
    for (const auto& f : res.folds) rec.train_digests.push_back(f.train_digest);

    auto [ids, scores, labels] = res.pooled();
    if (ids.empty()) {
      rec.status = JobStatus::Degenerate;
      rec.reason = res.folds.empty() ? "no folds" : res.folds.front().note;
    } else {
      rec.status = JobStatus::Done;
      rec.metrics = {{"prevalence", prevalence_of(labels)},
                     {"precision_at_20", precision_at_proportion(scores, labels, 0.2)},
                     {"precision_at_50", precision_at_proportion(scores, labels, 0.5)},
                     {"area_under_precision_50", area_under_precision(scores, labels)},
                     {"n", static_cast<double>(labels.size())}};
      if (job.task.is_underreporting()) {
        auto pipeline = fit_pipeline(index, data, job.feature_set, spec);
        put("pipeline", "pipeline.json", nlohmann::json(pipeline).dump() + "\n");
        put("triage", "triage.json", nlohmann::json(score_corpus(pipeline, index)).dump() + "\n");
      }
    }
  } catch (const DegenerateError& e) {
    rec.status = JobStatus::Degenerate;
    rec.reason = e.what();
  } catch (const std::exception& e) {
    rec.status = JobStatus::Failed;
    rec.reason = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Whole run

struct RunSummary {
  std::string run_dir;
  RunManifest manifest;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  /// 0 when every job finished, 1 when any failed.
  int exit_code() const { return manifest.count(JobStatus::Failed) > 0 ? 1 : 0; }
};

/// Grid rows of every finished job, in grid-key order.
inline std::string merged_grid(const RunManifest& m, const std::string& run_dir) {
  std::vector<const JobRecord*> jobs;
  for (const auto& j : m.jobs)
    if (j.artifacts.count("curves")) jobs.push_back(&j);
  std::sort(jobs.begin(), jobs.end(), [](const JobRecord* a, const JobRecord* b) {
    return std::tie(a->region, a->task, a->model, a->feature_set) < std::tie(b->region, b->task, b->model, b->feature_set);
  });
  std::string out(kGridHeader);
  out += "\n";
  for (const auto* j : jobs) {
    auto body = read_file((std::filesystem::path(run_dir) / j->artifacts.at("curves")).string());
    out += body.substr(body.find('\n') + 1);
  }
  return out;
}

inline Corpus materialize_corpus(const ExperimentConfig& cfg, const std::string& run_dir) {
  if (cfg.load) return load_corpus(*cfg.load);
  auto c = generate_corpus(*cfg.generate);
  auto dir = (std::filesystem::path(run_dir) / "corpus").string();
  if (!std::filesystem::exists(std::filesystem::path(dir) / "households.csv")) save_corpus(c, dir);
  return c;
}

/// Executes every job not already finished, `parallelism` at a time. The
/// manifest is rewritten atomically after each job by a single writer.
inline RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  cfg.validate();
  RunSummary summary;
  summary.run_dir = cfg.resolved_output_dir();
  std::error_code ec;
  fs::create_directories(summary.run_dir, ec);
  if (ec || !fs::is_directory(summary.run_dir)) throw ConfigError("output directory not writable: " + summary.run_dir);
  const auto manifest_path = (fs::path(summary.run_dir) / kManifestFile).string();

  Corpus corpus = materialize_corpus(cfg, summary.run_dir);
  CorpusIndex index(corpus);
  auto regions = cfg.regions.empty() ? corpus.region_ids() : cfg.regions;
  auto known = corpus.region_ids();
  for (const auto& r : regions)
    if (r != kAllRegions && std::find(known.begin(), known.end(), r) == known.end())
      throw ConfigError("region " + r + " does not exist in the corpus");

  auto jobs = enumerate_jobs(cfg, regions);
  RunManifest& m = summary.manifest;
  m.config = cfg;
  m.fingerprint = config_fingerprint(cfg);
  std::map<std::string, JobRecord> previous;
  if (fs::exists(manifest_path)) {
    auto old = load_manifest(summary.run_dir);
    if (old.fingerprint != m.fingerprint)
      throw ConfigError("output directory " + summary.run_dir + " holds a run with a different config");
    for (auto& j : old.jobs) previous[j.id] = std::move(j);
  }
  std::vector<std::size_t> todo;
  for (const auto& job : jobs) {
    auto id = job_id(cfg, job);
    auto it = previous.find(id);
    if (it != previous.end() && it->second.finished()) {
      m.jobs.push_back(it->second);
      ++summary.skipped;
    } else {
      JobRecord r;
      r.id = id;
      r.region = job.region;
      r.task = job.task.name();
      r.model = cfg.models[job.model].id();
      r.feature_set = std::string(feature_set_name(job.feature_set));
      m.jobs.push_back(r);
      todo.push_back(m.jobs.size() - 1);
    }
  }

  std::mutex mu;
  auto write_manifest = [&] { write_file_atomic(manifest_path, nlohmann::json(m).dump(2) + "\n"); };
  write_manifest();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      auto rec = run_job(index, cfg, jobs[todo[i]], summary.run_dir);
      std::lock_guard<std::mutex> lock(mu);
      m.jobs[todo[i]] = std::move(rec);
      ++summary.executed;
      write_manifest();
      if (log) {
        const auto& r = m.jobs[todo[i]];
        *log << "[" << summary.executed << "/" << todo.size() << "] " << r.id << " " << job_status_name(r.status);
        if (!r.reason.empty()) *log << " (" << r.reason << ")";
        *log << "\n";
      }
    }
  };
  std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), std::max<std::size_t>(todo.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  m.triage_job.clear();
  if (!cfg.triage_job.empty()) {
    const auto* j = m.find(cfg.triage_job);
    if (!j) throw ConfigError("triage_job " + cfg.triage_job + " is not a job of this experiment");
    if (j->artifacts.count("triage")) m.triage_job = j->id;
  } else {
    for (const auto& j : m.jobs)
      if (j.artifacts.count("triage")) {
        m.triage_job = j.id;
        break;
      }
  }
  write_manifest();
  write_file_atomic((fs::path(summary.run_dir) / kGridFile).string(), merged_grid(m, summary.run_dir));
  return summary;
}

}  // namespace povml
