// Command-line entry points: corpus generation and validation, experiment
// runs, reports over finished runs, and the triage HTTP service.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "povml/povml.hpp"

namespace fs = std::filesystem;
using namespace povml;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

/// Raised for bad flags or missing inputs; maps to the usage exit code.
struct UsageError : Error {
  using Error::Error;
};

void require_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("directory not found: " + dir);
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
    std::cerr << "wrote " << out << "\n";
  }
}

int corpus_generate(const std::string& config_path, std::optional<std::int64_t> n, std::optional<std::uint64_t> seed,
                    std::optional<int> regions, const std::string& out) {
  CorpusConfig cfg;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
    cfg = nlohmann::json::parse(read_file(config_path)).get<CorpusConfig>();
  }
  if (n) cfg.n_households = *n;
  if (seed) cfg.seed = *seed;
  if (regions) cfg.n_regions = *regions;
  auto c = generate_corpus(cfg);
  save_corpus(c, out);
  std::cerr << "generated " << c.households.size() << " households, " << c.verifications.size() << " verifications, "
            << c.transactions.size() << " transactions into " << out << "\n";
  return kExitOk;
}

int corpus_validate(const std::string& dir) {
  require_dir(dir);
  auto c = load_corpus(dir);
  auto rep = validate_corpus(c);
  for (const auto& p : rep.problems) std::cout << p << "\n";
  std::cout << (rep.ok() ? "ok" : "invalid") << ": " << c.households.size() << " households\n";
  return rep.ok() ? kExitOk : kExitFailed;
}

int experiment_run(const std::string& config_path, const std::string& out, std::optional<int> parallelism) {
  if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
  auto cfg = load_experiment_config(config_path);
  if (!out.empty()) cfg.output_dir = out;
  if (parallelism) cfg.parallelism = *parallelism;
  auto s = run_experiment(cfg, &std::cerr);
  const auto& m = s.manifest;
  std::cerr << "run " << s.run_dir << ": executed " << s.executed << ", skipped " << s.skipped << "; done "
            << m.count(JobStatus::Done) << ", degenerate " << m.count(JobStatus::Degenerate) << ", failed "
            << m.count(JobStatus::Failed) << "\n";
  return s.exit_code();
}

int experiment_status(const std::string& run) {
  require_dir(run);
  auto m = load_manifest(run);
  for (const auto& j : m.jobs) {
    std::cout << j.id << "\t" << job_status_name(j.status);
    if (!j.reason.empty()) std::cout << "\t" << j.reason;
    std::cout << "\n";
  }
  std::cout << "total " << m.jobs.size() << ", done " << m.count(JobStatus::Done) << ", degenerate "
            << m.count(JobStatus::Degenerate) << ", failed " << m.count(JobStatus::Failed) << ", pending "
            << m.count(JobStatus::Pending) << "\n";
  return m.count(JobStatus::Failed) ? kExitFailed : kExitOk;
}

int report_curves(const std::string& run, const std::map<std::string, std::string>& filters, const std::string& out) {
  require_dir(run);
  auto path = fs::path(run) / kGridFile;
  if (!fs::exists(path)) throw UsageError("no grid export in " + run);
  std::istringstream in(read_file(path.string()));
  std::string line, text;
  std::getline(in, line);
  text = line + "\n";
  static const std::vector<std::string> keys = {"region", "task", "model", "feature_set"};
  while (std::getline(in, line)) {
    auto f = split(line);
    bool keep = true;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto it = filters.find(keys[i]);
      if (it != filters.end() && !it->second.empty() && f[i] != it->second) keep = false;
    }
    if (keep) text += line + "\n";
  }
  emit(out, text);
  return kExitOk;
}

int report_importances(const std::string& run, const std::string& job, std::size_t top) {
  require_dir(run);
  auto m = load_manifest(run);
  const auto* j = m.find(job);
  if (!j) throw UsageError("unknown job " + job);
  auto it = j->artifacts.find("importances");
  if (it == j->artifacts.end()) throw UsageError("job " + job + " has no importances");
  std::istringstream in(read_file((fs::path(run) / it->second).string()));
  std::string line;
  for (std::size_t i = 0; std::getline(in, line) && (top == 0 || i <= top); ++i) std::cout << line << "\n";
  return kExitOk;
}

int report_programs(const std::string& dir, const std::string& indicator, const std::string& benefit_program,
                    const std::string& out) {
  require_dir(dir);
  auto k = parse_indicator(indicator);
  if (!k) throw UsageError("unknown indicator " + indicator);
  auto c = load_corpus(dir);
  std::string text;
  if (benefit_program.empty()) {
    auto t = program_indicator_table(c, *k);
    text = "program,count,proportion_lacking,ci_low,ci_high\n";
    for (const auto& r : t.rows)
      text += r.program + "," + std::to_string(r.count) + "," + format_double(r.proportion) + "," +
              format_double(r.ci_low) + "," + format_double(r.ci_high) + "\n";
    text += "ALL,," + format_double(t.overall) + ",,\n";
    for (const auto& n : t.notes) std::cerr << n << "\n";
  } else {
    auto h = benefit_share_histogram(c, *k, benefit_program);
    text = "bin_low,bin_high,lacking,not_lacking\n";
    for (std::size_t b = 0; b < h.lacking.size(); ++b)
      text += format_double(h.bin_edges[b]) + "," + format_double(h.bin_edges[b + 1]) + "," +
              std::to_string(h.lacking[b]) + "," + std::to_string(h.not_lacking[b]) + "\n";
  }
  emit(out, text);
  return kExitOk;
}

int serve(const std::vector<std::string>& runs, const std::string& host, int port) {
  std::vector<RunArtifacts> loaded;
  for (const auto& r : runs) {
    require_dir(r);
    loaded.push_back(load_run(r));
  }
  TriageService service(std::move(loaded));
  httplib::Server server;
  mount(server, service);
  std::cerr << "serving " << join(service.run_ids()) << " on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poverty-targeting ML pipelines on synthetic social-services data"};
  app.require_subcommand(1);
  std::function<int()> action;

  auto* corpus = app.add_subcommand("corpus", "Generate or validate a corpus directory");
  corpus->require_subcommand(1);
  auto* gen = corpus->add_subcommand("generate", "Generate a synthetic corpus");
  std::string gen_config, gen_out;
  std::optional<std::int64_t> gen_n;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_regions;
  gen->add_option("--config", gen_config, "Corpus config JSON");
  gen->add_option("--n", gen_n, "Number of households");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--regions", gen_regions, "Number of regions");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->callback([&] { action = [&] { return corpus_generate(gen_config, gen_n, gen_seed, gen_regions, gen_out); }; });
  auto* val = corpus->add_subcommand("validate", "Load and check a corpus directory");
  std::string val_dir;
  val->add_option("--dir", val_dir, "Corpus directory")->required();
  val->callback([&] { action = [&] { return corpus_validate(val_dir); }; });

  auto* exp = app.add_subcommand("experiment", "Run or inspect an experiment");
  exp->require_subcommand(1);
  auto* run = exp->add_subcommand("run", "Run every job of an experiment config");
  std::string run_config, run_out;
  std::optional<int> run_par;
  run->add_option("--config", run_config, "Experiment config JSON")->required();
  run->add_option("--out", run_out, "Output directory (overrides the config)");
  run->add_option("--parallelism", run_par, "Jobs in flight");
  run->callback([&] { action = [&] { return experiment_run(run_config, run_out, run_par); }; });
  auto* status = exp->add_subcommand("status", "Show job status of a run");
  std::string status_run;
  status->add_option("--run", status_run, "Run directory")->required();
  status->callback([&] { action = [&] { return experiment_status(status_run); }; });

  auto* report = app.add_subcommand("report", "Reports over runs and corpora");
  report->require_subcommand(1);
  auto* curves = report->add_subcommand("curves", "Precision-recall curve rows of a run");
  std::string curves_run, curves_out;
  std::map<std::string, std::string> filters;
  curves->add_option("--run", curves_run, "Run directory")->required();
  curves->add_option("--region", filters["region"], "Region filter");
  curves->add_option("--task", filters["task"], "Task filter");
  curves->add_option("--model", filters["model"], "Model id filter");
  curves->add_option("--feature-set", filters["feature_set"], "Feature set filter");
  curves->add_option("--out", curves_out, "Output file (default stdout)");
  curves->callback([&] { action = [&] { return report_curves(curves_run, filters, curves_out); }; });
  auto* imps = report->add_subcommand("importances", "Ranked feature importances of a job");
  std::string imps_run, imps_job;
  std::size_t imps_top = 0;
  imps->add_option("--run", imps_run, "Run directory")->required();
  imps->add_option("--job", imps_job, "Job id")->required();
  imps->add_option("--top", imps_top, "Rows to print (0 = all)");
  imps->callback([&] { action = [&] { return report_importances(imps_run, imps_job, imps_top); }; });
  auto* progs = report->add_subcommand("programs", "Indicator prevalence by program enrollment");
  std::string progs_dir, progs_indicator = "education", progs_share, progs_out;
  progs->add_option("--corpus", progs_dir, "Corpus directory")->required();
  progs->add_option("--indicator", progs_indicator, "Poverty indicator");
  progs->add_option("--benefit-share", progs_share, "Histogram of this program's benefit share instead");
  progs->add_option("--out", progs_out, "Output file (default stdout)");
  progs->callback([&] { action = [&] { return report_programs(progs_dir, progs_indicator, progs_share, progs_out); }; });

  auto* srv = app.add_subcommand("serve", "Serve triage JSON endpoints over finished runs");
  std::vector<std::string> srv_runs;
  std::string srv_host = "127.0.0.1";
  int srv_port = 8080;
  srv->add_option("--run", srv_runs, "Run directory (repeatable)")->required();
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--port", srv_port, "Port");
  srv->callback([&] { action = [&] { return serve(srv_runs, srv_host, srv_port); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}
