#pragma once

// Read-only JSON service over finished runs: triage records, ranking, curves
// and importances. Handlers are plain functions of (artifacts, request) so
// they can be tested without a socket; serve() binds them to HTTP.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <variant>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "povml/orchestrator.hpp"
#include "povml/triage.hpp"

namespace povml {

/// Artifacts of one run, loaded once and never mutated.
struct RunArtifacts {
  std::string id;
  std::string dir;
  RunManifest manifest;
  /// Triage records per job that has them.
  std::map<std::string, std::vector<TriageRecord>> records;
};

inline RunArtifacts load_run(const std::string& dir, std::string id = "") {
  RunArtifacts a;
  a.dir = dir;
  a.id = id.empty() ? std::filesystem::path(dir).lexically_normal().filename().string() : std::move(id);
  if (a.id.empty()) a.id = std::filesystem::path(dir).lexically_normal().parent_path().filename().string();
  a.manifest = load_manifest(dir);
  for (const auto& j : a.manifest.jobs) {
    auto it = j.artifacts.find("triage");
    if (it == j.artifacts.end()) continue;
    a.records[j.id] = nlohmann::json::parse(read_file((std::filesystem::path(dir) / it->second).string()))
                          .get<std::vector<TriageRecord>>();
  }
  return a;
}

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

/// One parsed row of a curve file.
struct CurveRow {
  std::string region, task, model, feature_set;
  int fold = 0;
  std::optional<PrPoint> point;
};

inline std::vector<CurveRow> parse_curve_csv(const std::string& text) {
  std::vector<CurveRow> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != kGridHeader) throw SchemaError("curve file header mismatch");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 9) throw SchemaError("curve row needs 9 fields: " + line);
    CurveRow r{f[0], f[1], f[2], f[3], static_cast<int>(parse_int(f[4]).value_or(0)), std::nullopt};
    if (f[5] != "NA") {
      PrPoint p;
      p.threshold = parse_double(f[5]).value_or(0);
      p.proportion_flagged = parse_double(f[6]).value_or(0);
      if (f[7] != "NA") p.precision = parse_double(f[7]);
      p.recall = parse_double(f[8]).value_or(0);
      r.point = p;
    }
    out.push_back(std::move(r));
  }
  return out;
}

class TriageService {
 public:
  explicit TriageService(std::vector<RunArtifacts> runs) {
    for (auto& r : runs) {
      auto id = r.id;
      if (!runs_.emplace(id, std::move(r)).second) throw ConfigError("duplicate run id " + id);
    }
  }

  HttpResponse handle(const HttpRequest& req) const {
    try {
      if (req.path == "/healthz" && req.method == "GET") return health();
      if (req.path == "/api/records" && req.method == "GET") return with_run(req, [&](const auto& run) { return records(run, req); });
      if (req.path == "/api/rank" && req.method == "POST") return with_run(req, [&](const auto& run) { return rank_records(run, req); });
      if (req.path == "/api/curves" && req.method == "GET") return with_run(req, [&](const auto& run) { return curves(run, req); });
      if (req.path == "/api/importances" && req.method == "GET")
        return with_run(req, [&](const auto& run) { return importances(run, req); });
      return error(404, "path", "no route for " + req.method + " " + req.path);
    } catch (const std::exception& e) {
      return error(500, "server", e.what());
    }
  }

  std::vector<std::string> run_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, r] : runs_) out.push_back(id);
    return out;
  }

 private:
  static HttpResponse json_response(int status, const nlohmann::json& j) { return {status, j.dump()}; }
  static HttpResponse error(int status, const std::string& field, const std::string& message) {
    return json_response(status, {{"error", message}, {"field", field}});
  }

  template <typename F>
  HttpResponse with_run(const HttpRequest& req, F&& f) const {
    auto it = req.query.find("run");
    if (it == req.query.end()) {
      if (runs_.size() == 1) return f(runs_.begin()->second);
      return error(400, "run", "run is required when more than one run is served");
    }
    auto r = runs_.find(it->second);
    if (r == runs_.end()) return error(404, "run", "unknown run " + it->second);
    return f(r->second);
  }

  /// Triage records of the requested job, or of the run's default triage job.
  static std::variant<const std::vector<TriageRecord>*, HttpResponse> triage_records(const RunArtifacts& run,
                                                                                      const HttpRequest& req) {
    std::string job = run.manifest.triage_job;
    if (auto it = req.query.find("job"); it != req.query.end()) job = it->second;
    if (job.empty()) return error(404, "job", "run has no triage records");
    auto it = run.records.find(job);
    if (it == run.records.end()) return error(404, "job", "no triage records for job " + job);
    return &it->second;
  }

  static std::optional<bool> flag(const HttpRequest& req, const std::string& key, std::optional<HttpResponse>& err) {
    auto it = req.query.find(key);
    if (it == req.query.end()) return std::nullopt;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    err = error(400, key, "must be true or false");
    return std::nullopt;
  }

  static std::optional<long long> positive(const HttpRequest& req, const std::string& key, long long fallback,
                                           std::optional<HttpResponse>& err) {
    auto it = req.query.find(key);
    if (it == req.query.end()) return fallback;
    auto v = parse_int(it->second);
    if (!v || *v < 1) {
      err = error(400, key, "must be a positive integer");
      return std::nullopt;
    }
    return *v;
  }

  HttpResponse health() const {
    return json_response(200, {{"status", "ok"}, {"runs", run_ids()}, {"formula_version", kFormulaVersion}});
  }

  static HttpResponse records(const RunArtifacts& run, const HttpRequest& req) {
    auto recs = triage_records(run, req);
    if (auto* e = std::get_if<HttpResponse>(&recs)) return *e;
    const auto& all = *std::get<const std::vector<TriageRecord>*>(recs);
    std::optional<HttpResponse> err;
    auto faded = flag(req, "faded", err);
    auto eligible = flag(req, "eligible", err);
    auto page = positive(req, "page", 1, err);
    auto size = positive(req, "page_size", 50, err);
    if (err) return *err;
    std::vector<const TriageRecord*> kept;
    for (const auto& r : all)
      if ((!faded || r.faded == *faded) && (!eligible || r.eligible == *eligible)) kept.push_back(&r);
    auto total = static_cast<long long>(kept.size());
    long long pages = (total + *size - 1) / *size;
    nlohmann::json rows = nlohmann::json::array();
    for (long long i = (*page - 1) * *size; i < std::min(total, *page * *size); ++i)
      rows.push_back(*kept[static_cast<std::size_t>(i)]);
    return json_response(200, {{"run", run.id},
                               {"job", req.query.count("job") ? req.query.at("job") : run.manifest.triage_job},
                               {"formula_version", kFormulaVersion},
                               {"page", *page},
                               {"page_size", *size},
                               {"total", total},
                               {"total_pages", pages},
                               {"records", rows}});
  }

  static HttpResponse rank_records(const RunArtifacts& run, const HttpRequest& req) {
    auto recs = triage_records(run, req);
    if (auto* e = std::get_if<HttpResponse>(&recs)) return *e;
    nlohmann::json body;
    try {
      body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      return error(400, "body", "request body is not valid JSON");
    }
    if (!body.is_object()) return error(400, "body", "request body must be a JSON object");
    TriageWeights w;
    const nlohmann::json wj = body.value("weights", nlohmann::json::object());
    if (!wj.is_object()) return error(400, "weights", "must be an object");
    for (const auto& [key, v] : wj.items()) {
      if (key == "tau" && v.is_null()) continue;
      if (!v.is_number()) return error(400, key, "must be a number");
      if (key == "w_prob") w.w_prob = v.get<double>();
      else if (key == "w_discrepancy") w.w_discrepancy = v.get<double>();
      else if (key == "w_proximity") w.w_proximity = v.get<double>();
      else if (key == "tau") w.tau = v.get<double>();
      else return error(400, key, "unknown weight");
    }
    if (auto p = w.problem()) return error(400, p->first, p->second);
    std::optional<long long> limit;
    if (body.contains("limit")) {
      if (!body["limit"].is_number_integer() || body["limit"].get<long long>() < 1)
        return error(400, "limit", "must be a positive integer");
      limit = body["limit"].get<long long>();
    }
    auto ranked = rank(*std::get<const std::vector<TriageRecord>*>(recs), w);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (limit && static_cast<long long>(i) >= *limit) break;
      nlohmann::json row = ranked[i].record;
      row["rank"] = i + 1;
      row["score"] = ranked[i].score;
      row["discrepancy_term"] = ranked[i].discrepancy_term;
      row["proximity_term"] = ranked[i].proximity_term;
      row["faded"] = ranked[i].faded;
      rows.push_back(std::move(row));
    }
    return json_response(200, {{"run", run.id},
                               {"formula_version", kFormulaVersion},
                               {"weights", w},
                               {"total", ranked.size()},
                               {"ranked", rows}});
  }

  static HttpResponse curves(const RunArtifacts& run, const HttpRequest& req) {
    auto rows = parse_curve_csv(read_file((std::filesystem::path(run.dir) / kGridFile).string()));
    auto keep = [&](const std::string& key, const std::string& v) {
      auto it = req.query.find(key);
      return it == req.query.end() || it->second == v;
    };
    // Group consecutive rows of one (job, fold).
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size();) {
      const auto& r = rows[i];
      std::size_t j = i;
      nlohmann::json points = nlohmann::json::array();
      for (; j < rows.size() && rows[j].region == r.region && rows[j].task == r.task && rows[j].model == r.model &&
             rows[j].feature_set == r.feature_set && rows[j].fold == r.fold;
           ++j)
        if (rows[j].point) {
          const auto& p = *rows[j].point;
          points.push_back({{"threshold", p.threshold},
                            {"proportion_flagged", p.proportion_flagged},
                            {"precision", p.precision ? nlohmann::json(*p.precision) : nlohmann::json()},
                            {"recall", p.recall}});
        }
      if (keep("region", r.region) && keep("task", r.task) && keep("model", r.model) &&
          keep("feature_set", r.feature_set)) {
        nlohmann::json c = {{"job", job_id(r.region, r.task, r.model, r.feature_set)},
                            {"region", r.region},
                            {"task", r.task},
                            {"model", r.model},
                            {"feature_set", r.feature_set},
                            {"fold", r.fold},
                            {"degenerate", points.empty()},
                            {"points", points}};
        // Flagging everyone gives the prevalence: the no-skill precision reference.
        c["prevalence"] = points.empty() ? nlohmann::json() : points.front()["precision"];
        out.push_back(std::move(c));
      }
      i = j;
    }
    return json_response(200, {{"run", run.id}, {"curves", out}});
  }

  static HttpResponse importances(const RunArtifacts& run, const HttpRequest& req) {
    auto it = req.query.find("job");
    if (it == req.query.end()) return error(400, "job", "job is required");
    const auto* job = run.manifest.find(it->second);
    if (!job) return error(404, "job", "unknown job " + it->second);
    auto a = job->artifacts.find("importances");
    if (a == job->artifacts.end()) return error(404, "job", "job " + job->id + " has no importances");
    std::istringstream in(read_file((std::filesystem::path(run.dir) / a->second).string()));
    std::string line;
    std::getline(in, line);
    nlohmann::json rows = nlohmann::json::array();
    while (std::getline(in, line)) {
      auto f = split(line);
      if (f.size() != 2) continue;
      rows.push_back({{"column", f[0]}, {"importance", parse_double(f[1]).value_or(0)}});
    }
    return json_response(200, {{"run", run.id}, {"job", job->id}, {"importances", rows}});
  }

  std::map<std::string, RunArtifacts> runs_;
};

/// Routes httplib requests through the service.
inline void mount(httplib::Server& server, const TriageService& service) {
  auto adapt = [&service](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query[k] = v;
    auto out = service.handle(r);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  for (const char* path : {"/healthz", "/api/records", "/api/curves", "/api/importances"}) server.Get(path, adapt);
  server.Post("/api/rank", adapt);
}

}  // namespace povml
