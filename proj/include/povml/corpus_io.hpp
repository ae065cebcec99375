#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <unordered_set>

#include "povml/corpus.hpp"

namespace povml {

namespace detail {

inline std::string answer_to_text(const Question& q, const Answer& a) {
  if (answer_missing(a)) return "NA";
  switch (q.kind) {
    case AnswerKind::Numeric: return format_double(std::get<double>(a));
    case AnswerKind::Boolean: return std::get<bool>(a) ? "1" : "0";
    case AnswerKind::Categorical: return std::get<std::string>(a);
  }
  return "NA";
}

inline std::string label_to_text(LabelState s) {
  switch (s) {
    case LabelState::Lacking: return "1";
    case LabelState::NotLacking: return "0";
    case LabelState::Missing: return "NA";
  }
  return "NA";
}

inline std::string opt_text(const std::optional<std::string>& s) { return s ? *s : std::string(); }

/// Line-oriented reader for the corpus CSV files.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path) : name_(path.filename().string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(name_, 0, "", "cannot open file");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines_.push_back(line);
    }
    if (lines_.empty()) throw ParseError(name_, 1, "", "missing header line");
    header_ = split(lines_[0]);
    for (std::size_t i = 0; i < header_.size(); ++i) column_[header_[i]] = i;
  }

  const std::string& name() const { return name_; }
  const std::vector<std::string>& header() const { return header_; }

  void require(const std::vector<std::string>& cols) const {
    for (const auto& c : cols)
      if (!column_.count(c)) throw ParseError(name_, 1, c, "required column missing from header");
  }

  /// Calls fn(line_number, fields) for each data row; rows with the wrong field
  /// count are rejected.
  template <typename Fn>
  void rows(Fn&& fn) const {
    for (std::size_t i = 1; i < lines_.size(); ++i) {
      if (lines_[i].empty() && i + 1 == lines_.size()) break;
      auto f = split(lines_[i]);
      if (f.size() != header_.size())
        throw ParseError(name_, i + 1, f.size() < header_.size() ? header_[f.size()] : header_.back(),
                         "expected " + std::to_string(header_.size()) + " fields, found " + std::to_string(f.size()));
      fn(i + 1, f);
    }
  }

  std::size_t col(const std::string& name) const { return column_.at(name); }

  double number(std::size_t line, const std::vector<std::string>& f, const std::string& name) const {
    auto v = parse_double(f[col(name)]);
    if (!v) throw ParseError(name_, line, name, "not a number: '" + f[col(name)] + "'");
    return *v;
  }

  std::optional<double> opt_number(std::size_t line, const std::vector<std::string>& f, const std::string& name) const {
    if (f[col(name)].empty()) return std::nullopt;
    return number(line, f, name);
  }

  const std::string& text(std::size_t line, const std::vector<std::string>& f, const std::string& name, bool allow_empty = false) const {
    const auto& s = f[col(name)];
    if (s.empty() && !allow_empty) throw ParseError(name_, line, name, "empty value");
    return s;
  }

 private:
  std::string name_;
  std::vector<std::string> lines_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> column_;
};

inline double parse_proportion(const CsvReader& r, std::size_t line, const std::vector<std::string>& f, const std::string& name) {
  double v = r.number(line, f, name);
  if (!(v >= 0.0 && v <= 1.0)) throw ParseError(r.name(), line, name, "aggregate outside [0,1]");
  return v;
}

inline LocationClass parse_class(const CsvReader& r, std::size_t line, const std::vector<std::string>& f) {
  auto c = parse_location_class(r.text(line, f, "location_class"));
  if (!c) throw ParseError(r.name(), line, "location_class", "expected urban or rural");
  return *c;
}

}  // namespace detail

/// Writes the corpus as a directory of delimited text files plus a JSON sidecar.
inline void save_corpus(const Corpus& c, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  auto path = [&](const char* f) { return (fs::path(directory) / f).string(); };
  const auto& schema = survey_schema();
  const auto& aggs = aggregate_names();

  {
    std::string out = "household_id,region_id,locality_id,block_id,latitude,longitude,location_class,n_members\n";
    for (const auto& h : c.households) {
      out += h.household_id + "," + h.region_id + "," + detail::opt_text(h.locality_id) + "," +
             detail::opt_text(h.block_id) + "," + (h.block_coords ? format_double(h.block_coords->latitude) : "") + "," +
             (h.block_coords ? format_double(h.block_coords->longitude) : "") + "," +
             std::string(location_class_name(h.location_class)) + "," + std::to_string(h.n_members) + "\n";
    }
    write_file_atomic(path("households.csv"), out);
  }
  {
    std::string out = "locality_id,region_id,location_class,latitude,longitude";
    for (const auto& a : aggs) out += "," + a;
    out += "\n";
    for (const auto& l : c.localities) {
      out += l.locality_id + "," + l.region_id + "," + std::string(location_class_name(l.location_class)) + "," +
             format_double(l.coords.latitude) + "," + format_double(l.coords.longitude);
      for (const auto& a : aggs) out += "," + format_double(l.aggregates.at(a));
      out += "\n";
    }
    write_file_atomic(path("localities.csv"), out);
  }
  {
    std::string out = "block_id,locality_id,latitude,longitude";
    for (const auto& a : aggs) out += "," + a;
    out += "\n";
    for (const auto& b : c.blocks) {
      out += b.block_id + "," + b.locality_id + "," + format_double(b.coords.latitude) + "," + format_double(b.coords.longitude);
      for (const auto& a : aggs) out += "," + format_double(b.aggregates.at(a));
      out += "\n";
    }
    write_file_atomic(path("blocks.csv"), out);
  }
  {
    std::string out = "household_id";
    for (const auto& q : schema) out += "," + q.id;
    out += ",self_reported_income,estimated_income";
    for (auto k : kAllIndicators) out += ",label_" + std::string(indicator_name(k));
    out += "\n";
    for (const auto& s : c.surveys) {
      out += s.household_id;
      for (std::size_t q = 0; q < schema.size(); ++q) out += "," + detail::answer_to_text(schema[q], s.answers[q]);
      out += "," + format_double(s.self_reported_income) + "," + format_double(s.estimated_income);
      for (auto k : kAllIndicators) out += "," + detail::label_to_text(s.indicator_labels[idx(k)]);
      out += "\n";
    }
    write_file_atomic(path("surveys.csv"), out);
  }
  {
    auto ver = verifiable_questions();
    std::string out = "household_id,surveyor_flag";
    for (auto q : ver) out += "," + schema[q].id;
    out += "\n";
    for (const auto& v : c.verifications) {
      out += v.household_id + "," + (v.surveyor_flag ? "1" : "0");
      for (auto q : ver) {
        auto it = v.entries.find(q);
        out += ",";
        if (it != v.entries.end()) out += verification_status_name(it->second);
      }
      out += "\n";
    }
    write_file_atomic(path("verifications.csv"), out);
  }
  {
    std::string out = "household_id,program_id,benefit_id,amount,date\n";
    for (const auto& t : c.transactions)
      out += t.household_id + "," + t.program_id + "," + t.benefit_id + "," + format_double(t.amount) + "," + t.date.str() + "\n";
    write_file_atomic(path("transactions.csv"), out);
  }
  {
    std::string out = "household_id,development_level,underreport_propensity";
    for (auto k : kAllIndicators) out += ",true_" + std::string(indicator_name(k));
    out += "\n";
    for (const auto& g : c.ground_truth) {
      out += g.household_id + "," + format_double(g.development_level) + "," + format_double(g.underreport_propensity);
      for (auto k : kAllIndicators) out += g.true_indicators[idx(k)] ? ",1" : ",0";
      out += "\n";
    }
    write_file_atomic(path("ground_truth.csv"), out);
  }
  {
    nlohmann::json meta = {
        {"schema_version", kSchemaVersion},
        {"seed", c.config.seed},
        {"config", c.config},
        {"programs", c.programs},
        {"planted", c.planted},
    };
    std::vector<std::string> qids;
    for (const auto& q : schema) qids.push_back(q.id);
    meta["questions"] = qids;
    write_file_atomic(path("corpus_meta.json"), meta.dump(2) + "\n");
  }
}

/// Reads a directory written by save_corpus. Malformed content raises ParseError
/// (file, line, field); unknown survey columns raise SchemaError.
inline Corpus load_corpus(const std::string& directory) {
  namespace fs = std::filesystem;
  using detail::CsvReader;
  if (!fs::is_directory(directory)) throw Error("corpus directory not found: " + directory);
  auto path = [&](const char* f) { return fs::path(directory) / f; };
  const auto& schema = survey_schema();
  Corpus c;

  {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_file(path("corpus_meta.json").string()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("corpus_meta.json", 1, "", e.what());
    }
    if (meta.value("schema_version", 0) != kSchemaVersion) throw SchemaError("corpus_meta.json: unsupported schema_version");
    try {
      c.config = meta.at("config").get<CorpusConfig>();
      c.programs = meta.at("programs").get<std::vector<std::string>>();
      c.planted = meta.at("planted").get<PlantedModel>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("corpus_meta.json", 1, "", e.what());
    }
  }

  std::unordered_set<std::string> locality_ids, block_ids, household_ids;
  std::unordered_set<std::string> program_ids(c.programs.begin(), c.programs.end());
  {
    CsvReader r(path("localities.csv"));
    r.require({"locality_id", "region_id", "location_class", "latitude", "longitude"});
    r.rows([&](std::size_t line, const auto& f) {
      Locality l;
      l.locality_id = r.text(line, f, "locality_id");
      l.region_id = r.text(line, f, "region_id");
      l.location_class = detail::parse_class(r, line, f);
      l.coords = {r.number(line, f, "latitude"), r.number(line, f, "longitude")};
      for (std::size_t i = 5; i < r.header().size(); ++i) l.aggregates[r.header()[i]] = detail::parse_proportion(r, line, f, r.header()[i]);
      if (!locality_ids.insert(l.locality_id).second) throw ParseError(r.name(), line, "locality_id", "duplicate id");
      c.localities.push_back(std::move(l));
    });
  }
  {
    CsvReader r(path("blocks.csv"));
    r.require({"block_id", "locality_id", "latitude", "longitude"});
    r.rows([&](std::size_t line, const auto& f) {
      CensusBlock b;
      b.block_id = r.text(line, f, "block_id");
      b.locality_id = r.text(line, f, "locality_id");
      if (!locality_ids.count(b.locality_id)) throw ParseError(r.name(), line, "locality_id", "unknown locality " + b.locality_id);
      b.coords = {r.number(line, f, "latitude"), r.number(line, f, "longitude")};
      for (std::size_t i = 4; i < r.header().size(); ++i) b.aggregates[r.header()[i]] = detail::parse_proportion(r, line, f, r.header()[i]);
      if (!block_ids.insert(b.block_id).second) throw ParseError(r.name(), line, "block_id", "duplicate id");
      c.blocks.push_back(std::move(b));
    });
  }
  {
    CsvReader r(path("households.csv"));
    r.require({"household_id", "region_id", "locality_id", "block_id", "latitude", "longitude", "location_class", "n_members"});
    r.rows([&](std::size_t line, const auto& f) {
      Household h;
      h.household_id = r.text(line, f, "household_id");
      h.region_id = r.text(line, f, "region_id");
      if (const auto& l = r.text(line, f, "locality_id", true); !l.empty()) {
        if (!locality_ids.count(l)) throw ParseError(r.name(), line, "locality_id", "unknown locality " + l);
        h.locality_id = l;
      }
      if (const auto& b = r.text(line, f, "block_id", true); !b.empty()) {
        if (!block_ids.count(b)) throw ParseError(r.name(), line, "block_id", "unknown block " + b);
        if (!h.locality_id) throw ParseError(r.name(), line, "block_id", "block present without locality");
        h.block_id = b;
      }
      auto lat = r.opt_number(line, f, "latitude");
      auto lon = r.opt_number(line, f, "longitude");
      if (lat.has_value() != lon.has_value()) throw ParseError(r.name(), line, "longitude", "coordinates must be both present or both absent");
      if (lat) h.block_coords = Coords{*lat, *lon};
      if (h.block_coords.has_value() != h.block_id.has_value())
        throw ParseError(r.name(), line, "latitude", "coordinates present iff block present");
      h.location_class = detail::parse_class(r, line, f);
      auto m = parse_int(r.text(line, f, "n_members"));
      if (!m || *m < 1) throw ParseError(r.name(), line, "n_members", "expected a positive integer");
      h.n_members = static_cast<int>(*m);
      if (!household_ids.insert(h.household_id).second) throw ParseError(r.name(), line, "household_id", "duplicate id");
      c.households.push_back(std::move(h));
    });
  }
  {
    CsvReader r(path("surveys.csv"));
    std::set<std::string> known = {"household_id", "self_reported_income", "estimated_income"};
    for (const auto& q : schema) known.insert(q.id);
    for (auto k : kAllIndicators) known.insert("label_" + std::string(indicator_name(k)));
    std::set<std::string> seen;
    for (const auto& h : r.header()) {
      if (!known.count(h)) throw SchemaError(r.name() + ": unknown question_id '" + h + "'");
      if (!seen.insert(h).second) throw SchemaError(r.name() + ": question_id '" + h + "' appears more than once");
    }
    r.require(std::vector<std::string>(known.begin(), known.end()));
    std::unordered_set<std::string> surveyed;
    r.rows([&](std::size_t line, const auto& f) {
      CuisSurvey s;
      s.household_id = r.text(line, f, "household_id");
      if (!household_ids.count(s.household_id)) throw ParseError(r.name(), line, "household_id", "unknown household " + s.household_id);
      if (!surveyed.insert(s.household_id).second) throw ParseError(r.name(), line, "household_id", "duplicate survey");
      s.answers.resize(schema.size());
      for (std::size_t q = 0; q < schema.size(); ++q) {
        const auto& v = r.text(line, f, schema[q].id);
        if (v == "NA") continue;
        switch (schema[q].kind) {
          case AnswerKind::Numeric: s.answers[q] = r.number(line, f, schema[q].id); break;
          case AnswerKind::Boolean:
            if (v != "0" && v != "1") throw ParseError(r.name(), line, schema[q].id, "expected 0, 1 or NA");
            s.answers[q] = v == "1";
            break;
          case AnswerKind::Categorical: s.answers[q] = v; break;
        }
      }
      s.self_reported_income = r.number(line, f, "self_reported_income");
      s.estimated_income = r.number(line, f, "estimated_income");
      if (s.self_reported_income < 0) throw ParseError(r.name(), line, "self_reported_income", "negative income");
      if (s.estimated_income < 0) throw ParseError(r.name(), line, "estimated_income", "negative income");
      for (auto k : kAllIndicators) {
        std::string col = "label_" + std::string(indicator_name(k));
        const auto& v = r.text(line, f, col);
        if (v == "1") s.indicator_labels[idx(k)] = LabelState::Lacking;
        else if (v == "0") s.indicator_labels[idx(k)] = LabelState::NotLacking;
        else if (v == "NA") s.indicator_labels[idx(k)] = LabelState::Missing;
        else throw ParseError(r.name(), line, col, "expected 0, 1 or NA");
      }
      c.surveys.push_back(std::move(s));
    });
  }
  {
    CsvReader r(path("verifications.csv"));
    r.require({"household_id", "surveyor_flag"});
    std::vector<std::pair<std::size_t, std::size_t>> qcols;  // (column, question)
    for (std::size_t i = 2; i < r.header().size(); ++i) {
      auto q = question_index(r.header()[i]);
      if (!q) throw SchemaError(r.name() + ": unknown question_id '" + r.header()[i] + "'");
      if (!schema[*q].verifiable) throw SchemaError(r.name() + ": question '" + r.header()[i] + "' is not verifiable");
      qcols.emplace_back(i, *q);
    }
    std::unordered_set<std::string> surveyed;
    for (const auto& s : c.surveys) surveyed.insert(s.household_id);
    r.rows([&](std::size_t line, const auto& f) {
      VerificationRecord v;
      v.household_id = r.text(line, f, "household_id");
      if (!surveyed.count(v.household_id)) throw ParseError(r.name(), line, "household_id", "no survey for household " + v.household_id);
      const auto& flag = r.text(line, f, "surveyor_flag");
      if (flag != "0" && flag != "1") throw ParseError(r.name(), line, "surveyor_flag", "expected 0 or 1");
      v.surveyor_flag = flag == "1";
      for (auto [col, q] : qcols) {
        const auto& s = f[col];
        if (s.empty()) continue;
        if (s == "match") v.entries[q] = VerificationStatus::Match;
        else if (s == "under") v.entries[q] = VerificationStatus::UnderReported;
        else if (s == "over") v.entries[q] = VerificationStatus::OverReported;
        else throw ParseError(r.name(), line, schema[q].id, "expected match, under or over");
      }
      c.verifications.push_back(std::move(v));
    });
  }
  {
    CsvReader r(path("transactions.csv"));
    r.require({"household_id", "program_id", "benefit_id", "amount", "date"});
    r.rows([&](std::size_t line, const auto& f) {
      PubTransaction t;
      t.household_id = r.text(line, f, "household_id");
      if (!household_ids.count(t.household_id)) throw ParseError(r.name(), line, "household_id", "unknown household " + t.household_id);
      t.program_id = r.text(line, f, "program_id");
      if (!program_ids.count(t.program_id)) throw ParseError(r.name(), line, "program_id", "unknown program " + t.program_id);
      t.benefit_id = r.text(line, f, "benefit_id");
      t.amount = r.number(line, f, "amount");
      if (t.amount < 0) throw ParseError(r.name(), line, "amount", "negative amount");
      auto d = Date::parse(r.text(line, f, "date"));
      if (!d) throw ParseError(r.name(), line, "date", "expected YYYY-MM-DD");
      if (*d < c.config.window_start || c.config.window_end < *d) throw ParseError(r.name(), line, "date", "outside corpus window");
      t.date = *d;
      c.transactions.push_back(std::move(t));
    });
  }
  {
    CsvReader r(path("ground_truth.csv"));
    r.require({"household_id", "development_level", "underreport_propensity"});
    r.rows([&](std::size_t line, const auto& f) {
      GroundTruth g;
      g.household_id = r.text(line, f, "household_id");
      if (!household_ids.count(g.household_id)) throw ParseError(r.name(), line, "household_id", "unknown household " + g.household_id);
      g.development_level = r.number(line, f, "development_level");
      g.underreport_propensity = r.number(line, f, "underreport_propensity");
      for (auto k : kAllIndicators) {
        std::string col = "true_" + std::string(indicator_name(k));
        const auto& v = r.text(line, f, col);
        if (v != "0" && v != "1") throw ParseError(r.name(), line, col, "expected 0 or 1");
        g.true_indicators[idx(k)] = v == "1";
      }
      c.ground_truth.push_back(std::move(g));
    });
  }
  return c;
}

// ---------------------------------------------------------------------------
// Filters

/// Keeps the households accepted by `keep` together with every dependent record.
inline Corpus filter_households(const Corpus& c, const std::function<bool(const Household&)>& keep) {
  Corpus out;
  out.config = c.config;
  out.programs = c.programs;
  out.localities = c.localities;
  out.blocks = c.blocks;
  out.planted = c.planted;
  std::unordered_set<std::string> kept;
  for (const auto& h : c.households)
    if (keep(h)) {
      kept.insert(h.household_id);
      out.households.push_back(h);
    }
  auto in = [&](const std::string& id) { return kept.count(id) > 0; };
  for (const auto& s : c.surveys)
    if (in(s.household_id)) out.surveys.push_back(s);
  for (const auto& v : c.verifications)
    if (in(v.household_id)) out.verifications.push_back(v);
  for (const auto& t : c.transactions)
    if (in(t.household_id)) out.transactions.push_back(t);
  for (const auto& g : c.ground_truth)
    if (in(g.household_id)) out.ground_truth.push_back(g);
  return out;
}

/// Discards households with no locality-level information.
inline Corpus apply_locality_filter(const Corpus& c) {
  return filter_households(c, [](const Household& h) { return h.locality_id.has_value(); });
}

/// Removes households whose label for `indicator` is missing (or who have no survey).
inline Corpus drop_missing_labels(const Corpus& c, PovertyIndicator indicator) {
  std::unordered_set<std::string> labeled;
  for (const auto& s : c.surveys)
    if (s.indicator_labels[idx(indicator)] != LabelState::Missing) labeled.insert(s.household_id);
  return filter_households(c, [&](const Household& h) { return labeled.count(h.household_id) > 0; });
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Checks referential integrity and entity invariants of an in-memory corpus.
inline ValidationReport validate_corpus(const Corpus& c) {
  ValidationReport rep;
  CorpusIndex index(c);
  auto bad = [&](std::string s) { rep.problems.push_back(std::move(s)); };
  std::set<std::string> regions;
  for (const auto& r : c.region_ids()) regions.insert(r);
  for (const auto& b : c.blocks) {
    if (!index.locality(b.locality_id)) bad("block " + b.block_id + " references unknown locality");
    for (const auto& [k, v] : b.aggregates)
      if (!(v >= 0 && v <= 1)) bad("block " + b.block_id + " aggregate " + k + " outside [0,1]");
  }
  for (const auto& h : c.households) {
    if (!regions.count(h.region_id)) bad("household " + h.household_id + " has unknown region " + h.region_id);
    if (h.block_id && !h.locality_id) bad("household " + h.household_id + " has block without locality");
    if (h.block_id.has_value() != h.block_coords.has_value()) bad("household " + h.household_id + " coords/block mismatch");
    if (h.locality_id && !index.locality(*h.locality_id)) bad("household " + h.household_id + " unknown locality");
    if (h.block_id && !index.block(*h.block_id)) bad("household " + h.household_id + " unknown block");
    if (h.n_members < 1) bad("household " + h.household_id + " has no members");
    if (!index.truth(h.household_id)) bad("household " + h.household_id + " lacks ground truth");
  }
  for (const auto& s : c.surveys) {
    if (!index.household(s.household_id)) bad("survey references unknown household " + s.household_id);
    if (s.self_reported_income < 0 || s.estimated_income < 0) bad("survey " + s.household_id + " negative income");
  }
  for (const auto& v : c.verifications) {
    if (!index.survey(v.household_id)) bad("verification without survey " + v.household_id);
    for (const auto& [q, st] : v.entries)
      if (q >= survey_schema().size() || !survey_schema()[q].verifiable) bad("verification of non-verifiable question");
  }
  for (const auto& t : c.transactions) {
    if (!index.household(t.household_id)) bad("transaction references unknown household " + t.household_id);
    if (t.amount < 0) bad("negative transaction amount for " + t.household_id);
    if (t.date < c.config.window_start || c.config.window_end < t.date) bad("transaction outside window for " + t.household_id);
  }
  return rep;
}

}  // namespace povml
