#include "conceptprobe/analysis.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <set>

#include <spdlog/fmt/fmt.h>

#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"

namespace cprobe {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string file_token(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
  return out.empty() ? "_" : out;
}

}  // namespace

VariableExpr VariableExpr::parse(std::string_view text) {
  static const std::regex kName(R"(([A-Za-z_][A-Za-z0-9_]*))");
  static const std::regex kLog(R"(log\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\+\s*([0-9]*\.?[0-9]+)\s*)?\))");
  static const std::regex kGe(R"(ge\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*,\s*(-?[0-9]*\.?[0-9]+)\s*\))");
  VariableExpr e;
  e.text_ = trim(text);
  std::smatch m;
  if (std::regex_match(e.text_, m, kLog)) {
    e.op_ = Op::log;
    e.variable_ = m[1];
    e.constant_ = m[2].matched ? csv::parse_double(m[2].str()) : 0.0;
  } else if (std::regex_match(e.text_, m, kGe)) {
    e.op_ = Op::indicator_ge;
    e.variable_ = m[1];
    e.constant_ = csv::parse_double(m[2].str());
  } else if (std::regex_match(e.text_, m, kName)) {
    e.variable_ = m[1];
  } else {
    throw ConfigError("cannot parse variable expression '" + e.text_ +
                      "' (expected name, log(name), log(name+c) or ge(name,c))");
  }
  return e;
}

double VariableExpr::apply(double value) const {
  switch (op_) {
    case Op::identity: return value;
    case Op::log: return std::log(value + constant_);
    case Op::indicator_ge: return value >= constant_ ? 1.0 : 0.0;
  }
  return value;
}

const char* to_string(MeasureSource s) noexcept {
  switch (s) {
    case MeasureSource::llm_measure: return "llm_measure";
    case MeasureSource::prompting: return "prompting";
    case MeasureSource::external_csv: return "external_csv";
  }
  return "?";
}

MeasureSource parse_measure_source(std::string_view text) {
  if (text == "llm_measure") return MeasureSource::llm_measure;
  if (text == "prompting") return MeasureSource::prompting;
  if (text == "external_csv") return MeasureSource::external_csv;
  throw ConfigError("unknown measure source '" + std::string(text) +
                    "' (expected llm_measure, prompting or external_csv)");
}

std::string MeasureBinding::value_column() const {
  if (!column.empty()) return column;
  switch (source) {
    case MeasureSource::llm_measure: return "raw_projection";
    case MeasureSource::prompting: return "score";
    case MeasureSource::external_csv: break;
  }
  throw ConfigError("measure '" + name + "': external_csv sources need a column");
}

StudySpec StudySpec::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("study must be a JSON object");
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  StudySpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.method = j.value("method", s.method);
    s.dependent = VariableExpr::parse(j.at("dependent").get<std::string>());
    for (const auto& r : j.at("regressors")) s.regressors.push_back(VariableExpr::parse(r.get<std::string>()));
    s.standardize_measure = j.value("standardize_measure", true);
    s.listwise_deletion = j.value("listwise_deletion", false);
    s.observations = resolve(j.value("observations", ""));
    const auto& m = j.at("measure");
    s.measure.name = m.value("name", s.measure.name);
    s.measure.source = parse_measure_source(m.value("source", "llm_measure"));
    s.measure.path = resolve(m.value("path", ""));
    s.measure.column = m.value("column", "");
    s.measure.id_column = m.value("id_column", s.measure.id_column);
    if (m.contains("aggregation")) {
      const auto& a = m["aggregation"];
      const auto kind = a.value("kind", "none");
      if (kind == "none") s.measure.aggregation.kind = AggregationKind::none;
      else if (kind == "sentence_to_document") s.measure.aggregation.kind = AggregationKind::sentence_to_document;
      else if (kind == "annual_moving_average") s.measure.aggregation.kind = AggregationKind::annual_moving_average;
      else throw ConfigError("study '" + s.name + "': unknown aggregation '" + kind + "'");
      s.measure.aggregation.entity_key = a.value("entity_key", s.measure.aggregation.entity_key);
      s.measure.aggregation.smoothing = parse_smoothing_mode(a.value("smoothing", "trailing"));
    }
  } catch (const json::exception& e) {
    throw ConfigError("study '" + j.value("name", std::string("?")) + "': " + e.what());
  }
  if (s.regressors.empty()) throw ConfigError("study '" + s.name + "': no regressors");
  return s;
}

Design build_design(const StudySpec& study, const Dataset& observations,
                    const std::map<std::string, double>& measures) {
  const auto p = study.regressors.size() + 1;
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  Design d;
  std::vector<std::string> problems;

  auto resolve = [&](const TextRecord& r, const VariableExpr& e, std::string& why) -> std::optional<double> {
    std::optional<double> raw;
    if (e.variable() == study.measure.name) {
      if (auto it = measures.find(r.id); it != measures.end()) raw = it->second;
    } else if (auto it = r.covariates.find(e.variable()); it != r.covariates.end()) {
      raw = it->second;
    } else if (e.variable() == "y") {
      raw = r.y;
    }
    if (!raw) {
      why = "missing " + e.variable();
      return std::nullopt;
    }
    const double v = e.apply(*raw);
    if (!std::isfinite(v)) {
      why = e.text() + " is not finite for " + e.variable() + " = " + csv::format_double(*raw);
      return std::nullopt;
    }
    return v;
  };

  for (const auto& r : observations.records) {
    std::string why;
    auto yv = resolve(r, study.dependent, why);
    std::vector<double> row{1.0};
    bool ok = yv.has_value();
    for (std::size_t k = 0; ok && k < study.regressors.size(); ++k) {
      auto v = resolve(r, study.regressors[k], why);
      if (!v) ok = false;
      else row.push_back(*v);
    }
    if (!ok) {
      if (study.listwise_deletion) d.dropped.emplace_back(r.id, why);
      else problems.push_back(r.id + ": " + why);
      continue;
    }
    ys.push_back(*yv);
    rows.push_back(std::move(row));
    d.row_ids.push_back(r.id);
  }
  if (!problems.empty()) {
    std::string msg = "study '" + study.name + "': " + std::to_string(problems.size()) +
                      " incomplete observation(s):";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i) msg += "\n  " + problems[i];
    if (problems.size() > 20) msg += "\n  ...";
    throw DataError(msg);
  }
  if (rows.empty()) throw DataError("study '" + study.name + "': no complete observations");

  const auto n = static_cast<Eigen::Index>(rows.size());
  d.y.resize(n);
  d.X.resize(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y[i] = ys[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < p; ++k) d.X(i, static_cast<Eigen::Index>(k)) = rows[static_cast<std::size_t>(i)][k];
  }
  d.terms.push_back("const");
  for (std::size_t k = 0; k < study.regressors.size(); ++k) {
    d.terms.push_back(study.regressors[k].text());
    if (study.standardize_measure && study.regressors[k].variable() == study.measure.name) {
      const auto col = static_cast<Eigen::Index>(k + 1);
      std::vector<double> v(d.X.col(col).data(), d.X.col(col).data() + n);
      const auto z = zscores(v);
      for (Eigen::Index i = 0; i < n; ++i) d.X(i, col) = z[static_cast<std::size_t>(i)];
    }
  }
  return d;
}

RegressionResult run_study(const StudySpec& study, const Dataset& observations,
                           const std::map<std::string, double>& measures) {
  const auto d = build_design(study, observations, measures);
  return ols_fit(d.y, d.X, d.terms);
}

std::map<std::string, double> read_measure_values(const MeasureBinding& binding) {
  if (binding.path.empty()) throw ConfigError("measure '" + binding.name + "' has no path");
  const auto table = csv::read(binding.path);
  const auto c_id = table.require_column(binding.id_column);
  const auto c_v = table.require_column(binding.value_column());
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto where = binding.path.string() + ":" + std::to_string(table.line_numbers[r]);
    const auto& id = table.rows[r].at(c_id);
    auto v = csv::try_parse_double(table.rows[r].at(c_v));
    if (!v) throw DataError(where + ": " + binding.value_column() + " is not a number");
    if (!out.emplace(id, *v).second) throw DataError(where + ": duplicate id " + id);
  }
  return out;
}

std::map<std::string, double> aggregate_measures(const MeasureBinding& binding,
                                                 const std::map<std::string, double>& values,
                                                 const Dataset& measured,
                                                 const Dataset* observations) {
  switch (binding.aggregation.kind) {
    case AggregationKind::none: return values;
    case AggregationKind::sentence_to_document: {
      std::set<std::string> docs;
      if (observations)
        for (const auto& r : observations->records) docs.insert(r.id);
      return aggregate_sentence_to_document(values, measured, observations ? &docs : nullptr);
    }
    case AggregationKind::annual_moving_average: break;
  }
  const auto& key = binding.aggregation.entity_key;
  std::map<std::pair<std::string, int>, double> smoothed;
  for (const auto& q : build_quarterly_series(values, measured, key)) {
    for (const auto& p : annualize_and_smooth(q, binding.aggregation.smoothing).points)
      smoothed[{q.key, p.period.year}] = p.value;
  }
  std::map<std::string, double> out;
  if (!observations) {
    for (const auto& [k, v] : smoothed) out[k.first + ":" + std::to_string(k.second)] = v;
    return out;
  }
  for (const auto& r : observations->records) {
    auto ent = r.panel.find(key);
    auto yr = r.panel.find("year");
    if (ent == r.panel.end() || yr == r.panel.end()) continue;
    auto y = csv::try_parse_double(yr->second);
    if (!y) continue;
    if (auto it = smoothed.find({ent->second, static_cast<int>(*y)}); it != smoothed.end())
      out[r.id] = it->second;
  }
  return out;
}

SensitivityReport sensitivity_compare(
    const std::string& concept_name, const MeasureMap& base,
    const std::vector<std::pair<std::string, MeasureMap>>& variants) {
  SensitivityReport rep;
  rep.concept_name = concept_name;
  for (const auto& [label, var] : variants) {
    if (var.size() != base.size())
      throw DataError("variant '" + label + "' has " + std::to_string(var.size()) +
                      " records, base has " + std::to_string(base.size()));
    SensitivityPair pair;
    pair.label = label;
    std::vector<double> a, b;
    for (const auto& [id, v] : base) {
      auto it = var.find(id);
      if (it == var.end()) throw DataError("variant '" + label + "' is missing record " + id);
      pair.ids.push_back(id);
      a.push_back(v);
      b.push_back(it->second);
    }
    pair.base_z = zscores(a);
    pair.variant_z = zscores(b);
    pair.pearson_r = pearson_r(pair.base_z, pair.variant_z);
    pair.n = pair.ids.size();
    rep.pairs.push_back(std::move(pair));
  }
  return rep;
}

StabilityResult probe_size_stability(const Dataset& dataset, const ConceptSpec& spec,
                                     Provider& provider,
                                     std::pair<std::size_t, std::size_t> sizes,
                                     std::uint64_t seed) {
  const auto biggest = std::max(sizes.first, sizes.second);
  if (dataset.size() < biggest)
    throw DataError("stability check needs " + std::to_string(biggest) + " records, dataset has " +
                    std::to_string(dataset.size()));
  StabilityResult out;
  out.sizes = {sizes.first, sizes.second};
  auto measure_with = [&](std::size_t n) {
    const auto probes = sample_probing_set(dataset, n, seed);
    const auto probe = run_probe(spec, probes, provider, seed);
    const auto rows = measure_corpus(probe, spec, dataset, provider, false);
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.raw_projection);
    return v;
  };
  out.first = measure_with(sizes.first);
  out.second = measure_with(sizes.second);
  for (const auto& r : dataset.records) out.ids.push_back(r.id);
  out.pearson_r = pearson_r(out.first, out.second);
  return out;
}

std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs,
                                               const std::filesystem::path& out_dir) {
  if (inputs.studies.empty() && inputs.explained.empty() && inputs.sensitivity.empty())
    throw UsageError("nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& name) {
    auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    written.push_back(path);
    return out;
  };

  if (!inputs.studies.empty()) {
    auto out = open("summary.csv");
    out << "study,method,measure_term,n,beta,std_error,t,p_value,r_squared\n";
    for (const auto& s : inputs.studies) {
      const auto& r = s.result;
      const auto k = r.index_of(s.measure_term);
      out << csv::format_row({s.study, s.method, s.measure_term, std::to_string(r.n),
                              csv::format_double(r.coefficients[k]),
                              csv::format_double(r.std_errors[k]), csv::format_double(r.t_stats[k]),
                              csv::format_double(r.p_values[k]), csv::format_double(r.r_squared)})
          << '\n';
    }
    auto md = open("summary.md");
    md << "# Summary\n\n| Study | Method | N | beta | t | R2 |\n|---|---|---:|---:|---:|---:|\n";
    for (const auto& s : inputs.studies) {
      const auto& r = s.result;
      const auto k = r.index_of(s.measure_term);
      md << fmt::format("| {} | {} | {} | {:.3f}{} | {:.3f} | {:.3f} |\n", s.study, s.method, r.n,
                        r.coefficients[k], significance_stars(r.p_values[k]), r.t_stats[k],
                        r.r_squared);
    }
    md << "\n*** p<0.01, ** p<0.05, * p<0.1\n";
    for (const auto& s : inputs.studies) {
      const auto& r = s.result;
      md << fmt::format("\n## {} ({})\n\n| Term | Coefficient | Std. error | t |\n|---|---:|---:|---:|\n",
                        s.study, s.method);
      for (std::size_t k = 0; k < r.terms.size(); ++k)
        md << fmt::format("| {} | {:.3f}{} | {:.3f} | {:.3f} |\n", r.terms[k], r.coefficients[k],
                          significance_stars(r.p_values[k]), r.std_errors[k], r.t_stats[k]);
      md << fmt::format("\nN = {}, R2 = {:.3f}\n", r.n, r.r_squared);
    }
  }

  if (!inputs.explained.empty()) {
    auto out = open("explained_variance.csv");
    out << "concept,component,explained_ratio\n";
    for (const auto& [name, ratios] : inputs.explained)
      for (std::size_t i = 0; i < ratios.size(); ++i)
        out << csv::format_row({name, std::to_string(i + 1), csv::format_double(ratios[i])}) << '\n';
  }

  if (!inputs.sensitivity.empty()) {
    auto out = open("sensitivity.csv");
    out << "concept,method,variant,pearson_r,n\n";
    for (const auto& rep : inputs.sensitivity)
      for (const auto& p : rep.pairs)
        out << csv::format_row({rep.concept_name, rep.method, p.label, csv::format_double(p.pearson_r),
                                std::to_string(p.n)})
            << '\n';
    for (const auto& rep : inputs.sensitivity) {
      for (const auto& p : rep.pairs) {
        auto sc = open("scatter_" + file_token(rep.concept_name) + "_" +
                       (rep.method.empty() ? std::string() : file_token(rep.method) + "_") +
                       file_token(p.label) + ".csv");
        sc << "record_id,base_z,variant_z\n";
        for (std::size_t i = 0; i < p.ids.size(); ++i)
          sc << csv::format_row({p.ids[i], csv::format_double(p.base_z[i]),
                                 csv::format_double(p.variant_z[i])})
             << '\n';
      }
    }
  }
  return written;
}

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto c_study = table.require_column("study");
  const auto c_method = table.require_column("method");
  const auto c_n = table.require_column("n");
  const auto c_beta = table.require_column("beta");
  const auto c_t = table.require_column("t");
  const auto c_r2 = table.require_column("r_squared");
  std::vector<SummaryRow> out;
  for (const auto& row : table.rows) {
    SummaryRow s;
    s.study = row.at(c_study);
    s.method = row.at(c_method);
    s.n = static_cast<std::size_t>(csv::parse_double(row.at(c_n)));
    s.beta = csv::parse_double(row.at(c_beta));
    s.t = csv::parse_double(row.at(c_t));
    s.r_squared = csv::parse_double(row.at(c_r2));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cprobe
