#include "conceptprobe/measure.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <algorithm>

#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"
#include "parallel.hpp"

namespace cprobe {

namespace {

void check_dims(const ProbeResult& probe, const Provider& provider) {
  if (static_cast<std::int64_t>(probe.dim()) != provider.info().hidden_dim)
    throw UsageError("probe dimension " + std::to_string(probe.dim()) +
                     " does not match provider dimension " +
                     std::to_string(provider.info().hidden_dim));
}

}  // namespace

MeasureRow measure_record(const ProbeResult& probe, const ConceptSpec& spec,
                          const TextRecord& record, Provider& provider) {
  check_dims(probe, provider);
  const auto h = provider.hidden_state(spec, PromptRole::unified, record.text);
  MeasureRow row;
  row.record_id = record.id;
  row.raw_projection = concept_projection(probe.concept_vector, probe.standardizer, h);
  row.chunks_used = h.chunks;
  if (!std::isfinite(row.raw_projection))
    throw NumericError("record " + record.id + ": non-finite projection");
  return row;
}

std::vector<MeasureRow> measure_corpus(const ProbeResult& probe, const ConceptSpec& spec,
                                       const Dataset& dataset, Provider& provider,
                                       bool standardize_output) {
  if (dataset.empty()) throw DataError("cannot measure an empty dataset");
  if (standardize_output && dataset.size() < 2)
    throw DataError("standardized measures need at least 2 records");
  check_dims(probe, provider);
  std::vector<MeasureRow> rows(dataset.size());
  std::mutex mu;
  std::vector<std::pair<std::size_t, std::string>> failures;
  std::optional<ErrorKind> first_kind;
  detail::parallel_for(
      dataset.size(), provider.max_concurrency(),
      [&](std::size_t i) {
        try {
          rows[i] = measure_record(probe, spec, dataset.records[i], provider);
        } catch (const Error& e) {
          std::lock_guard lock(mu);
          failures.emplace_back(i, dataset.records[i].id + ": " + e.what());
          if (!first_kind) first_kind = e.kind();
        }
      },
      [&](std::size_t i) { return "record " + dataset.records[i].id; });
  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    std::string msg = std::to_string(failures.size()) + " record(s) failed:";
    for (const auto& [i, m] : failures) msg += "\n  " + m;
    throw Error(*first_kind, msg);
  }
  if (standardize_output) {
    std::vector<double> raw;
    raw.reserve(rows.size());
    for (const auto& r : rows) raw.push_back(r.raw_projection);
    const auto z = zscores(raw);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].z_measure = z[i];
  }
  return rows;
}

void write_measures_csv(std::span<const MeasureRow> rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "record_id,raw_projection,z_measure,chunks_used\n";
  for (const auto& r : rows) {
    out << csv::format_row({r.record_id, csv::format_double(r.raw_projection),
                            r.z_measure ? csv::format_double(*r.z_measure) : std::string(),
                            std::to_string(r.chunks_used)})
        << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<MeasureRow> read_measures_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto c_id = table.require_column("record_id");
  const auto c_raw = table.require_column("raw_projection");
  const auto c_z = table.column("z_measure");
  const auto c_chunks = table.column("chunks_used");
  std::vector<MeasureRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = path.string() + ":" + std::to_string(table.line_numbers[i]);
    MeasureRow m;
    m.record_id = row.at(c_id);
    auto raw = csv::try_parse_double(row.at(c_raw));
    if (!raw) throw DataError(where + ": raw_projection is not a number");
    m.raw_projection = *raw;
    if (c_z && !row.at(*c_z).empty()) {
      auto z = csv::try_parse_double(row.at(*c_z));
      if (!z) throw DataError(where + ": z_measure is not a number");
      m.z_measure = *z;
    }
    if (c_chunks && !row.at(*c_chunks).empty()) {
      auto c = csv::try_parse_double(row.at(*c_chunks));
      if (!c) throw DataError(where + ": chunks_used is not a number");
      m.chunks_used = static_cast<std::int64_t>(*c);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::map<std::string, double> aggregate_sentence_to_document(
    const std::map<std::string, double>& sentence_values, const Dataset& sentences,
    const std::set<std::string>* documents) {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  std::vector<std::string> orphans;
  for (const auto& [id, value] : sentence_values) {
    const auto* rec = sentences.find(id);
    if (!rec || !rec->parent_id || (documents && !documents->count(*rec->parent_id))) {
      orphans.push_back(id);
      continue;
    }
    auto& [sum, count] = sums[*rec->parent_id];
    sum += value;
    ++count;
  }
  if (!orphans.empty()) {
    std::string msg = std::to_string(orphans.size()) + " orphan sentence(s) without a parent document:";
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) msg += " " + orphans[i];
    if (orphans.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  std::map<std::string, double> out;
  for (const auto& [doc, sc] : sums) out[doc] = sc.first / static_cast<double>(sc.second);
  return out;
}

SmoothingMode parse_smoothing_mode(std::string_view text) {
  if (text == "trailing") return SmoothingMode::trailing;
  if (text == "strict") return SmoothingMode::strict;
  if (text == "centered") return SmoothingMode::centered;
  throw ConfigError("unknown smoothing mode '" + std::string(text) +
                    "' (expected trailing, strict or centered)");
}

PanelSeries annualize_and_smooth(const PanelSeries& quarterly, SmoothingMode mode) {
  if (quarterly.points.empty()) throw DataError("series '" + quarterly.key + "' is empty");
  std::map<int, std::pair<double, int>> years;
  for (std::size_t i = 0; i < quarterly.points.size(); ++i) {
    const auto& p = quarterly.points[i];
    if (p.period.quarter < 1 || p.period.quarter > 4)
      throw DataError("series '" + quarterly.key + "': quarter must be 1..4");
    if (!std::isfinite(p.value)) throw DataError("series '" + quarterly.key + "': non-finite value");
    if (i > 0 && !(quarterly.points[i - 1].period < p.period))
      throw DataError("series '" + quarterly.key + "': periods must be strictly increasing");
    auto& [sum, count] = years[p.period.year];
    sum += p.value;
    ++count;
  }
  std::map<int, double> annual;
  for (const auto& [y, sc] : years) annual[y] = sc.first / sc.second;

  const int lo = mode == SmoothingMode::centered ? -1 : -2;
  const int hi = mode == SmoothingMode::centered ? 1 : 0;
  PanelSeries out;
  out.key = quarterly.key;
  for (const auto& [y, v] : annual) {
    double sum = 0.0;
    int count = 0;
    for (int k = y + lo; k <= y + hi; ++k) {
      if (auto it = annual.find(k); it != annual.end()) {
        sum += it->second;
        ++count;
      }
    }
    if (mode == SmoothingMode::strict && count < 3) continue;
    out.points.push_back({Period{y, 0}, sum / count});
  }
  return out;
}

std::vector<PanelSeries> build_quarterly_series(const std::map<std::string, double>& values,
                                                const Dataset& dataset,
                                                const std::string& entity_key) {
  std::map<std::string, std::map<Period, std::pair<double, int>>> grouped;
  std::vector<std::string> problems;
  auto panel_int = [](const TextRecord& r, const std::string& key) -> std::optional<int> {
    auto it = r.panel.find(key);
    if (it == r.panel.end()) return std::nullopt;
    auto v = csv::try_parse_double(it->second);
    if (!v || *v != std::floor(*v)) return std::nullopt;
    return static_cast<int>(*v);
  };
  for (const auto& [id, value] : values) {
    const auto* rec = dataset.find(id);
    if (!rec) {
      problems.push_back(id + ": not in dataset");
      continue;
    }
    auto ent = rec->panel.find(entity_key);
    const auto year = panel_int(*rec, "year");
    const auto quarter = panel_int(*rec, "quarter");
    if (ent == rec->panel.end() || !year || !quarter) {
      problems.push_back(id + ": needs panel keys " + entity_key + ", year and quarter");
      continue;
    }
    auto& [sum, count] = grouped[ent->second][Period{*year, *quarter}];
    sum += value;
    ++count;
  }
  if (!problems.empty()) {
    std::string msg = "cannot build quarterly series:";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i) msg += "\n  " + problems[i];
    if (problems.size() > 20) msg += "\n  ...";
    throw DataError(msg);
  }
  std::vector<PanelSeries> out;
  for (const auto& [key, periods] : grouped) {
    PanelSeries s;
    s.key = key;
    for (const auto& [p, sc] : periods) s.points.push_back({p, sc.first / sc.second});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cprobe
