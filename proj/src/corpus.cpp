#include "conceptprobe/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"
#include "conceptprobe/rng.hpp"

namespace cprobe {

using nlohmann::json;

const char* to_string(TextUnit unit) noexcept {
  return unit == TextUnit::sentence ? "sentence" : "document";
}

TextUnit parse_text_unit(std::string_view text) {
  if (text == "sentence") return TextUnit::sentence;
  if (text == "document") return TextUnit::document;
  throw DataError("unknown unit '" + std::string(text) + "' (expected sentence or document)");
}

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "jsonl") return DatasetFormat::jsonl;
  if (text == "csv") return DatasetFormat::csv;
  throw ConfigError("unknown dataset format '" + std::string(text) + "'");
}

const TextRecord* Dataset::find(std::string_view id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

ColumnMapping ColumnMapping::from_json(const json& j) {
  ColumnMapping m;
  if (j.is_null()) return m;
  if (!j.is_object()) throw ConfigError("mapping must be an object");
  m.id = j.value("id", m.id);
  m.text = j.value("text", m.text);
  if (j.contains("y")) m.y = j.at("y").get<std::string>();
  if (j.contains("unit")) m.unit = j.at("unit").get<std::string>();
  if (j.contains("parent_id")) m.parent_id = j.at("parent_id").get<std::string>();
  if (j.contains("covariates")) m.covariates = j.at("covariates").get<std::vector<std::string>>();
  if (j.contains("panel")) m.panel = j.at("panel").get<std::vector<std::string>>();
  return m;
}

namespace {

double json_number(const json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    if (auto d = csv::try_parse_double(v.get<std::string>())) return *d;
  }
  throw DataError(what + " is not numeric");
}

std::string json_scalar_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

void check_record(const TextRecord& r) {
  if (r.id.empty()) throw DataError("empty id");
  if (r.text.empty()) throw DataError("record '" + r.id + "': empty text");
  if (r.unit == TextUnit::sentence && !r.parent_id)
    throw DataError("record '" + r.id + "': sentence without parent_id");
}

}  // namespace

TextRecord record_from_json(const json& j, const ColumnMapping& mapping) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  TextRecord r;
  if (!j.contains(mapping.id)) throw DataError("missing required field '" + mapping.id + "'");
  if (!j.contains(mapping.text)) throw DataError("missing required field '" + mapping.text + "'");
  r.id = json_scalar_string(j.at(mapping.id));
  if (!j.at(mapping.text).is_string()) throw DataError("field '" + mapping.text + "' is not a string");
  r.text = j.at(mapping.text).get<std::string>();

  const std::string unit_key = mapping.unit.value_or("unit");
  if (j.contains(unit_key) && !j.at(unit_key).is_null())
    r.unit = parse_text_unit(j.at(unit_key).get<std::string>());
  const std::string parent_key = mapping.parent_id.value_or("parent_id");
  if (j.contains(parent_key) && !j.at(parent_key).is_null())
    r.parent_id = json_scalar_string(j.at(parent_key));
  const std::string y_key = mapping.y.value_or("y");
  if (j.contains(y_key) && !j.at(y_key).is_null()) r.y = json_number(j.at(y_key), "field '" + y_key + "'");

  if (j.contains("covariates")) {
    const auto& c = j.at("covariates");
    if (!c.is_object()) throw DataError("covariates must be an object");
    for (const auto& [k, v] : c.items()) r.covariates[k] = json_number(v, "covariate '" + k + "'");
  }
  if (j.contains("panel")) {
    const auto& p = j.at("panel");
    if (!p.is_object()) throw DataError("panel must be an object");
    for (const auto& [k, v] : p.items()) r.panel[k] = json_scalar_string(v);
  }
  check_record(r);
  return r;
}

json record_to_json(const TextRecord& r) {
  json j = json::object();
  j["id"] = r.id;
  j["text"] = r.text;
  j["unit"] = to_string(r.unit);
  if (r.parent_id) j["parent_id"] = *r.parent_id;
  if (r.y) j["y"] = *r.y;
  if (!r.covariates.empty()) j["covariates"] = r.covariates;
  if (!r.panel.empty()) j["panel"] = r.panel;
  return j;
}

namespace {

std::vector<std::pair<std::size_t, TextRecord>> parse_jsonl(std::istream& in,
                                                            const ColumnMapping& mapping,
                                                            std::vector<std::string>& errors) {
  std::vector<std::pair<std::size_t, TextRecord>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.emplace_back(line_no, record_from_json(json::parse(line), mapping));
    } catch (const json::exception& e) {
      errors.push_back("line " + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
    } catch (const Error& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, TextRecord>> parse_csv(const csv::Table& table,
                                                          const ColumnMapping& mapping,
                                                          std::vector<std::string>& errors) {
  const auto id_col = table.require_column(mapping.id);
  const auto text_col = table.require_column(mapping.text);
  auto optional_col = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
    if (!name) return std::nullopt;
    return table.require_column(*name);
  };
  const auto y_col = optional_col(mapping.y);
  const auto unit_col = optional_col(mapping.unit);
  const auto parent_col = optional_col(mapping.parent_id);
  std::vector<std::pair<std::string, std::size_t>> cov_cols, panel_cols;
  for (const auto& c : mapping.covariates) cov_cols.emplace_back(c, table.require_column(c));
  for (const auto& p : mapping.panel) panel_cols.emplace_back(p, table.require_column(p));

  std::vector<std::pair<std::size_t, TextRecord>> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto line_no = table.line_numbers[i];
    try {
      if (row.size() != table.header.size())
        throw DataError("expected " + std::to_string(table.header.size()) + " fields, got " +
                        std::to_string(row.size()));
      TextRecord r;
      r.id = row[id_col];
      r.text = row[text_col];
      if (unit_col && !row[*unit_col].empty()) r.unit = parse_text_unit(row[*unit_col]);
      if (parent_col && !row[*parent_col].empty()) r.parent_id = row[*parent_col];
      if (y_col && !row[*y_col].empty()) {
        auto v = csv::try_parse_double(row[*y_col]);
        if (!v) throw DataError("column '" + *mapping.y + "' is not numeric: '" + row[*y_col] + "'");
        r.y = *v;
      }
      for (const auto& [name, col] : cov_cols) {
        auto v = csv::try_parse_double(row[col]);
        if (!v) throw DataError("covariate '" + name + "' is not numeric: '" + row[col] + "'");
        r.covariates[name] = *v;
      }
      for (const auto& [name, col] : panel_cols) r.panel[name] = row[col];
      check_record(r);
      out.emplace_back(line_no, std::move(r));
    } catch (const Error& e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const ColumnMapping& mapping) {
  if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path.string());
  std::vector<std::string> errors;
  std::vector<std::pair<std::size_t, TextRecord>> parsed;
  if (format == DatasetFormat::jsonl) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    parsed = parse_jsonl(in, mapping, errors);
  } else {
    parsed = parse_csv(csv::read(path), mapping, errors);
  }

  Dataset ds;
  ds.name = path.stem().string();
  std::map<std::string, std::size_t> seen;
  for (auto& [line_no, rec] : parsed) {
    auto [it, inserted] = seen.emplace(rec.id, line_no);
    if (!inserted) {
      errors.push_back("line " + std::to_string(line_no) + ": duplicate id '" + rec.id +
                       "' (first seen on line " + std::to_string(it->second) + ")");
      continue;
    }
    ds.records.push_back(std::move(rec));
  }
  if (!errors.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": " << errors.size() << " rejected row(s)";
    for (const auto& e : errors) msg << "\n  " << e;
    throw DataError(msg.str());
  }
  return ds;
}

void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : dataset.records) out << record_to_json(r).dump() << '\n';
}

std::vector<TextRecord> sample_probing_set(const Dataset& dataset, std::size_t n,
                                           std::uint64_t seed) {
  if (n == 0) throw DataError("probing set size must be positive");
  if (n > dataset.size())
    throw DataError("probing set size " + std::to_string(n) + " exceeds dataset size " +
                    std::to_string(dataset.size()));
  std::vector<TextRecord> out;
  out.reserve(n);
  for (auto i : sample_indices(dataset.size(), n, seed)) out.push_back(dataset.records[i]);
  return out;
}

}  // namespace cprobe
