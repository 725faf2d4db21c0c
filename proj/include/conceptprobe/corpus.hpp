#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cprobe {

enum class TextUnit { sentence, document };

const char* to_string(TextUnit unit) noexcept;
TextUnit parse_text_unit(std::string_view text);

/// One corpus unit with its covariates, dependent variable and panel keys.
struct TextRecord {
  std::string id;
  std::string text;
  TextUnit unit = TextUnit::document;
  std::optional<std::string> parent_id;
  std::map<std::string, double> covariates;
  std::optional<double> y;
  std::map<std::string, std::string> panel;

  friend bool operator==(const TextRecord&, const TextRecord&) = default;
};

struct Dataset {
  std::string name;
  std::vector<TextRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  const TextRecord* find(std::string_view id) const;
};

enum class DatasetFormat { jsonl, csv };

DatasetFormat parse_dataset_format(std::string_view text);

/// Column mapping for ingestion. For JSONL the id/text/y/unit/parent names
/// rename the canonical keys; covariate and panel lists are only consulted
/// for CSV, where the nested maps cannot be expressed.
struct ColumnMapping {
  std::string id = "id";
  std::string text = "text";
  std::optional<std::string> y;
  std::optional<std::string> unit;
  std::optional<std::string> parent_id;
  std::vector<std::string> covariates;
  std::vector<std::string> panel;

  static ColumnMapping from_json(const nlohmann::json& j);
};

/// Loads and validates a dataset. Every offending row is reported (with its
/// line number) in a single DataError.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const ColumnMapping& mapping = {});

nlohmann::json record_to_json(const TextRecord& record);
TextRecord record_from_json(const nlohmann::json& j, const ColumnMapping& mapping = {});

/// Writes the canonical JSONL form (one record per line, stable key order).
void save_dataset_jsonl(const Dataset& dataset, const std::filesystem::path& path);

/// Uniform sample without replacement, deterministic in (dataset order, n, seed).
/// Samples of different sizes drawn with the same seed are nested.
std::vector<TextRecord> sample_probing_set(const Dataset& dataset, std::size_t n,
                                           std::uint64_t seed);

inline constexpr std::size_t kDefaultProbeSize = 64;

}  // namespace cprobe
