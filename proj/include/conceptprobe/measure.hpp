#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "conceptprobe/corpus.hpp"
#include "conceptprobe/probe.hpp"

namespace cprobe {

struct MeasureRow {
  std::string record_id;
  double raw_projection = 0.0;
  std::optional<double> z_measure;
  std::int64_t chunks_used = 1;
};

/// Unified-prompt hidden state of the record, standardized with the probe's
/// parameters and projected onto the oriented concept vector.
MeasureRow measure_record(const ProbeResult& probe, const ConceptSpec& spec,
                          const TextRecord& record, Provider& provider);

/// One row per record, in dataset order. Failures are collected across the
/// whole corpus and reported together; no partial result is returned.
std::vector<MeasureRow> measure_corpus(const ProbeResult& probe, const ConceptSpec& spec,
                                       const Dataset& dataset, Provider& provider,
                                       bool standardize_output);

void write_measures_csv(std::span<const MeasureRow> rows, const std::filesystem::path& path);
std::vector<MeasureRow> read_measures_csv(const std::filesystem::path& path);

/// Mean of the member sentences' values per parent document. Sentences
/// without a parent (or whose parent is not in `documents`, when given) are
/// orphans and fail the call with their ids.
std::map<std::string, double> aggregate_sentence_to_document(
    const std::map<std::string, double>& sentence_values, const Dataset& sentences,
    const std::set<std::string>* documents = nullptr);

struct Period {
  int year = 0;
  int quarter = 0;  // 1..4, or 0 for annual points

  friend auto operator<=>(const Period&, const Period&) = default;
};

struct PanelPoint {
  Period period;
  double value = 0.0;
};

struct PanelSeries {
  std::string key;
  std::vector<PanelPoint> points;  // strictly increasing periods
};

enum class SmoothingMode {
  /// mean over available years in {t-2, t-1, t}
  trailing,
  /// trailing, but years with fewer than 3 annual values are dropped
  strict,
  /// mean over available years in {t-1, t, t+1}
  centered,
};

SmoothingMode parse_smoothing_mode(std::string_view text);

/// Quarterly series -> annual means -> 3-year moving average.
PanelSeries annualize_and_smooth(const PanelSeries& quarterly,
                                 SmoothingMode mode = SmoothingMode::trailing);

/// Groups record values into per-entity quarterly series using the panel keys
/// `entity_key`, "year" and "quarter". Records sharing a quarter are averaged.
std::vector<PanelSeries> build_quarterly_series(const std::map<std::string, double>& values,
                                                const Dataset& dataset,
                                                const std::string& entity_key);

}  // namespace cprobe
