#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conceptprobe/corpus.hpp"
#include "conceptprobe/measure.hpp"
#include "conceptprobe/numerics.hpp"
#include "conceptprobe/probe.hpp"

namespace cprobe {

/// A regression variable: `name`, `log(name)`, `log(name+c)` or `ge(name,c)`
/// (indicator of name >= c).
class VariableExpr {
 public:
  enum class Op { identity, log, indicator_ge };

  static VariableExpr parse(std::string_view text);

  double apply(double value) const;
  const std::string& variable() const noexcept { return variable_; }
  const std::string& text() const noexcept { return text_; }
  Op op() const noexcept { return op_; }
  double constant() const noexcept { return constant_; }

 private:
  Op op_ = Op::identity;
  std::string variable_;
  double constant_ = 0.0;
  std::string text_;
};

enum class MeasureSource { llm_measure, prompting, external_csv };

const char* to_string(MeasureSource s) noexcept;
MeasureSource parse_measure_source(std::string_view text);

enum class AggregationKind { none, sentence_to_document, annual_moving_average };

struct Aggregation {
  AggregationKind kind = AggregationKind::none;
  std::string entity_key = "firm_id";
  SmoothingMode smoothing = SmoothingMode::trailing;
};

/// Where a study's text measure comes from and how it is named in the model.
struct MeasureBinding {
  std::string name = "measure";
  MeasureSource source = MeasureSource::llm_measure;
  std::filesystem::path path;
  /// Value column; defaults per source: raw_projection, score, or required.
  std::string column;
  std::string id_column = "record_id";
  Aggregation aggregation;

  std::string value_column() const;
};

struct StudySpec {
  std::string name;
  std::string method = "LLM-Measure";
  VariableExpr dependent;
  std::vector<VariableExpr> regressors;
  MeasureBinding measure;
  bool standardize_measure = true;
  /// Drop incomplete observations (and report them) instead of failing.
  bool listwise_deletion = false;
  /// Regression units when they differ from the measured records, e.g.
  /// documents whose sentences were measured. Empty: the measured dataset.
  std::filesystem::path observations;

  static StudySpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

struct Design {
  Vector y;
  Matrix X;
  std::vector<std::string> terms;
  std::vector<std::string> row_ids;
  /// Observations removed under listwise deletion, with the reason.
  std::vector<std::pair<std::string, std::string>> dropped;
};

/// Builds (y, X) for the study. Variables resolve against, in order: the
/// measure (by its binding name), the record's covariates, then "y".
Design build_design(const StudySpec& study, const Dataset& observations,
                    const std::map<std::string, double>& measures);

RegressionResult run_study(const StudySpec& study, const Dataset& observations,
                           const std::map<std::string, double>& measures);

/// Reads a binding's CSV into id -> value.
std::map<std::string, double> read_measure_values(const MeasureBinding& binding);

/// Applies the binding's aggregation; `measured` holds the measured records
/// (sentences or quarterly transcripts).
std::map<std::string, double> aggregate_measures(const MeasureBinding& binding,
                                                 const std::map<std::string, double>& values,
                                                 const Dataset& measured,
                                                 const Dataset* observations);

struct SensitivityPair {
  std::string label;
  double pearson_r = 0.0;
  std::size_t n = 0;
  std::vector<std::string> ids;
  std::vector<double> base_z;
  std::vector<double> variant_z;
};

struct SensitivityReport {
  std::string concept_name;
  std::string method;
  std::vector<SensitivityPair> pairs;
};

using MeasureMap = std::map<std::string, double>;

/// Pearson r between z-standardized base and variant measures matched on id.
SensitivityReport sensitivity_compare(
    const std::string& concept_name, const MeasureMap& base,
    const std::vector<std::pair<std::string, MeasureMap>>& variants);

struct StabilityResult {
  std::vector<std::size_t> sizes;
  double pearson_r = 0.0;
  std::vector<std::string> ids;
  std::vector<double> first;
  std::vector<double> second;
};

/// Probes at each size (nested samples from one seed), measures the whole
/// dataset with each probe and correlates the two measure vectors.
StabilityResult probe_size_stability(const Dataset& dataset, const ConceptSpec& spec,
                                     Provider& provider,
                                     std::pair<std::size_t, std::size_t> sizes,
                                     std::uint64_t seed);

struct StudyOutcome {
  std::string study;
  std::string method;
  std::string measure_term;
  RegressionResult result;
};

struct ReportInputs {
  std::vector<StudyOutcome> studies;
  /// Concept name -> explained ratios, for the variance bar chart.
  std::vector<std::pair<std::string, std::vector<double>>> explained;
  std::vector<SensitivityReport> sensitivity;
};

/// Writes summary.md and summary.csv (study, method, N, beta, t, ...),
/// explained_variance.csv and one scatter CSV per sensitivity pair.
/// Returns the written paths.
std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs,
                                               const std::filesystem::path& out_dir);

struct SummaryRow {
  std::string study;
  std::string method;
  std::size_t n = 0;
  double beta = 0.0;
  double t = 0.0;
  double r_squared = 0.0;
};

std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& path);

}  // namespace cprobe
