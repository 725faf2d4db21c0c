#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "conceptprobe/corpus.hpp"
#include "conceptprobe/numerics.hpp"
#include "conceptprobe/prompts.hpp"
#include "conceptprobe/provider.hpp"

namespace cprobe {

/// Fitted concept: the oriented unit vector plus the standardizer that maps
/// hidden states into the space the vector lives in.
struct ProbeResult {
  Vector concept_vector;
  Standardizer standardizer;
  std::vector<double> explained_ratios;
  int orientation_sign = 1;
  std::vector<std::string> probe_ids;
  std::uint64_t seed = 0;
  std::size_t flagged_dims = 0;
  std::string model_id;
  std::string concept_name;
  /// Role name -> template digest (hex).
  std::map<std::string, std::string> prompt_digests;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(concept_vector.size()); }
};

/// Row i = h(positive prompt, text_i) - h(negative prompt, text_i).
/// Provider calls run on up to provider.max_concurrency() threads.
Matrix difference_vectors(const ConceptSpec& spec, std::span<const TextRecord> probes,
                          Provider& provider);

struct ConceptFit {
  Vector component;
  Standardizer standardizer;
  std::vector<double> explained_ratios;
};

/// Standardize the difference vectors, then take their first principal
/// component. Explained ratios cover the top min(n, 10) components.
ConceptFit fit_concept_vector(const Matrix& diffs);

/// Inference-stage value of a hidden state: projection of the standardized
/// state onto `concept_vector`.
double concept_projection(const Vector& concept_vector, const Standardizer& standardizer,
                          const HiddenState& state);

/// +1 or -1 per the spec's orientation mode. Anchor mode compares the unified
/// prompt projections of the positive and negative anchors; a tie throws.
int orient(const Vector& component, const Standardizer& standardizer, const ConceptSpec& spec,
           Provider& provider);

/// Full probing stage over an already sampled probing set.
ProbeResult run_probe(const ConceptSpec& spec, std::span<const TextRecord> probes,
                      Provider& provider, std::uint64_t seed);

struct ProjectedText {
  std::string id;
  std::string text;
  double projection = 0.0;
};

struct ExtremesReport {
  std::vector<ProjectedText> top;
  std::vector<ProjectedText> bottom;
};

/// Highest and lowest `k` inference-stage projections among the probes, for
/// eyeballing the orientation.
ExtremesReport probe_extremes(const ProbeResult& probe, const ConceptSpec& spec,
                              std::span<const TextRecord> probes, Provider& provider,
                              std::size_t k = 3);

inline constexpr std::string_view kProbeFormat = "conceptprobe.probe/1";

/// JSON metadata at `path` plus a float64 little-endian blob at `path` + ".bin"
/// holding concept, standardizer mean and standardizer std back to back.
void save_probe(const ProbeResult& probe, const std::filesystem::path& path);
ProbeResult load_probe(const std::filesystem::path& path);

}  // namespace cprobe
