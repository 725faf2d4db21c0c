#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "conceptprobe/corpus.hpp"
#include "conceptprobe/provider.hpp"

namespace cprobe {

/// Parameters of the planted-concept backend.
///
///   hidden(prompt, role) = g(prompt) + (alpha(prompt) + kappa(source) * beta(role)) * u
///
/// u is a fixed unit vector whose coordinates are +-1/sqrt(d) with seeded signs.
/// g is a Gaussian vector keyed by a hash of the prompt with per-coordinate
/// standard deviation sigma/sqrt(d), so sigma is the expected noise norm.
/// alpha is read from a `#intensity=<x>#` marker (0 when absent).
/// beta(positive) = +beta0, beta(negative) = -beta0, beta(unified) = 0.
/// kappa is a hash-keyed gain in [1 - jitter, 1 + jitter] of the source text;
/// it gives the difference vectors spread along u, which is what PCA recovers
/// after centering. jitter = 0 makes every difference vector identical along u.
struct SyntheticOptions {
  std::string model_id = "synthetic-planted-v1";
  std::int64_t hidden_dim = 64;
  std::int64_t max_tokens = 4096;
  double sigma = 0.1;
  double beta0 = 1.0;
  double separation_jitter = 0.5;
  std::uint64_t seed = 7;
  /// Wrap generated scores in filler words, e.g. "Sure. Score: 80 overall".
  bool distractor_words = false;

  static SyntheticOptions from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class SyntheticBackend final : public Backend {
 public:
  explicit SyntheticBackend(SyntheticOptions options = {});

  const SyntheticOptions& options() const noexcept { return options_; }
  const std::vector<double>& planted_direction() const noexcept { return direction_; }

  ProviderInfo info() override;
  HiddenState hidden_state(const EmbedRequest& request) override;
  std::string generate(std::string_view prompt, const GenerationParams& params) override;
  std::int64_t count_tokens(std::string_view text) override;
  std::vector<std::string> chunk(std::string_view text, std::int64_t limit) override;

  std::vector<double> noise(std::string_view prompt) const;
  double separation_gain(std::string_view source_text) const;
  double role_offset(PromptRole role) const noexcept;

  /// round(100 * clamp(alpha, 0, 1))
  static int planted_score(double intensity);

 private:
  SyntheticOptions options_;
  std::vector<double> direction_;
};

/// Intensity marker value, if the text carries `#intensity=<x>#`.
std::optional<double> planted_intensity(std::string_view text);

/// Whitespace-delimited words.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

struct SyntheticCorpusOptions {
  std::size_t records = 200;
  std::uint64_t seed = 11;
  std::size_t min_words = 8;
  std::size_t max_words = 40;
  /// Covariates: Size ~ N(7, 2); y = slope * intensity + 0.3 * Size + N(0, noise).
  double y_slope = 2.0;
  double y_noise = 0.5;
};

/// Records with uniformly drawn planted intensities in [0, 1], filler text,
/// a `Size` covariate and a dependent variable correlated with the intensity.
Dataset make_synthetic_corpus(const SyntheticCorpusOptions& options);

}  // namespace cprobe
