#include "conceptprobe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <regex>

#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"
#include "conceptprobe/hashing.hpp"
#include "conceptprobe/rng.hpp"

namespace cprobe {

using nlohmann::json;

SyntheticOptions SyntheticOptions::from_json(const json& j) {
  SyntheticOptions o;
  if (j.is_null()) return o;
  o.model_id = j.value("model_id", o.model_id);
  o.hidden_dim = j.value("hidden_dim", o.hidden_dim);
  o.max_tokens = j.value("max_tokens", o.max_tokens);
  o.sigma = j.value("sigma", o.sigma);
  o.beta0 = j.value("beta0", o.beta0);
  o.separation_jitter = j.value("separation_jitter", o.separation_jitter);
  o.seed = j.value("seed", o.seed);
  o.distractor_words = j.value("distractor_words", o.distractor_words);
  return o;
}

json SyntheticOptions::to_json() const {
  return {{"model_id", model_id},           {"hidden_dim", hidden_dim},
          {"max_tokens", max_tokens},       {"sigma", sigma},
          {"beta0", beta0},                 {"separation_jitter", separation_jitter},
          {"seed", seed},                   {"distractor_words", distractor_words}};
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const auto start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::optional<double> planted_intensity(std::string_view text) {
  static const std::regex kMarker(R"(#intensity=([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)#)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, kMarker)) return std::nullopt;
  return csv::try_parse_double(std::string_view(&*m[1].first, static_cast<std::size_t>(m[1].length())));
}

SyntheticBackend::SyntheticBackend(SyntheticOptions options) : options_(std::move(options)) {
  if (options_.hidden_dim <= 0) throw ConfigError("synthetic hidden_dim must be positive");
  if (options_.sigma < 0.0) throw ConfigError("synthetic sigma must be nonnegative");
  if (options_.separation_jitter < 0.0 || options_.separation_jitter >= 1.0)
    throw ConfigError("synthetic separation_jitter must lie in [0, 1)");
  const auto d = static_cast<std::size_t>(options_.hidden_dim);
  direction_.resize(d);
  Rng rng(options_.seed ^ 0x9e3779b97f4a7c15ULL);
  const double mag = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& v : direction_) v = (rng.next_u64() >> 63) ? mag : -mag;
}

ProviderInfo SyntheticBackend::info() {
  return ProviderInfo{options_.model_id, options_.hidden_dim, options_.max_tokens, 1000};
}

std::vector<double> SyntheticBackend::noise(std::string_view prompt) const {
  const auto d = static_cast<std::size_t>(options_.hidden_dim);
  std::vector<double> g(d, 0.0);
  if (options_.sigma == 0.0) return g;
  Sha256Builder b;
  b.field("noise").field(std::to_string(options_.seed)).field(prompt);
  Rng rng(b.finish().prefix64());
  const double scale = options_.sigma / std::sqrt(static_cast<double>(d));
  for (auto& v : g) v = scale * rng.normal();
  return g;
}

double SyntheticBackend::separation_gain(std::string_view source_text) const {
  if (options_.separation_jitter == 0.0) return 1.0;
  Sha256Builder b;
  b.field("gain").field(std::to_string(options_.seed)).field(source_text);
  Rng rng(b.finish().prefix64());
  return 1.0 + options_.separation_jitter * (2.0 * rng.uniform01() - 1.0);
}

double SyntheticBackend::role_offset(PromptRole role) const noexcept {
  switch (role) {
    case PromptRole::positive: return options_.beta0;
    case PromptRole::negative: return -options_.beta0;
    default: return 0.0;
  }
}

HiddenState SyntheticBackend::hidden_state(const EmbedRequest& request) {
  const auto n_tokens = static_cast<std::int64_t>(whitespace_tokens(request.prompt).size());
  if (n_tokens > options_.max_tokens)
    throw ProviderError("prompt of " + std::to_string(n_tokens) + " tokens exceeds max_tokens " +
                        std::to_string(options_.max_tokens));
  const double alpha = planted_intensity(request.prompt).value_or(0.0);
  const double beta = role_offset(request.role);
  const double along = alpha + (beta == 0.0 ? 0.0 : separation_gain(request.source_text) * beta);
  HiddenState s;
  s.values = noise(request.prompt);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] += along * direction_[i];
  s.num_tokens = n_tokens;
  return s;
}

int SyntheticBackend::planted_score(double intensity) {
  return static_cast<int>(std::lround(100.0 * std::clamp(intensity, 0.0, 1.0)));
}

std::string SyntheticBackend::generate(std::string_view prompt, const GenerationParams&) {
  const auto score = std::to_string(planted_score(planted_intensity(prompt).value_or(0.0)));
  if (options_.distractor_words) return "Sure. Score: " + score + " overall, as requested.";
  return score;
}

std::int64_t SyntheticBackend::count_tokens(std::string_view text) {
  return static_cast<std::int64_t>(whitespace_tokens(text).size());
}

std::vector<std::string> SyntheticBackend::chunk(std::string_view text, std::int64_t limit) {
  if (limit < 1) throw UsageError("chunk limit must be at least 1");
  const auto tokens = whitespace_tokens(text);
  if (tokens.empty()) throw DataError("cannot chunk an empty text");
  std::vector<std::string> out;
  const auto step = static_cast<std::size_t>(limit);
  for (std::size_t i = 0; i < tokens.size(); i += step) {
    std::string c;
    for (std::size_t k = i; k < std::min(tokens.size(), i + step); ++k) {
      if (k > i) c.push_back(' ');
      c.append(tokens[k]);
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

constexpr std::string_view kFiller[] = {
    "the",    "rate",     "guest",   "room",    "policy", "staff",    "growth",  "market",
    "quarter","outlook",  "review",  "service", "demand", "product",  "pricing", "location",
    "supply", "inflation","lobby",   "breakfast","view",  "strategy", "capital", "customer",
    "rapid",  "steady",   "modest",  "strong",  "weak",   "clean",    "quiet",   "new"};

}  // namespace

Dataset make_synthetic_corpus(const SyntheticCorpusOptions& options) {
  if (options.records == 0) throw UsageError("synthetic corpus needs at least one record");
  if (options.min_words == 0 || options.max_words < options.min_words)
    throw UsageError("synthetic corpus word bounds are invalid");
  Dataset ds;
  ds.name = "synthetic";
  Rng rng(options.seed);
  constexpr auto kVocab = std::size(kFiller);
  for (std::size_t i = 0; i < options.records; ++i) {
    TextRecord r;
    char id[32];
    std::snprintf(id, sizeof(id), "s%05zu", i);
    r.id = id;
    const double intensity = std::round(rng.uniform01() * 1e6) / 1e6;
    const auto words =
        options.min_words + static_cast<std::size_t>(rng.uniform_below(options.max_words - options.min_words + 1));
    const auto marker_at = static_cast<std::size_t>(rng.uniform_below(words));
    std::string text;
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text.push_back(' ');
      if (w == marker_at) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "#intensity=%.6f#", intensity);
        text += buf;
      } else {
        text.append(kFiller[rng.uniform_below(kVocab)]);
      }
    }
    r.text = std::move(text);
    const double size = 7.0 + 2.0 * rng.normal();
    r.covariates["Size"] = size;
    r.covariates["Intensity"] = intensity;
    r.covariates["Words"] = static_cast<double>(words);
    r.y = options.y_slope * intensity + 0.3 * size + options.y_noise * rng.normal();
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace cprobe
