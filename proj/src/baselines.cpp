#include "conceptprobe/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <json.hpp>

#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"

namespace cprobe {

using nlohmann::json;

std::optional<double> parse_first_number(std::string_view completion) {
  static const std::regex kNumber(R"(-?\d+(\.\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(completion.begin(), completion.end(), m, kNumber)) return std::nullopt;
  return csv::try_parse_double(
      std::string_view(&*m[0].first, static_cast<std::size_t>(m[0].length())));
}

namespace {

ScoreParse score_uncached(const ConceptSpec& spec, const TextRecord& record, Provider& provider,
                          const GenerationParams& params, int max_attempts) {
  const auto n = provider.count_tokens(record.text);
  if (n == 0) throw DataError("record " + record.id + " has no tokens");
  std::vector<std::string> chunks;
  if (n <= provider.info().chunk_limit)
    chunks.emplace_back(record.text);
  else
    chunks = provider.chunk_text(record.text);

  ScoreParse out;
  double sum = 0.0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto prompt = render(spec, PromptRole::scoring, chunks[c]);
    std::optional<double> score;
    for (int attempt = 0; attempt < max_attempts && !score; ++attempt) {
      auto p = params;
      if (p.seed) p.seed = *p.seed + static_cast<std::uint64_t>(attempt);
      const auto completion = provider.generate(prompt, p);
      ++out.attempts;
      if (!out.raw_completion.empty()) out.raw_completion += "\n---\n";
      out.raw_completion += completion;
      score = parse_first_number(completion);
    }
    if (!score)
      throw DataError("record " + record.id + ": no score in " + std::to_string(max_attempts) +
                      " completion(s) for chunk " + std::to_string(c + 1));
    sum += std::clamp(*score, 0.0, 100.0);
  }
  out.score = sum / static_cast<double>(chunks.size());
  return out;
}

}  // namespace

ScoreParse prompting_score(const ConceptSpec& spec, const TextRecord& record, Provider& provider,
                           const GenerationParams& params, int max_attempts) {
  if (!spec.scoring_template) throw ConfigError("concept '" + spec.name + "' has no scoring template");
  if (max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  auto* cache = provider.cache();
  if (!cache) return score_uncached(spec, record, provider, params, max_attempts);

  std::string role = "scoring#temperature=" + csv::format_double(params.temperature) +
                     "#max_new_tokens=" + std::to_string(params.max_new_tokens) +
                     "#attempts=" + std::to_string(max_attempts) +
                     "#chunk_limit=" + std::to_string(provider.info().chunk_limit);
  role += params.seed ? "#seed=" + std::to_string(*params.seed) : std::string("#seed=none");
  const auto key = CacheKey::make(provider.info().model_id, role,
                                  template_digest(spec, PromptRole::scoring), record.text);
  const auto stored = cache->get_or_compute_text(key, [&] {
    const auto s = score_uncached(spec, record, provider, params, max_attempts);
    return json{{"raw_completion", s.raw_completion}, {"score", s.score}, {"attempts", s.attempts}}
        .dump();
  });
  const auto j = json::parse(stored, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("cached score for " + record.id + " is malformed");
  return ScoreParse{j.value("raw_completion", ""), j.value("score", 0.0), j.value("attempts", 1)};
}

double information_overload(const TopicDistribution& topics) {
  if (topics.probs.empty()) throw DataError("topic distribution is empty");
  double total = 0.0;
  for (double p : topics.probs) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("topic probabilities must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw DataError("topic probabilities sum to " + csv::format_double(total) + ", not 1");
  double h = 0.0;
  for (double p : topics.probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

double stance_ratio(const SentenceLabelCounts& c) {
  if (c.total < 1) throw DataError("stance ratio needs at least one sentence");
  if (c.hawkish < 0 || c.dovish < 0 || c.hawkish + c.dovish > c.total)
    throw DataError("label counts are inconsistent with the sentence total");
  return static_cast<double>(c.hawkish - c.dovish) / static_cast<double>(c.total);
}

std::vector<std::pair<std::string, TopicDistribution>> read_topic_csv(
    const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto c_id = table.require_column("record_id");
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < table.header.size(); ++i)
    if (i != c_id) cols.push_back(i);
  if (cols.empty()) throw DataError(path.string() + ": no topic columns");
  std::vector<std::pair<std::string, TopicDistribution>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    TopicDistribution t;
    for (auto c : cols) {
      auto v = csv::try_parse_double(table.rows[r].at(c));
      if (!v)
        throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": column " +
                        table.header[c] + " is not a number");
      t.probs.push_back(*v);
    }
    out.emplace_back(table.rows[r].at(c_id), std::move(t));
  }
  return out;
}

std::vector<std::pair<std::string, SentenceLabelCounts>> read_label_counts_csv(
    const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto c_id = table.require_column("document_id");
  const auto c_h = table.require_column("hawkish");
  const auto c_d = table.require_column("dovish");
  const auto c_t = table.require_column("total");
  std::vector<std::pair<std::string, SentenceLabelCounts>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto get = [&](std::size_t c) {
      auto v = csv::try_parse_double(row.at(c));
      if (!v || *v != std::floor(*v))
        throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": " +
                        table.header[c] + " must be an integer");
      return static_cast<std::int64_t>(*v);
    };
    out.emplace_back(row.at(c_id), SentenceLabelCounts{get(c_h), get(c_d), get(c_t)});
  }
  return out;
}

}  // namespace cprobe
