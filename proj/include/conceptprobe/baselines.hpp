#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "conceptprobe/corpus.hpp"
#include "conceptprobe/provider.hpp"

namespace cprobe {

struct ScoreParse {
  std::string raw_completion;
  double score = 0.0;
  int attempts = 0;
};

/// First decimal literal in the completion, if any.
std::optional<double> parse_first_number(std::string_view completion);

/// Direct 0-100 scoring through the concept's scoring prompt. Long texts are
/// scored per chunk and the chunk scores averaged. A completion without a
/// number is re-sampled, up to `max_attempts` draws per chunk.
ScoreParse prompting_score(const ConceptSpec& spec, const TextRecord& record,
                           Provider& provider, const GenerationParams& params,
                           int max_attempts = 3);

struct TopicDistribution {
  std::vector<double> probs;
};

/// Shannon entropy in nats with 0 log 0 = 0.
double information_overload(const TopicDistribution& topics);

struct SentenceLabelCounts {
  std::int64_t hawkish = 0;
  std::int64_t dovish = 0;
  std::int64_t total = 0;
};

/// (hawkish - dovish) / total
double stance_ratio(const SentenceLabelCounts& counts);

/// CSV: record_id, p_1 ... p_J
std::vector<std::pair<std::string, TopicDistribution>> read_topic_csv(
    const std::filesystem::path& path);

/// CSV: document_id, hawkish, dovish, total
std::vector<std::pair<std::string, SentenceLabelCounts>> read_label_counts_csv(
    const std::filesystem::path& path);

}  // namespace cprobe
