#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "conceptprobe/analysis.hpp"
#include "conceptprobe/corpus.hpp"
#include "conceptprobe/provider.hpp"
#include "conceptprobe/synthetic.hpp"

namespace cprobe {

enum class ProviderKind { synthetic, http };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::synthetic;
  std::string endpoint;
  int max_concurrency = 4;
  std::int64_t chunk_limit = 1000;
  SyntheticOptions synthetic;
};

/// One run, as read from the JSON config file. Relative paths resolve
/// against the config file's directory.
struct RunConfig {
  std::filesystem::path source;
  std::string config_digest;

  std::string name;
  std::filesystem::path dataset_path;
  DatasetFormat dataset_format = DatasetFormat::jsonl;
  ColumnMapping mapping;

  std::filesystem::path concept_path;
  std::string concept_variant = "original";

  ProviderConfig provider;

  std::size_t probe_n = kDefaultProbeSize;
  std::uint64_t probe_seed = 1;

  bool standardize_output = true;

  GenerationParams generation;
  int max_attempts = 3;

  std::vector<StudySpec> studies;

  std::size_t stability_first = 64;
  std::size_t stability_second = 128;

  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

}  // namespace cprobe
