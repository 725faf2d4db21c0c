#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conceptprobe/run_config.hpp"

namespace cprobe {

/// Command-line overrides shared by the subcommands.
struct RunOverrides {
  std::filesystem::path probe_path;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;
  std::optional<ProviderKind> provider;
  std::string endpoint;
  /// name=path pairs for validate.
  std::vector<std::pair<std::string, std::filesystem::path>> measures;
  std::vector<std::string> variant_labels;
  std::string method = "llm_measure";
  std::string baseline_kind;
  std::filesystem::path input_path;
  std::filesystem::path output_path;
  std::optional<std::size_t> probe_n;
  std::optional<std::uint64_t> seed;
};

struct RunSummary {
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::vector<std::filesystem::path> outputs;
  std::string message;
};

/// Env var that overrides the configured cache directory.
inline constexpr const char* kCacheDirEnv = "CONCEPTPROBE_CACHE_DIR";

RunSummary cmd_probe(const RunConfig& config, const RunOverrides& overrides);
RunSummary cmd_measure(const RunConfig& config, const RunOverrides& overrides);
RunSummary cmd_baseline(const RunConfig& config, const RunOverrides& overrides);
RunSummary cmd_validate(const RunConfig& config, const RunOverrides& overrides);
RunSummary cmd_sensitivity(const RunConfig& config, const RunOverrides& overrides);
RunSummary cmd_stability(const RunConfig& config, const RunOverrides& overrides);

/// Builds the configured provider (with cache), honoring overrides.
Provider make_provider(const RunConfig& config, const RunOverrides& overrides);

}  // namespace cprobe
