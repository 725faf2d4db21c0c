#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptprobe/cache.hpp"
#include "conceptprobe/prompts.hpp"

namespace cprobe {

/// Last-token, last-layer representation returned by a backend.
struct HiddenState {
  std::vector<double> values;
  std::int64_t num_tokens = 0;
  /// Number of chunks pooled into this state (1 unless the text was split).
  std::int64_t chunks = 1;

  std::size_t dim() const noexcept { return values.size(); }
};

struct ProviderInfo {
  std::string model_id;
  std::int64_t hidden_dim = 0;
  std::int64_t max_tokens = 4096;
  std::int64_t chunk_limit = 1000;
};

struct GenerationParams {
  double temperature = 1.0;
  std::int64_t max_new_tokens = 8;
  std::optional<std::uint64_t> seed;
};

/// What a backend sees for one forward pass. `source_text` is the raw chunk
/// that was rendered into `prompt`; remote backends only transmit `prompt`.
struct EmbedRequest {
  std::string_view prompt;
  PromptRole role = PromptRole::unified;
  std::string_view source_text;
};

/// Model access boundary. Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual ProviderInfo info() = 0;
  virtual HiddenState hidden_state(const EmbedRequest& request) = 0;
  virtual std::string generate(std::string_view prompt, const GenerationParams& params) = 0;
  virtual std::int64_t count_tokens(std::string_view text) = 0;
  virtual std::vector<std::string> chunk(std::string_view text, std::int64_t limit) = 0;
};

struct ProviderOptions {
  std::int64_t chunk_limit = 1000;
  int max_concurrency = 4;
  std::shared_ptr<ContentCache> cache;
};

/// Pipeline-facing provider: template rendering, chunk-and-pool for long
/// texts, dimension checks and the content cache, on top of a Backend.
class Provider {
 public:
  Provider(std::shared_ptr<Backend> backend, ProviderOptions options = {});

  const ProviderInfo& info() const noexcept { return info_; }
  int max_concurrency() const noexcept { return max_concurrency_; }
  ContentCache* cache() const noexcept { return cache_.get(); }

  /// Hidden state of `render(spec, role, text)`. Texts longer than the chunk
  /// limit are split, each chunk rendered through the same template, and the
  /// per-chunk states averaged element-wise.
  HiddenState hidden_state(const ConceptSpec& spec, PromptRole role, std::string_view text);

  /// Uncached form of hidden_state; exposed for pooling checks.
  HiddenState compute_hidden_state(const ConceptSpec& spec, PromptRole role,
                                   std::string_view text);

  std::string generate(std::string_view prompt, const GenerationParams& params);
  std::vector<std::string> chunk_text(std::string_view text, std::int64_t limit);
  std::vector<std::string> chunk_text(std::string_view text) {
    return chunk_text(text, info_.chunk_limit);
  }
  std::int64_t count_tokens(std::string_view text);

  /// Number of backend requests issued (hidden state, generate, count, chunk).
  std::size_t backend_calls() const noexcept { return calls_.load(); }

 private:
  HiddenState embed_checked(const EmbedRequest& request);

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ContentCache> cache_;
  ProviderInfo info_;
  int max_concurrency_;
  std::atomic<std::size_t> calls_{0};
};

/// Element-wise arithmetic mean of equally sized states.
HiddenState mean_pool(const std::vector<HiddenState>& states);

}  // namespace cprobe
