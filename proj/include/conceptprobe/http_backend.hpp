#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "conceptprobe/provider.hpp"

namespace cprobe {

struct HttpBackendOptions {
  std::string endpoint;  // e.g. "http://127.0.0.1:8000"
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{600};
};

/// Client for the inference-service wire protocol:
///   GET  /v1/info
///   POST /v1/hidden_state, /v1/generate, /v1/count_tokens, /v1/chunk
/// Transport failures and 5xx responses are retried with exponential backoff;
/// 4xx responses fail immediately.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  ProviderInfo info() override;
  HiddenState hidden_state(const EmbedRequest& request) override;
  std::string generate(std::string_view prompt, const GenerationParams& params) override;
  std::int64_t count_tokens(std::string_view text) override;
  std::vector<std::string> chunk(std::string_view text, std::int64_t limit) override;

  /// Raw request. Returns (status, parsed body) after retries; throws
  /// ProviderError when the service stays unreachable.
  std::pair<int, nlohmann::json> request(const std::string& method, const std::string& path,
                                         const nlohmann::json* body = nullptr);

 private:
  nlohmann::json call(const std::string& method, const std::string& path,
                      const nlohmann::json* body = nullptr);

  HttpBackendOptions options_;
  std::mutex info_mutex_;
  std::optional<ProviderInfo> info_;
};

}  // namespace cprobe
