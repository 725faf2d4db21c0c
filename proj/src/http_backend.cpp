#include "conceptprobe/http_backend.hpp"

#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "conceptprobe/error.hpp"

namespace cprobe {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ConfigError("http provider needs an endpoint");
  if (options_.max_attempts < 1) throw ConfigError("http max_attempts must be at least 1");
  while (!options_.endpoint.empty() && options_.endpoint.back() == '/') options_.endpoint.pop_back();
}

std::pair<int, json> HttpBackend::request(const std::string& method, const std::string& path,
                                          const json* body) {
  auto backoff = options_.initial_backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    httplib::Result res = method == "GET"
                              ? client.Get(path)
                              : client.Post(path, body ? body->dump() : std::string("{}"),
                                            "application/json");
    if (res) {
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) parsed = json{{"error", res->body}};
      if (res->status < 500 || attempt == options_.max_attempts) return {res->status, parsed};
      last_failure = "HTTP " + std::to_string(res->status);
    } else {
      last_failure = httplib::to_string(res.error());
      if (attempt == options_.max_attempts) break;
    }
    spdlog::warn("{} {} failed ({}), attempt {}/{}", method, path, last_failure, attempt,
                 options_.max_attempts);
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
  throw ProviderError("inference service at " + options_.endpoint + " unreachable: " + last_failure);
}

json HttpBackend::call(const std::string& method, const std::string& path, const json* body) {
  auto [status, out] = request(method, path, body);
  if (status == 200) return out;
  const std::string msg = out.is_object() && out.contains("error") && out["error"].is_string()
                              ? out["error"].get<std::string>()
                              : out.dump();
  if (status == 413) throw DataError(path + ": input too long: " + msg);
  throw ProviderError(path + ": HTTP " + std::to_string(status) + ": " + msg);
}

namespace {

template <typename T>
T field(const json& j, const char* name, const std::string& path) {
  if (!j.is_object() || !j.contains(name))
    throw ProviderError(path + ": response missing '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ProviderError(path + ": response field '" + std::string(name) + "' has the wrong type");
  }
}

}  // namespace

ProviderInfo HttpBackend::info() {
  std::lock_guard lock(info_mutex_);
  if (!info_) {
    const auto j = call("GET", "/v1/info");
    ProviderInfo pi;
    pi.model_id = field<std::string>(j, "model_id", "/v1/info");
    pi.hidden_dim = field<std::int64_t>(j, "hidden_dim", "/v1/info");
    pi.max_tokens = field<std::int64_t>(j, "max_tokens", "/v1/info");
    info_ = pi;
  }
  return *info_;
}

HiddenState HttpBackend::hidden_state(const EmbedRequest& request) {
  const json body{{"text", request.prompt}};
  const auto j = call("POST", "/v1/hidden_state", &body);
  HiddenState s;
  s.values = field<std::vector<double>>(j, "hidden_state", "/v1/hidden_state");
  s.num_tokens = field<std::int64_t>(j, "num_tokens", "/v1/hidden_state");
  const auto dim = field<std::int64_t>(j, "dim", "/v1/hidden_state");
  if (dim != static_cast<std::int64_t>(s.values.size()))
    throw ProviderError("/v1/hidden_state: dim " + std::to_string(dim) + " disagrees with " +
                        std::to_string(s.values.size()) + " values");
  return s;
}

std::string HttpBackend::generate(std::string_view prompt, const GenerationParams& params) {
  json body{{"prompt", prompt},
            {"max_new_tokens", params.max_new_tokens},
            {"temperature", params.temperature}};
  if (params.seed) body["seed"] = *params.seed;
  return field<std::string>(call("POST", "/v1/generate", &body), "completion", "/v1/generate");
}

std::int64_t HttpBackend::count_tokens(std::string_view text) {
  const json body{{"text", text}};
  return field<std::int64_t>(call("POST", "/v1/count_tokens", &body), "num_tokens",
                             "/v1/count_tokens");
}

std::vector<std::string> HttpBackend::chunk(std::string_view text, std::int64_t limit) {
  const json body{{"text", text}, {"limit", limit}};
  return field<std::vector<std::string>>(call("POST", "/v1/chunk", &body), "chunks", "/v1/chunk");
}

}  // namespace cprobe
