#include "conceptprobe/provider.hpp"

#include <cmath>

#include "conceptprobe/error.hpp"

namespace cprobe {

HiddenState mean_pool(const std::vector<HiddenState>& states) {
  if (states.empty()) throw ProviderError("cannot pool zero hidden states");
  HiddenState out;
  const auto d = states.front().dim();
  out.values.assign(d, 0.0);
  for (const auto& s : states) {
    if (s.dim() != d) throw ProviderError("chunk hidden states differ in dimension");
    for (std::size_t i = 0; i < d; ++i) out.values[i] += s.values[i];
    out.num_tokens += s.num_tokens;
  }
  const double n = static_cast<double>(states.size());
  for (auto& v : out.values) v /= n;
  out.chunks = static_cast<std::int64_t>(states.size());
  return out;
}

Provider::Provider(std::shared_ptr<Backend> backend, ProviderOptions options)
    : backend_(std::move(backend)),
      cache_(std::move(options.cache)),
      max_concurrency_(options.max_concurrency) {
  if (!backend_) throw UsageError("provider needs a backend");
  if (max_concurrency_ < 1) throw ConfigError("max_concurrency must be at least 1");
  info_ = backend_->info();
  info_.chunk_limit = options.chunk_limit;
  if (info_.hidden_dim <= 0) throw ProviderError("backend reports nonpositive hidden_dim");
  if (info_.chunk_limit <= 0 || info_.chunk_limit > info_.max_tokens)
    throw ConfigError("chunk_limit " + std::to_string(info_.chunk_limit) +
                      " must lie in [1, max_tokens=" + std::to_string(info_.max_tokens) + "]");
}

HiddenState Provider::embed_checked(const EmbedRequest& request) {
  ++calls_;
  HiddenState s = backend_->hidden_state(request);
  if (static_cast<std::int64_t>(s.dim()) != info_.hidden_dim)
    throw ProviderError("hidden state has dim " + std::to_string(s.dim()) + ", provider reports " +
                        std::to_string(info_.hidden_dim));
  for (double v : s.values)
    if (!std::isfinite(v)) throw ProviderError("backend returned a non-finite hidden state value");
  return s;
}

HiddenState Provider::compute_hidden_state(const ConceptSpec& spec, PromptRole role,
                                           std::string_view text) {
  const auto n_tokens = count_tokens(text);
  if (n_tokens == 0) throw DataError("cannot embed an empty text (zero chunks)");
  if (n_tokens <= info_.chunk_limit) {
    const auto prompt = render(spec, role, text);
    return embed_checked(EmbedRequest{prompt, role, text});
  }
  const auto chunks = chunk_text(text, info_.chunk_limit);
  if (chunks.empty()) throw ProviderError("chunking produced zero chunks");
  std::vector<HiddenState> states;
  states.reserve(chunks.size());
  for (const auto& c : chunks) {
    const auto prompt = render(spec, role, c);
    states.push_back(embed_checked(EmbedRequest{prompt, role, c}));
  }
  return mean_pool(states);
}

HiddenState Provider::hidden_state(const ConceptSpec& spec, PromptRole role,
                                   std::string_view text) {
  if (!cache_) return compute_hidden_state(spec, role, text);
  const auto key = CacheKey::make(info_.model_id, to_string(role), template_digest(spec, role), text);
  std::int64_t tokens = 0;
  auto cached = cache_->get_or_compute(key, [&] {
    auto s = compute_hidden_state(spec, role, text);
    tokens = s.num_tokens;
    CachedVector v;
    v.values.assign(s.values.begin(), s.values.end());
    v.chunks = s.chunks;
    return v;
  });
  if (static_cast<std::int64_t>(cached.values.size()) != info_.hidden_dim)
    throw ProviderError("cached hidden state has dim " + std::to_string(cached.values.size()) +
                        ", provider reports " + std::to_string(info_.hidden_dim));
  HiddenState out;
  out.values.assign(cached.values.begin(), cached.values.end());
  out.chunks = cached.chunks;
  out.num_tokens = tokens;
  return out;
}

std::string Provider::generate(std::string_view prompt, const GenerationParams& params) {
  if (params.temperature < 0.0) throw ConfigError("temperature must be nonnegative");
  if (params.max_new_tokens <= 0) throw ConfigError("max_new_tokens must be positive");
  const auto n = count_tokens(prompt);
  if (n > info_.max_tokens - params.max_new_tokens)
    throw DataError("prompt of " + std::to_string(n) + " tokens exceeds the budget of " +
                    std::to_string(info_.max_tokens - params.max_new_tokens) + " tokens");
  ++calls_;
  return backend_->generate(prompt, params);
}

std::vector<std::string> Provider::chunk_text(std::string_view text, std::int64_t limit) {
  if (limit < 1) throw UsageError("chunk limit must be at least 1");
  if (text.empty()) throw DataError("cannot chunk an empty text");
  ++calls_;
  auto chunks = backend_->chunk(text, limit);
  if (chunks.empty()) throw ProviderError("backend returned zero chunks");
  return chunks;
}

std::int64_t Provider::count_tokens(std::string_view text) {
  if (text.empty()) return 0;
  ++calls_;
  return backend_->count_tokens(text);
}

}  // namespace cprobe
