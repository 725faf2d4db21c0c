#include "conceptprobe/wire_server.hpp"

#include <httplib.h>
#include <json.hpp>

#include "conceptprobe/error.hpp"
#include "conceptprobe/http_backend.hpp"

namespace cprobe {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

// Parses the body and checks that `required` names a field of the given type.
std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res,
                               const char* required, json::value_t type) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    reply_error(res, 400, "body must be a JSON object");
    return std::nullopt;
  }
  if (!body.contains(required) || body[required].type() != type) {
    reply_error(res, 400, std::string("missing or malformed field '") + required + "'");
    return std::nullopt;
  }
  return body;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const DataError& e) {
      reply_error(res, 400, e.what());
    } catch (const UsageError& e) {
      reply_error(res, 400, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  };
}

bool is_integer(const json& j) { return j.is_number_integer() || j.is_number_unsigned(); }

}  // namespace

WireServer::WireServer(std::shared_ptr<Backend> backend)
    : backend_(std::move(backend)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  srv.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    int left = failures_.load();
    while (left > 0 && !failures_.compare_exchange_weak(left, left - 1)) {
    }
    if (left > 0) {
      reply_error(res, 500, "injected failure");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.Get("/v1/info", guarded([this](const httplib::Request&, httplib::Response& res) {
            const auto info = backend_->info();
            reply(res, 200,
                  json{{"model_id", info.model_id},
                       {"hidden_dim", info.hidden_dim},
                       {"max_tokens", info.max_tokens}});
          }));

  srv.Post("/v1/hidden_state", guarded([this](const httplib::Request& req, httplib::Response& res) {
             auto body = parse_body(req, res, "text", json::value_t::string);
             if (!body) return;
             const auto text = (*body)["text"].get<std::string>();
             const auto limit = backend_->info().max_tokens;
             const auto n = backend_->count_tokens(text);
             if (n > limit) {
               reply_error(res, 413, std::to_string(n) + " tokens exceeds max_tokens " +
                                         std::to_string(limit));
               return;
             }
             const auto state = backend_->hidden_state(EmbedRequest{text, PromptRole::unified, text});
             reply(res, 200,
                   json{{"hidden_state", state.values},
                        {"dim", state.values.size()},
                        {"num_tokens", state.num_tokens}});
           }));

  srv.Post("/v1/generate", guarded([this](const httplib::Request& req, httplib::Response& res) {
             auto body = parse_body(req, res, "prompt", json::value_t::string);
             if (!body) return;
             GenerationParams params;
             if (body->contains("max_new_tokens")) {
               if (!is_integer((*body)["max_new_tokens"]))
                 return reply_error(res, 400, "max_new_tokens must be an integer");
               params.max_new_tokens = (*body)["max_new_tokens"].get<std::int64_t>();
             }
             if (body->contains("temperature")) {
               if (!(*body)["temperature"].is_number())
                 return reply_error(res, 400, "temperature must be a number");
               params.temperature = (*body)["temperature"].get<double>();
             }
             if (body->contains("seed") && !(*body)["seed"].is_null()) {
               if (!is_integer((*body)["seed"])) return reply_error(res, 400, "seed must be an integer");
               params.seed = (*body)["seed"].get<std::uint64_t>();
             }
             const auto prompt = (*body)["prompt"].get<std::string>();
             const auto n = backend_->count_tokens(prompt);
             if (n > backend_->info().max_tokens) return reply_error(res, 413, "prompt too long");
             const auto completion = backend_->generate(prompt, params);
             reply(res, 200, json{{"completion", completion}, {"num_prompt_tokens", n}});
           }));

  srv.Post("/v1/count_tokens", guarded([this](const httplib::Request& req, httplib::Response& res) {
             auto body = parse_body(req, res, "text", json::value_t::string);
             if (!body) return;
             reply(res, 200,
                   json{{"num_tokens", backend_->count_tokens((*body)["text"].get<std::string>())}});
           }));

  srv.Post("/v1/chunk", guarded([this](const httplib::Request& req, httplib::Response& res) {
             auto body = parse_body(req, res, "text", json::value_t::string);
             if (!body) return;
             if (!body->contains("limit") || !is_integer((*body)["limit"]) ||
                 (*body)["limit"].get<std::int64_t>() < 1)
               return reply_error(res, 400, "limit must be an integer >= 1");
             const auto text = (*body)["text"].get<std::string>();
             if (backend_->count_tokens(text) == 0) return reply_error(res, 400, "text is empty");
             reply(res, 200,
                   json{{"chunks", backend_->chunk(text, (*body)["limit"].get<std::int64_t>())}});
           }));
}

WireServer::~WireServer() { stop(); }

int WireServer::start(int port) {
  if (thread_.joinable()) throw UsageError("wire server already started");
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw IoError("could not bind wire server on 127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void WireServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string WireServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

void WireServer::inject_failures(int n) { failures_.store(n); }

std::vector<ConformanceCheck> run_conformance(const std::string& endpoint) {
  HttpBackendOptions opts;
  opts.endpoint = endpoint;
  opts.max_attempts = 1;
  HttpBackend client(opts);
  std::vector<ConformanceCheck> checks;
  auto check = [&](std::string name, auto&& body) {
    ConformanceCheck c{std::move(name), false, {}};
    try {
      c.detail = body();
      c.passed = c.detail.empty();
      if (c.passed) c.detail = "ok";
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    checks.push_back(std::move(c));
  };
  auto post = [&](const std::string& path, const json& body) {
    return client.request("POST", path, &body);
  };

  std::int64_t hidden_dim = 0;
  std::int64_t max_tokens = 0;
  check("info_shape", [&]() -> std::string {
    auto [status, j] = client.request("GET", "/v1/info");
    if (status != 200) return "status " + std::to_string(status);
    if (!j.contains("model_id") || !j["model_id"].is_string()) return "model_id missing";
    if (!j.contains("hidden_dim") || !is_integer(j["hidden_dim"])) return "hidden_dim missing";
    if (!j.contains("max_tokens") || !is_integer(j["max_tokens"])) return "max_tokens missing";
    hidden_dim = j["hidden_dim"].get<std::int64_t>();
    max_tokens = j["max_tokens"].get<std::int64_t>();
    if (hidden_dim <= 0 || max_tokens <= 0) return "hidden_dim and max_tokens must be positive";
    return {};
  });

  const json probe_text{{"text", "The committee expects inflation to ease next quarter."}};
  json first;
  check("hidden_state_shape", [&]() -> std::string {
    auto [status, j] = post("/v1/hidden_state", probe_text);
    if (status != 200) return "status " + std::to_string(status);
    if (!j.contains("hidden_state") || !j["hidden_state"].is_array()) return "hidden_state missing";
    for (const auto& v : j["hidden_state"])
      if (!v.is_number()) return "hidden_state holds a non-number";
    if (!j.contains("dim") || !is_integer(j["dim"])) return "dim missing";
    if (!j.contains("num_tokens") || !is_integer(j["num_tokens"])) return "num_tokens missing";
    if (j["dim"].get<std::size_t>() != j["hidden_state"].size()) return "dim disagrees with length";
    first = j;
    return {};
  });
  check("hidden_state_dim_matches_info", [&]() -> std::string {
    if (first.is_null()) return "no hidden state";
    const auto dim = first["dim"].get<std::int64_t>();
    if (dim != hidden_dim)
      return "dim " + std::to_string(dim) + " vs info " + std::to_string(hidden_dim);
    return {};
  });
  check("hidden_state_deterministic", [&]() -> std::string {
    auto [status, j] = post("/v1/hidden_state", probe_text);
    if (status != 200) return "status " + std::to_string(status);
    if (first.is_null() || j["hidden_state"] != first["hidden_state"]) return "states differ";
    return {};
  });
  check("hidden_state_missing_text_400", [&]() -> std::string {
    auto [status, j] = post("/v1/hidden_state", json{{"txt", "x"}});
    if (status != 400) return "status " + std::to_string(status);
    if (!j.contains("error")) return "error body missing";
    return {};
  });
  check("hidden_state_too_long_413", [&]() -> std::string {
    if (max_tokens <= 0) return "max_tokens unknown";
    std::string text;
    text.reserve(static_cast<std::size_t>(max_tokens + 1) * 2);
    for (std::int64_t i = 0; i <= max_tokens; ++i) text += i ? " a" : "a";
    auto [status, j] = post("/v1/hidden_state", json{{"text", text}});
    if (status != 413) return "status " + std::to_string(status);
    if (!j.contains("error")) return "error body missing";
    return {};
  });
  check("generate_shape", [&]() -> std::string {
    auto [status, j] = post("/v1/generate", json{{"prompt", "Score: "},
                                                 {"max_new_tokens", 4},
                                                 {"temperature", 1.0},
                                                 {"seed", 3}});
    if (status != 200) return "status " + std::to_string(status);
    if (!j.contains("completion") || !j["completion"].is_string()) return "completion missing";
    if (!j.contains("num_prompt_tokens") || !is_integer(j["num_prompt_tokens"]))
      return "num_prompt_tokens missing";
    return {};
  });
  check("generate_missing_prompt_400", [&]() -> std::string {
    auto [status, j] = post("/v1/generate", json{{"max_new_tokens", 4}});
    if (status != 400) return "status " + std::to_string(status);
    return {};
  });
  check("count_tokens_empty_is_zero", [&]() -> std::string {
    auto [status, j] = post("/v1/count_tokens", json{{"text", ""}});
    if (status != 200) return "status " + std::to_string(status);
    if (!j.contains("num_tokens") || j["num_tokens"] != 0) return "expected 0 tokens";
    return {};
  });
  check("chunk_counts", [&]() -> std::string {
    std::string text;
    for (int i = 0; i < 25; ++i) text += (i ? " word" : "word") + std::to_string(i);
    auto [cs, cj] = post("/v1/count_tokens", json{{"text", text}});
    if (cs != 200) return "count status " + std::to_string(cs);
    const auto n = cj["num_tokens"].get<std::int64_t>();
    const std::int64_t limit = 10;
    auto [status, j] = post("/v1/chunk", json{{"text", text}, {"limit", limit}});
    if (status != 200) return "status " + std::to_string(status);
    if (!j.contains("chunks") || !j["chunks"].is_array()) return "chunks missing";
    const auto want = static_cast<std::size_t>((n + limit - 1) / limit);
    if (j["chunks"].size() != want)
      return "got " + std::to_string(j["chunks"].size()) + " chunks, want " + std::to_string(want);
    return {};
  });
  check("chunk_bad_limit_400", [&]() -> std::string {
    auto [status, j] = post("/v1/chunk", json{{"text", "a b"}, {"limit", 0}});
    if (status != 400) return "status " + std::to_string(status);
    return {};
  });
  return checks;
}

}  // namespace cprobe
