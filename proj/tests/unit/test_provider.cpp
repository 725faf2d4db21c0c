#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "conceptprobe/error.hpp"
#include "conceptprobe/http_backend.hpp"
#include "conceptprobe/prompts.hpp"
#include "conceptprobe/provider.hpp"
#include "conceptprobe/synthetic.hpp"
#include "conceptprobe/wire_server.hpp"
#include "support.hpp"

using namespace cprobe;

namespace {

std::string words(std::size_t n, std::string_view prefix = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += std::string(prefix) + std::to_string(i);
  }
  return out;
}

// Counts calls and can return a fixed state per chunk text.
class ScriptedBackend final : public Backend {
 public:
  std::map<std::string, std::vector<double>> states;
  int calls = 0;

  ProviderInfo info() override { return {"scripted", 2, 4096, 1000}; }
  HiddenState hidden_state(const EmbedRequest& r) override {
    ++calls;
    HiddenState h;
    h.values = states.at(std::string(r.source_text));
    h.num_tokens = 1;
    return h;
  }
  std::string generate(std::string_view, const GenerationParams&) override { return "1"; }
  std::int64_t count_tokens(std::string_view text) override {
    return static_cast<std::int64_t>(whitespace_tokens(text).size());
  }
  std::vector<std::string> chunk(std::string_view text, std::int64_t limit) override {
    (void)limit;
    std::vector<std::string> out;
    for (auto w : whitespace_tokens(text)) out.emplace_back(w);
    return out;
  }
};

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("render substitutes the placeholder only") {
    ConceptSpec s = testing::demo_spec();
    s.positive_template = "A {input} B";
    CHECK(render(s, PromptRole::positive, "x") == "A x B");
    CHECK(render(s, PromptRole::positive, "{input}") == "A {input} B");
    CHECK(render_template("[{input}]", "a\"b\n") == "[a\"b\n]");
  }

  TEST_CASE("render is injective in the input") {
    const auto s = testing::demo_spec();
    CHECK(render(s, PromptRole::unified, "ab") != render(s, PromptRole::unified, "a b"));
  }

  TEST_CASE("scoring role without a template fails") {
    auto s = testing::demo_spec();
    s.scoring_template.reset();
    CHECK(s.template_for(PromptRole::scoring) == nullptr);
    CHECK_THROWS_AS(render(s, PromptRole::scoring, "x"), ConfigError);
  }

  TEST_CASE("validate_spec reports each violation") {
    auto s = testing::demo_spec();
    CHECK(validate_spec(s).empty());
    s.positive_template = "no placeholder";
    CHECK(validate_spec(s) == std::vector<std::string>{"positive_template: missing {input}"});
    s = testing::demo_spec();
    s.negative_template = "{input} {input}";
    CHECK(validate_spec(s).size() == 1);
    s = testing::demo_spec();
    s.orientation = Orientation::auto_anchors;
    const auto v = validate_spec(s);
    REQUIRE(v.size() == 1);
    CHECK(v[0].rfind("anchors:", 0) == 0);
  }

  TEST_CASE("shipped concept files are well formed") {
    for (const char* f : {"policy_stance", "innovation", "information_overload", "synthetic_demo"}) {
      CAPTURE(f);
      const auto set = load_concept_file(std::filesystem::path(CPROBE_SOURCE_DIR) / "configs" /
                                         "concepts" / (std::string(f) + ".json"));
      CHECK(set.labels().size() == 3);
      for (const auto& label : set.labels()) CHECK(validate_spec(set.get(label)).empty());
    }
  }

  TEST_CASE("shipped prompts re-render byte-for-byte") {
    const std::filesystem::path root = std::filesystem::path(CPROBE_SOURCE_DIR) / "configs";
    const std::pair<const char*, const char*> concepts[] = {
        {"policy_stance", "stance"}, {"innovation", "innovation"}, {"information_overload", "overload"}};
    int compared = 0;
    for (const auto& [file, stem] : concepts) {
      const auto set = load_concept_file(root / "concepts" / (std::string(file) + ".json"));
      for (const auto& label : set.labels()) {
        for (auto role : {PromptRole::positive, PromptRole::negative, PromptRole::unified,
                          PromptRole::scoring}) {
          const auto golden = root / "golden" /
                              (std::string(stem) + "__" + label + "__" + to_string(role) + ".txt");
          CAPTURE(golden.string());
          REQUIRE(std::filesystem::exists(golden));
          CHECK(render(set.get(label), role, "Input Sequence") == testing::read_file(golden));
          ++compared;
        }
      }
    }
    CHECK(compared == 36);
  }

  TEST_CASE("stance positive prompt keeps its closing phrase") {
    const auto set = load_concept_file(std::filesystem::path(CPROBE_SOURCE_DIR) /
                                       "configs/concepts/policy_stance.json");
    const auto p = render(set.base, PromptRole::positive, "Rates will rise.");
    const std::string tail = "The traits making it sound like hawkish include";
    REQUIRE(p.size() >= tail.size());
    CHECK(p.substr(p.size() - tail.size()) == tail);
  }

  TEST_CASE("concept json round-trips") {
    const auto set = load_concept_file(std::filesystem::path(CPROBE_SOURCE_DIR) /
                                       "configs/concepts/synthetic_demo.json");
    const auto again = concept_set_from_json(concept_set_to_json(set));
    CHECK(again.labels() == set.labels());
    CHECK(again.base.unified_template == set.base.unified_template);
    CHECK(again.base.orientation == Orientation::auto_anchors);
    REQUIRE(again.base.anchors.has_value());
    CHECK(again.base.anchors->positive_text == set.base.anchors->positive_text);
    CHECK_THROWS_AS(set.get("nope"), UsageError);
  }
}

TEST_SUITE("provider") {
  TEST_CASE("token counting and chunk lengths") {
    auto p = testing::provider(testing::synthetic());
    CHECK(p->count_tokens("") == 0);
    CHECK(p->count_tokens("a b c") == 3);
    const auto long_text = words(2500);
    const auto chunks = p->chunk_text(long_text, 1000);
    REQUIRE(chunks.size() == 3);
    CHECK(p->count_tokens(chunks[0]) == 1000);
    CHECK(p->count_tokens(chunks[1]) == 1000);
    CHECK(p->count_tokens(chunks[2]) == 500);
    const auto exact = words(1000);
    const auto one = p->chunk_text(exact, 1000);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == exact);
    CHECK(p->chunk_text("solo", 1000).size() == 1);
    CHECK_THROWS_AS(p->chunk_text("a", 0), UsageError);
  }

  TEST_CASE("short text passes through in one call") {
    auto backend = testing::synthetic();
    auto p = testing::provider(backend);
    const auto spec = testing::demo_spec();
    const auto text = words(12);
    const auto before = p->backend_calls();
    const auto h = p->hidden_state(spec, PromptRole::unified, text);
    const auto prompt = render(spec, PromptRole::unified, text);
    const auto direct = backend->hidden_state(EmbedRequest{prompt, PromptRole::unified, text});
    CHECK(h.values == direct.values);
    CHECK(h.chunks == 1);
    CHECK(p->backend_calls() - before == 2);  // count_tokens + hidden_state
  }

  TEST_CASE("long text pools per-chunk states exactly") {
    auto backend = testing::synthetic();
    auto p = testing::provider(backend);
    const auto spec = testing::demo_spec();
    const auto text = words(2500) + " #intensity=0.4#";
    const auto pooled = p->compute_hidden_state(spec, PromptRole::positive, text);
    CHECK(pooled.chunks == 3);
    const auto chunks = backend->chunk(text, 1000);
    REQUIRE(chunks.size() == 3);
    for (std::size_t k = 0; k < pooled.dim(); ++k) {
      double sum = 0.0;
      for (const auto& c : chunks) {
        const auto prompt = render(spec, PromptRole::positive, c);
        sum += backend->hidden_state(EmbedRequest{prompt, PromptRole::positive, c}).values[k];
      }
      CHECK(std::abs(pooled.values[k] - sum / 3.0) <= 1e-12);
    }
  }

  TEST_CASE("mean of two chunk states") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->states = {{"a", {2.0, 0.0}}, {"b", {0.0, 2.0}}};
    ProviderOptions o;
    o.chunk_limit = 1;
    Provider p(backend, o);
    const auto h = p.hidden_state(testing::demo_spec(), PromptRole::unified, "a b");
    CHECK(h.values == std::vector<double>{1.0, 1.0});
    CHECK(h.chunks == 2);
    CHECK(backend->calls == 2);
  }

  TEST_CASE("mean_pool rejects mixed dimensions") {
    HiddenState a, b;
    a.values = {1, 2};
    b.values = {1};
    CHECK_THROWS_AS(mean_pool({a, b}), ProviderError);
    CHECK_THROWS_AS(mean_pool({}), ProviderError);
  }

  TEST_CASE("cached states skip the backend") {
    testing::TempDir dir;
    auto cache = std::make_shared<ContentCache>(dir.path());
    auto p = testing::provider(testing::synthetic(), cache);
    const auto spec = testing::demo_spec();
    const auto a = p->hidden_state(spec, PromptRole::negative, "some text");
    const auto calls = p->backend_calls();
    const auto b = p->hidden_state(spec, PromptRole::negative, "some text");
    CHECK(p->backend_calls() == calls);
    CHECK(a.values == b.values);
    auto other = testing::demo_spec();
    other.negative_template += " ";
    p->hidden_state(other, PromptRole::negative, "some text");
    CHECK(p->backend_calls() > calls);
  }

  TEST_CASE("empty text cannot be embedded") {
    auto p = testing::provider(testing::synthetic());
    CHECK_THROWS_AS(p->hidden_state(testing::demo_spec(), PromptRole::unified, ""), DataError);
  }

  TEST_CASE("chunk limit above the model budget is a config error") {
    SyntheticOptions o;
    o.max_tokens = 100;
    ProviderOptions po;
    po.chunk_limit = 1000;
    CHECK_THROWS_AS(Provider(std::make_shared<SyntheticBackend>(o), po), ConfigError);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("closed form of a difference vector at zero noise") {
    auto backend = testing::synthetic(0.0);
    const auto& u = backend->planted_direction();
    double norm = 0.0;
    for (double x : u) norm += x * x;
    CHECK(std::abs(norm - 1.0) < 1e-12);
    const std::string text = "filler #intensity=0.3#";
    const auto pos = backend->hidden_state(EmbedRequest{"P " + text, PromptRole::positive, text});
    const auto neg = backend->hidden_state(EmbedRequest{"N " + text, PromptRole::negative, text});
    const double kappa = backend->separation_gain(text);
    CHECK(kappa >= 0.5);
    CHECK(kappa <= 1.5);
    for (std::size_t k = 0; k < u.size(); ++k)
      CHECK(std::abs((pos.values[k] - neg.values[k]) - 2.0 * kappa * u[k]) < 1e-12);
  }

  TEST_CASE("unified state carries the intensity along the direction") {
    auto backend = testing::synthetic(0.0);
    const auto& u = backend->planted_direction();
    const auto h = backend->hidden_state(EmbedRequest{"x #intensity=0.7#", PromptRole::unified, ""});
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(std::abs(h.values[k] - 0.7 * u[k]) < 1e-12);
  }

  TEST_CASE("noise has the configured scale and is deterministic") {
    auto backend = testing::synthetic(0.1, 4096);
    const auto g = backend->noise("prompt text");
    double norm2 = 0.0;
    for (double x : g) norm2 += x * x;
    CHECK(std::sqrt(norm2) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(backend->noise("prompt text") == g);
    CHECK(backend->noise("prompt text!") != g);
  }

  TEST_CASE("marker parsing and score rule") {
    CHECK(planted_intensity("a #intensity=0.25# b") == 0.25);
    CHECK_FALSE(planted_intensity("no marker").has_value());
    CHECK(SyntheticBackend::planted_score(0.8) == 80);
    CHECK(SyntheticBackend::planted_score(1.7) == 100);
    CHECK(SyntheticBackend::planted_score(-0.2) == 0);
  }

  TEST_CASE("generate returns the planted score deterministically") {
    auto p = testing::provider(testing::synthetic());
    GenerationParams g;
    g.temperature = 0.0;
    const auto a = p->generate("Score this: #intensity=0.8#", g);
    CHECK(a == "80");
    CHECK(p->generate("Score this: #intensity=0.8#", g) == a);
  }

  TEST_CASE("over-budget prompts are rejected") {
    SyntheticOptions o;
    o.max_tokens = 10;
    ProviderOptions po;
    po.chunk_limit = 5;
    Provider p(std::make_shared<SyntheticBackend>(o), po);
    CHECK_THROWS_AS(p.generate(words(20), GenerationParams{}), DataError);
  }

  TEST_CASE("corpus generator is reproducible and consistent") {
    SyntheticCorpusOptions o;
    o.records = 50;
    const auto a = make_synthetic_corpus(o);
    const auto b = make_synthetic_corpus(o);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.records[i] == b.records[i]);
      const auto alpha = planted_intensity(a.records[i].text);
      REQUIRE(alpha.has_value());
      CHECK(*alpha >= 0.0);
      CHECK(*alpha <= 1.0);
      CHECK(a.records[i].covariates.at("Intensity") == *alpha);
    }
  }

  TEST_CASE("options validate") {
    SyntheticOptions o;
    o.hidden_dim = 0;
    CHECK_THROWS_AS(SyntheticBackend{o}, ConfigError);
    o = {};
    o.separation_jitter = 1.0;
    CHECK_THROWS_AS(SyntheticBackend{o}, ConfigError);
    o = {};
    o.hidden_dim = 12;
    CHECK(SyntheticOptions::from_json(o.to_json()).hidden_dim == 12);
  }
}

TEST_SUITE("http") {
  TEST_CASE("wire round trip matches the in-process backend") {
    auto backend = testing::synthetic();
    WireServer server(backend);
    server.start();
    HttpBackendOptions ho;
    ho.endpoint = server.endpoint();
    ho.initial_backoff = std::chrono::milliseconds(1);
    auto http = std::make_shared<HttpBackend>(ho);
    const auto info = http->info();
    CHECK(info.hidden_dim == 64);
    CHECK(info.model_id == backend->info().model_id);

    const std::string prompt = "Is it intense? #intensity=0.5#";
    const auto remote = http->hidden_state(EmbedRequest{prompt, PromptRole::unified, ""});
    const auto local = backend->hidden_state(EmbedRequest{prompt, PromptRole::unified, ""});
    CHECK(remote.values == local.values);
    CHECK(http->count_tokens("a b c") == 3);
    CHECK(http->chunk(words(2500), 1000).size() == 3);
    CHECK(http->generate("x #intensity=0.8#", GenerationParams{}) == "80");
  }

  TEST_CASE("transient failures are retried") {
    WireServer server(testing::synthetic());
    server.start();
    HttpBackendOptions ho;
    ho.endpoint = server.endpoint();
    ho.initial_backoff = std::chrono::milliseconds(1);
    HttpBackend http(ho);
    server.inject_failures(2);
    CHECK(http.count_tokens("a b") == 2);
    server.inject_failures(5);
    CHECK_THROWS_AS(http.count_tokens("a b"), ProviderError);
  }

  TEST_CASE("over-length text maps to a data error") {
    SyntheticOptions o;
    o.max_tokens = 5;
    WireServer server(std::make_shared<SyntheticBackend>(o));
    server.start();
    HttpBackendOptions ho;
    ho.endpoint = server.endpoint();
    ho.initial_backoff = std::chrono::milliseconds(1);
    HttpBackend http(ho);
    try {
      http.hidden_state(EmbedRequest{words(10), PromptRole::unified, ""});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
    }
  }

  TEST_CASE("unreachable service is a provider error") {
    HttpBackendOptions ho;
    ho.endpoint = "http://127.0.0.1:1";
    ho.max_attempts = 2;
    ho.initial_backoff = std::chrono::milliseconds(1);
    ho.timeout = std::chrono::seconds(2);
    HttpBackend http(ho);
    CHECK_THROWS_AS(http.info(), ProviderError);
  }

  TEST_CASE("conformance suite passes against the synthetic server") {
    WireServer server(testing::synthetic());
    server.start();
    const auto checks = run_conformance(server.endpoint());
    CHECK(checks.size() >= 10);
    for (const auto& c : checks) {
      CAPTURE(c.name);
      CAPTURE(c.detail);
      CHECK(c.passed);
    }
  }
}
