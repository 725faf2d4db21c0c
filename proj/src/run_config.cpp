#include "conceptprobe/run_config.hpp"

#include <set>

#include "conceptprobe/error.hpp"
#include "conceptprobe/hashing.hpp"

namespace cprobe {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void require_exists(const std::filesystem::path& p, const std::string& what) {
  if (!p.empty() && !std::filesystem::exists(p))
    throw ConfigError(what + " not found: " + p.string());
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
  const auto bytes = read_file_bytes(path.string());
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  auto cfg = from_json(j, base);
  cfg.source = path;
  cfg.config_digest = sha256(bytes).hex();
  return cfg;
}

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"name", "dataset", "concept", "provider", "probe", "measure", "generation",
                  "studies", "stability", "output_dir", "cache_dir"},
                 "config");
  RunConfig c;
  c.config_digest = sha256(j.dump()).hex();
  try {
    c.name = j.value("name", "run");
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      reject_unknown(d, {"path", "format", "mapping"}, "dataset");
      c.dataset_path = resolve(base_dir, d.value("path", ""));
      c.dataset_format = parse_dataset_format(d.value("format", "jsonl"));
      if (d.contains("mapping")) c.mapping = ColumnMapping::from_json(d["mapping"]);
    }
    if (j.contains("concept")) {
      const auto& cc = j["concept"];
      reject_unknown(cc, {"path", "variant"}, "concept");
      c.concept_path = resolve(base_dir, cc.value("path", ""));
      c.concept_variant = cc.value("variant", c.concept_variant);
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      reject_unknown(p, {"kind", "endpoint", "max_concurrency", "chunk_limit", "synthetic"}, "provider");
      const auto kind = p.value("kind", "synthetic");
      if (kind == "synthetic") c.provider.kind = ProviderKind::synthetic;
      else if (kind == "http") c.provider.kind = ProviderKind::http;
      else throw ConfigError("provider.kind must be synthetic or http, got '" + kind + "'");
      c.provider.endpoint = p.value("endpoint", "");
      c.provider.max_concurrency = p.value("max_concurrency", c.provider.max_concurrency);
      c.provider.chunk_limit = p.value("chunk_limit", c.provider.chunk_limit);
      if (p.contains("synthetic")) c.provider.synthetic = SyntheticOptions::from_json(p["synthetic"]);
    }
    if (j.contains("probe")) {
      const auto& p = j["probe"];
      reject_unknown(p, {"n", "seed"}, "probe");
      c.probe_n = p.value("n", c.probe_n);
      c.probe_seed = p.value("seed", c.probe_seed);
    }
    if (j.contains("measure")) {
      reject_unknown(j["measure"], {"standardize"}, "measure");
      c.standardize_output = j["measure"].value("standardize", c.standardize_output);
    }
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      reject_unknown(g, {"temperature", "max_new_tokens", "seed", "max_attempts"}, "generation");
      c.generation.temperature = g.value("temperature", c.generation.temperature);
      c.generation.max_new_tokens = g.value("max_new_tokens", c.generation.max_new_tokens);
      if (g.contains("seed") && !g["seed"].is_null()) c.generation.seed = g["seed"].get<std::uint64_t>();
      c.max_attempts = g.value("max_attempts", c.max_attempts);
    }
    if (j.contains("studies"))
      for (const auto& s : j["studies"]) c.studies.push_back(StudySpec::from_json(s, base_dir));
    if (j.contains("stability")) {
      const auto& s = j["stability"];
      reject_unknown(s, {"sizes"}, "stability");
      const auto sizes = s.value("sizes", std::vector<std::size_t>{64, 128});
      if (sizes.size() != 2) throw ConfigError("stability.sizes must hold two sizes");
      c.stability_first = sizes[0];
      c.stability_second = sizes[1];
    }
    c.output_dir = resolve(base_dir, j.value("output_dir", "out"));
    c.cache_dir = resolve(base_dir, j.value("cache_dir", ""));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.provider.kind == ProviderKind::http && c.provider.endpoint.empty())
    throw ConfigError("provider.endpoint is required for the http provider");
  if (c.provider.max_concurrency < 1) throw ConfigError("provider.max_concurrency must be at least 1");
  if (c.provider.chunk_limit < 1) throw ConfigError("provider.chunk_limit must be at least 1");
  if (c.probe_n < 2) throw ConfigError("probe.n must be at least 2");
  if (c.max_attempts < 1) throw ConfigError("generation.max_attempts must be at least 1");
  require_exists(c.dataset_path, "dataset");
  require_exists(c.concept_path, "concept file");
  for (const auto& s : c.studies) require_exists(s.observations, "observations for study '" + s.name + "'");
  return c;
}

}  // namespace cprobe
