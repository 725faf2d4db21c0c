#include "conceptprobe/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>

#include <json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "conceptprobe/baselines.hpp"
#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"
#include "conceptprobe/hashing.hpp"
#include "conceptprobe/http_backend.hpp"
#include "conceptprobe/measure.hpp"
#include "conceptprobe/probe.hpp"
#include "conceptprobe/synthetic.hpp"
#include "parallel.hpp"

namespace cprobe {

using nlohmann::json;
namespace fs = std::filesystem;

Provider make_provider(const RunConfig& config, const RunOverrides& overrides) {
  const auto kind = overrides.provider.value_or(config.provider.kind);
  std::shared_ptr<Backend> backend;
  if (kind == ProviderKind::synthetic) {
    backend = std::make_shared<SyntheticBackend>(config.provider.synthetic);
  } else {
    HttpBackendOptions opts;
    opts.endpoint = overrides.endpoint.empty() ? config.provider.endpoint : overrides.endpoint;
    if (opts.endpoint.empty()) throw ConfigError("the http provider needs an endpoint");
    backend = std::make_shared<HttpBackend>(opts);
  }
  fs::path cache_dir = overrides.cache_dir;
  if (cache_dir.empty()) {
    if (const char* env = std::getenv(kCacheDirEnv); env && *env) cache_dir = env;
  }
  if (cache_dir.empty()) cache_dir = config.cache_dir;
  ProviderOptions po;
  po.chunk_limit = config.provider.chunk_limit;
  po.max_concurrency = config.provider.max_concurrency;
  if (!cache_dir.empty()) po.cache = std::make_shared<ContentCache>(cache_dir);
  return Provider(std::move(backend), std::move(po));
}

namespace {

fs::path output_dir(const RunConfig& config, const RunOverrides& o) {
  auto dir = o.output_dir.empty() ? config.output_dir : o.output_dir;
  if (dir.empty()) dir = "out";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

Dataset load_run_dataset(const RunConfig& config, const fs::path& override_path = {}) {
  const auto path = override_path.empty() ? config.dataset_path : override_path;
  if (path.empty()) throw ConfigError("config names no dataset");
  if (!fs::exists(path)) throw ConfigError("dataset not found: " + path.string());
  auto format = config.dataset_format;
  if (!override_path.empty()) format = path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl;
  return load_dataset(path, format, config.mapping);
}

PromptVariantSet load_concepts(const RunConfig& config) {
  if (config.concept_path.empty()) throw ConfigError("config names no concept file");
  return load_concept_file(config.concept_path);
}

void fill_stats(RunSummary& s, const Provider& provider) {
  s.backend_calls = provider.backend_calls();
  if (auto* c = provider.cache()) {
    const auto st = c->stats();
    s.cache_hits = st.hits;
    s.cache_misses = st.misses;
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Everything needed to re-execute the command; deliberately free of
// timestamps so identical runs give identical manifests.
void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                    const std::string& model_id, const json& extra, RunSummary& summary) {
  json outputs = json::object();
  for (const auto& p : summary.outputs)
    outputs[p.filename().string()] = sha256(read_file_bytes(p.string())).hex();
  json m{{"command", command},
         {"config", config.source.string()},
         {"config_digest", config.config_digest},
         {"model_id", model_id},
         {"outputs", outputs}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  const auto path = dir / (command + ".manifest.json");
  auto out = open_out(path);
  out << m.dump(2) << '\n';
  summary.outputs.push_back(path);
}

json prompt_digest_json(const ConceptSpec& spec) {
  json j = json::object();
  for (auto role : {PromptRole::positive, PromptRole::negative, PromptRole::unified, PromptRole::scoring})
    if (spec.template_for(role)) j[to_string(role)] = template_digest(spec, role).hex();
  return j;
}

std::map<std::string, double> to_map(const std::vector<MeasureRow>& rows) {
  std::map<std::string, double> m;
  for (const auto& r : rows) m[r.record_id] = r.raw_projection;
  return m;
}

std::vector<ScoreParse> score_all(const ConceptSpec& spec, const Dataset& ds, Provider& provider,
                                  const RunConfig& config) {
  std::vector<ScoreParse> scores(ds.size());
  detail::parallel_for(
      ds.size(), provider.max_concurrency(),
      [&](std::size_t i) {
        scores[i] = prompting_score(spec, ds.records[i], provider, config.generation, config.max_attempts);
      },
      [&](std::size_t i) { return "record " + ds.records[i].id; });
  return scores;
}

}  // namespace

RunSummary cmd_probe(const RunConfig& config, const RunOverrides& o) {
  const auto dataset = load_run_dataset(config, o.input_path);
  const auto concepts = load_concepts(config);
  const auto& spec = concepts.get(config.concept_variant);
  auto provider = make_provider(config, o);
  const auto n = o.probe_n.value_or(config.probe_n);
  const auto seed = o.seed.value_or(config.probe_seed);
  const auto dir = output_dir(config, o);

  const auto probes = sample_probing_set(dataset, n, seed);
  const auto probe = run_probe(spec, probes, provider, seed);
  const auto probe_path = o.probe_path.empty() ? dir / "probe.json" : o.probe_path;
  save_probe(probe, probe_path);

  RunSummary s;
  s.outputs.push_back(probe_path);
  s.outputs.push_back(fs::path(probe_path.string() + ".bin"));

  const auto extremes = probe_extremes(probe, spec, probes, provider, 3);
  const auto ext_path = dir / "extremes.csv";
  {
    auto out = open_out(ext_path);
    out << "side,rank,record_id,projection,text\n";
    auto emit = [&](const char* side, const std::vector<ProjectedText>& v) {
      for (std::size_t i = 0; i < v.size(); ++i)
        out << csv::format_row({side, std::to_string(i + 1), v[i].id,
                                csv::format_double(v[i].projection), v[i].text})
            << '\n';
    };
    emit("top", extremes.top);
    emit("bottom", extremes.bottom);
  }
  s.outputs.push_back(ext_path);
  ReportInputs report;
  report.explained.emplace_back(spec.name, probe.explained_ratios);
  for (const auto& p : emit_report(report, dir)) s.outputs.push_back(p);

  fill_stats(s, provider);
  write_manifest(dir, "probe", config, probe.model_id,
                 json{{"probe_n", n},
                      {"probe_seed", seed},
                      {"concept", spec.name},
                      {"variant", config.concept_variant},
                      {"prompt_digests", prompt_digest_json(spec)}},
                 s);
  s.message = fmt::format("probe: n={}, dim={}, PC1 explains {:.4f}, orientation {:+d}, wrote {}", n,
                          probe.dim(),
                          probe.explained_ratios.empty() ? 0.0 : probe.explained_ratios.front(),
                          probe.orientation_sign, probe_path.string());
  return s;
}

RunSummary cmd_measure(const RunConfig& config, const RunOverrides& o) {
  const auto dir = output_dir(config, o);
  const auto probe_path = o.probe_path.empty() ? dir / "probe.json" : o.probe_path;
  const auto probe = load_probe(probe_path);
  const auto dataset = load_run_dataset(config, o.input_path);
  const auto concepts = load_concepts(config);
  const auto& spec = concepts.get(config.concept_variant);
  auto provider = make_provider(config, o);
  if (auto it = probe.prompt_digests.find("unified");
      it != probe.prompt_digests.end() && it->second != template_digest(spec, PromptRole::unified).hex())
    spdlog::warn("unified prompt differs from the one the probe was fitted with");
  if (!probe.model_id.empty() && probe.model_id != provider.info().model_id)
    spdlog::warn("probe was fitted on model '{}', measuring with '{}'", probe.model_id,
                 provider.info().model_id);

  const auto rows = measure_corpus(probe, spec, dataset, provider, config.standardize_output);
  const auto out_path = o.output_path.empty() ? dir / "measures.csv" : o.output_path;
  write_measures_csv(rows, out_path);

  RunSummary s;
  s.outputs.push_back(out_path);
  fill_stats(s, provider);
  write_manifest(dir, "measure", config, provider.info().model_id,
                 json{{"probe", probe_path.string()},
                      {"probe_seed", probe.seed},
                      {"concept", spec.name},
                      {"variant", config.concept_variant},
                      {"prompt_digests", prompt_digest_json(spec)}},
                 s);
  s.message = fmt::format("measure: {} records, wrote {}", rows.size(), out_path.string());
  return s;
}

RunSummary cmd_baseline(const RunConfig& config, const RunOverrides& o) {
  const auto dir = output_dir(config, o);
  const auto& kind = o.baseline_kind;
  RunSummary s;
  std::string model_id;
  json extra{{"baseline", kind}};

  if (kind == "prompting") {
    const auto dataset = load_run_dataset(config, o.input_path);
    const auto concepts = load_concepts(config);
    const auto& spec = concepts.get(config.concept_variant);
    auto provider = make_provider(config, o);
    const auto scores = score_all(spec, dataset, provider, config);
    const auto path = o.output_path.empty() ? dir / "prompting_scores.csv" : o.output_path;
    auto out = open_out(path);
    out << "record_id,score,attempts,raw_completion\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
      out << csv::format_row({dataset.records[i].id, csv::format_double(scores[i].score),
                              std::to_string(scores[i].attempts), scores[i].raw_completion})
          << '\n';
    out.close();
    s.outputs.push_back(path);
    fill_stats(s, provider);
    model_id = provider.info().model_id;
    extra["prompt_digests"] = prompt_digest_json(spec);
    extra["temperature"] = config.generation.temperature;
    if (config.generation.seed) extra["generation_seed"] = *config.generation.seed;
    s.message = fmt::format("baseline prompting: {} records, wrote {}", scores.size(), path.string());
  } else if (kind == "entropy" || kind == "stance") {
    if (o.input_path.empty()) throw UsageError("baseline " + kind + " needs --input");
    const bool entropy = kind == "entropy";
    const auto path = o.output_path.empty()
                          ? dir / (entropy ? "information_overload.csv" : "stance_ratio.csv")
                          : o.output_path;
    std::vector<std::pair<std::string, double>> values;
    if (entropy) {
      for (const auto& [id, t] : read_topic_csv(o.input_path)) values.emplace_back(id, information_overload(t));
    } else {
      for (const auto& [id, c] : read_label_counts_csv(o.input_path)) values.emplace_back(id, stance_ratio(c));
    }
    auto out = open_out(path);
    out << "record_id," << (entropy ? "information_overload" : "stance_ratio") << '\n';
    for (const auto& [id, v] : values) out << csv::format_row({id, csv::format_double(v)}) << '\n';
    out.close();
    s.outputs.push_back(path);
    extra["input"] = o.input_path.string();
    extra["input_sha256"] = sha256(read_file_bytes(o.input_path.string())).hex();
    s.message = fmt::format("baseline {}: {} records, wrote {}", kind, values.size(), path.string());
  } else {
    throw UsageError("unknown baseline '" + kind + "' (expected prompting, entropy or stance)");
  }
  write_manifest(dir, "baseline_" + kind, config, model_id, extra, s);
  return s;
}

RunSummary cmd_validate(const RunConfig& config, const RunOverrides& o) {
  if (config.studies.empty()) throw UsageError("config defines no studies");
  const auto dir = output_dir(config, o);
  ReportInputs report;
  std::optional<Dataset> dataset;
  auto measured = [&]() -> const Dataset& {
    if (!dataset) dataset = load_run_dataset(config);
    return *dataset;
  };
  std::string message;
  json studies = json::array();
  for (auto study : config.studies) {
    for (const auto& [name, path] : o.measures)
      if (name == study.measure.name || name == study.name) study.measure.path = path;
    const auto values = read_measure_values(study.measure);
    std::optional<Dataset> obs;
    if (!study.observations.empty())
      obs = load_dataset(study.observations,
                         study.observations.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl,
                         config.mapping);
    std::map<std::string, double> measures;
    if (study.measure.aggregation.kind == AggregationKind::none)
      measures = values;
    else
      measures = aggregate_measures(study.measure, values, measured(), obs ? &*obs : nullptr);
    const Dataset& observations = obs ? *obs : measured();
    const auto design = build_design(study, observations, measures);
    for (const auto& [id, why] : design.dropped) spdlog::warn("study {}: dropped {} ({})", study.name, id, why);
    auto result = ols_fit(design.y, design.X, design.terms);
    std::string term;
    for (const auto& r : study.regressors)
      if (r.variable() == study.measure.name) {
        term = r.text();
        break;
      }
    if (term.empty()) term = design.terms.at(1);
    const auto k = result.index_of(term);
    message += fmt::format("{} [{}]: N={} beta={:.3f}{} t={:.3f} R2={:.3f}\n", study.name, study.method,
                           result.n, result.coefficients[k], significance_stars(result.p_values[k]),
                           result.t_stats[k], result.r_squared);
    studies.push_back({{"name", study.name},
                       {"measure", study.measure.path.string()},
                       {"measure_sha256", sha256(read_file_bytes(study.measure.path.string())).hex()},
                       {"dropped", design.dropped.size()}});
    report.studies.push_back({study.name, study.method, term, std::move(result)});
  }
  RunSummary s;
  s.outputs = emit_report(report, dir);
  write_manifest(dir, "validate", config, "", json{{"studies", studies}}, s);
  if (!message.empty()) message.pop_back();
  s.message = message;
  return s;
}

RunSummary cmd_sensitivity(const RunConfig& config, const RunOverrides& o) {
  const auto dataset = load_run_dataset(config, o.input_path);
  const auto concepts = load_concepts(config);
  std::vector<std::string> labels = o.variant_labels;
  if (labels.empty())
    for (const auto& [label, _] : concepts.variants) labels.push_back(label);
  if (labels.empty()) throw UsageError("concept '" + concepts.base.name + "' has no prompt variants");
  for (const auto& l : labels) (void)concepts.get(l);
  const auto method = o.method.empty() ? std::string("llm_measure") : o.method;
  if (method != "llm_measure" && method != "prompting")
    throw UsageError("sensitivity method must be llm_measure or prompting");
  auto provider = make_provider(config, o);
  const auto dir = output_dir(config, o);
  const auto n = o.probe_n.value_or(config.probe_n);
  const auto seed = o.seed.value_or(config.probe_seed);

  ReportInputs report;
  auto measure_variant = [&](const std::string& label) {
    const auto& spec = concepts.get(label);
    if (method == "prompting") {
      const auto scores = score_all(spec, dataset, provider, config);
      MeasureMap m;
      for (std::size_t i = 0; i < scores.size(); ++i) m[dataset.records[i].id] = scores[i].score;
      return m;
    }
    const auto probes = sample_probing_set(dataset, n, seed);
    const auto probe = run_probe(spec, probes, provider, seed);
    report.explained.emplace_back(spec.name + ":" + label, probe.explained_ratios);
    return to_map(measure_corpus(probe, spec, dataset, provider, false));
  };
  const auto base = measure_variant(concepts.base_label);
  std::vector<std::pair<std::string, MeasureMap>> variants;
  for (const auto& l : labels) variants.emplace_back(l, measure_variant(l));
  auto rep = sensitivity_compare(concepts.base.name, base, variants);
  rep.method = method;

  std::string message;
  for (const auto& p : rep.pairs)
    message += fmt::format("{} {} vs {}: r={:.4f} (n={})\n", concepts.base.name, concepts.base_label,
                           p.label, p.pearson_r, p.n);
  report.sensitivity.push_back(std::move(rep));
  RunSummary s;
  s.outputs = emit_report(report, dir);
  fill_stats(s, provider);
  json digests = json::object();
  for (const auto& l : concepts.labels()) digests[l] = prompt_digest_json(concepts.get(l));
  write_manifest(dir, "sensitivity", config, provider.info().model_id,
                 json{{"method", method}, {"probe_n", n}, {"probe_seed", seed}, {"variants", labels},
                      {"prompt_digests", digests}},
                 s);
  if (!message.empty()) message.pop_back();
  s.message = message;
  return s;
}

RunSummary cmd_stability(const RunConfig& config, const RunOverrides& o) {
  const auto dataset = load_run_dataset(config, o.input_path);
  const auto concepts = load_concepts(config);
  const auto& spec = concepts.get(config.concept_variant);
  auto provider = make_provider(config, o);
  const auto dir = output_dir(config, o);
  const auto seed = o.seed.value_or(config.probe_seed);
  const auto res = probe_size_stability(dataset, spec, provider,
                                        {config.stability_first, config.stability_second}, seed);
  RunSummary s;
  const auto path = dir / "stability.csv";
  {
    auto out = open_out(path);
    out << "record_id,measure_n" << res.sizes[0] << ",measure_n" << res.sizes[1] << '\n';
    for (std::size_t i = 0; i < res.ids.size(); ++i)
      out << csv::format_row({res.ids[i], csv::format_double(res.first[i]), csv::format_double(res.second[i])})
          << '\n';
  }
  s.outputs.push_back(path);
  fill_stats(s, provider);
  write_manifest(dir, "stability", config, provider.info().model_id,
                 json{{"sizes", res.sizes},
                      {"probe_seed", seed},
                      {"pearson_r", res.pearson_r},
                      {"prompt_digests", prompt_digest_json(spec)}},
                 s);
  s.message = fmt::format("stability: n={} vs n={}: r={:.6f}", res.sizes[0], res.sizes[1], res.pearson_r);
  return s;
}

}  // namespace cprobe
