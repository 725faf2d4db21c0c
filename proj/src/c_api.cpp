#include "conceptprobe/conceptprobe.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "conceptprobe/baselines.hpp"
#include "conceptprobe/commands.hpp"
#include "conceptprobe/error.hpp"
#include "conceptprobe/http_backend.hpp"
#include "conceptprobe/measure.hpp"
#include "conceptprobe/probe.hpp"
#include "conceptprobe/synthetic.hpp"
#include "conceptprobe/wire_server.hpp"

struct cp_dataset {
  cprobe::Dataset ds;
};
struct cp_concept {
  cprobe::ConceptSpec spec;
};
struct cp_provider {
  std::unique_ptr<cprobe::Provider> p;
};
struct cp_probe {
  cprobe::ProbeResult r;
};
struct cp_server {
  std::unique_ptr<cprobe::WireServer> s;
  int port = 0;
};

namespace {

thread_local std::string g_last_error;

void ensure_logger() {
  static const bool once = [] {
    auto logger = std::make_shared<spdlog::logger>(
        "conceptprobe", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)once;
}

cp_status status_for(cprobe::ErrorKind k) {
  switch (k) {
    case cprobe::ErrorKind::usage: return CP_ERR_USAGE;
    case cprobe::ErrorKind::config: return CP_ERR_CONFIG;
    case cprobe::ErrorKind::provider: return CP_ERR_PROVIDER;
    case cprobe::ErrorKind::data: return CP_ERR_DATA;
    case cprobe::ErrorKind::io: return CP_ERR_IO;
    case cprobe::ErrorKind::numeric: return CP_ERR_NUMERIC;
  }
  return CP_ERR_INTERNAL;
}

template <typename F>
cp_status guard(F&& f) {
  ensure_logger();
  g_last_error.clear();
  try {
    f();
    return CP_OK;
  } catch (const cprobe::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return CP_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CP_ERR_INTERNAL;
  }
}

template <typename T>
void need(const T* p, const char* what) {
  if (!p) throw cprobe::UsageError(std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string str_or(const char* s, const std::string& fallback = {}) { return s ? s : fallback; }

cprobe::SyntheticOptions to_options(const cp_synthetic_options* o) {
  cprobe::SyntheticOptions s;
  if (!o) return s;
  s.hidden_dim = o->hidden_dim;
  s.max_tokens = o->max_tokens;
  s.sigma = o->sigma;
  s.beta0 = o->beta0;
  s.separation_jitter = o->separation_jitter;
  s.seed = o->seed;
  s.distractor_words = o->distractor_words != 0;
  return s;
}

cprobe::RunOverrides to_overrides(const cp_run_options* o) {
  cprobe::RunOverrides r;
  r.probe_path = str_or(o->probe_path);
  r.output_dir = str_or(o->output_dir);
  r.cache_dir = str_or(o->cache_dir);
  if (o->provider) {
    const std::string p = o->provider;
    if (p == "synthetic") r.provider = cprobe::ProviderKind::synthetic;
    else if (p == "http") r.provider = cprobe::ProviderKind::http;
    else throw cprobe::UsageError("provider must be synthetic or http, got '" + p + "'");
  }
  r.endpoint = str_or(o->endpoint);
  for (std::size_t i = 0; i < o->n_measures; ++i) {
    const std::string m = o->measures[i];
    const auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == m.size())
      throw cprobe::UsageError("measure binding '" + m + "' must look like name=path");
    r.measures.emplace_back(m.substr(0, eq), m.substr(eq + 1));
  }
  for (std::size_t i = 0; i < o->n_variants; ++i) r.variant_labels.emplace_back(o->variants[i]);
  r.method = str_or(o->method, "llm_measure");
  r.baseline_kind = str_or(o->baseline_kind);
  r.input_path = str_or(o->input_path);
  r.output_path = str_or(o->output_path);
  if (o->probe_n > 0) r.probe_n = o->probe_n;
  if (o->has_seed) r.seed = o->seed;
  return r;
}

using Command = cprobe::RunSummary (*)(const cprobe::RunConfig&, const cprobe::RunOverrides&);

cp_status run_command(Command cmd, const cp_run_options* opts, cp_run_summary* out) {
  return guard([&] {
    need(opts, "options");
    need(out, "summary");
    *out = cp_run_summary{};
    if (!opts->config_path) throw cprobe::UsageError("a config path is required");
    const auto config = cprobe::RunConfig::load(opts->config_path);
    const auto s = cmd(config, to_overrides(opts));
    out->backend_calls = s.backend_calls;
    out->cache_hits = s.cache_hits;
    out->cache_misses = s.cache_misses;
    out->message = dup(s.message);
    out->n_outputs = s.outputs.size();
    out->outputs = static_cast<char**>(std::calloc(s.outputs.size() + 1, sizeof(char*)));
    for (std::size_t i = 0; i < s.outputs.size(); ++i) out->outputs[i] = dup(s.outputs[i].string());
  });
}

}  // namespace

extern "C" {

const char* cp_version(void) { return "0.3.0"; }

const char* cp_status_name(cp_status status) {
  switch (status) {
    case CP_OK: return "ok";
    case CP_ERR_INTERNAL: return "internal";
    case CP_ERR_USAGE: return "usage";
    case CP_ERR_CONFIG: return "config";
    case CP_ERR_PROVIDER: return "provider";
    case CP_ERR_DATA: return "data";
    case CP_ERR_IO: return "io";
    case CP_ERR_NUMERIC: return "numeric";
  }
  return "unknown";
}

const char* cp_last_error(void) { return g_last_error.c_str(); }

void cp_string_free(char* s) { std::free(s); }

cp_status cp_set_log_level(const char* level) {
  return guard([&] {
    need(level, "level");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && std::string(level) != "off")
      throw cprobe::UsageError("unknown log level '" + std::string(level) + "'");
    spdlog::set_level(lvl);
  });
}

cp_status cp_dataset_load(const char* path, const char* format, cp_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<cp_dataset>();
    h->ds = cprobe::load_dataset(path, cprobe::parse_dataset_format(str_or(format, "jsonl")));
    *out = h.release();
  });
}

cp_status cp_dataset_synthetic(size_t records, uint64_t seed, cp_dataset** out) {
  return guard([&] {
    need(out, "out");
    cprobe::SyntheticCorpusOptions o;
    o.records = records;
    o.seed = seed;
    auto h = std::make_unique<cp_dataset>();
    h->ds = cprobe::make_synthetic_corpus(o);
    *out = h.release();
  });
}

cp_status cp_dataset_save_jsonl(const cp_dataset* ds, const char* path) {
  return guard([&] {
    need(ds, "dataset");
    need(path, "path");
    cprobe::save_dataset_jsonl(ds->ds, path);
  });
}

size_t cp_dataset_size(const cp_dataset* ds) { return ds ? ds->ds.size() : 0; }

cp_status cp_dataset_record_id(const cp_dataset* ds, size_t index, char** out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    if (index >= ds->ds.size()) throw cprobe::UsageError("record index out of range");
    *out = dup(ds->ds.records[index].id);
  });
}

void cp_dataset_free(cp_dataset* ds) { delete ds; }

cp_status cp_concept_load(const char* path, const char* variant, cp_concept** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    const auto set = cprobe::load_concept_file(path);
    auto h = std::make_unique<cp_concept>();
    h->spec = set.get(str_or(variant, set.base_label));
    *out = h.release();
  });
}

cp_status cp_concept_render(const cp_concept* c, const char* role, const char* input, char** out) {
  return guard([&] {
    need(c, "concept");
    need(role, "role");
    need(input, "input");
    need(out, "out");
    *out = dup(cprobe::render(c->spec, cprobe::parse_prompt_role(role), input));
  });
}

void cp_concept_free(cp_concept* c) { delete c; }

void cp_synthetic_options_init(cp_synthetic_options* opts) {
  if (!opts) return;
  const cprobe::SyntheticOptions d;
  opts->hidden_dim = d.hidden_dim;
  opts->max_tokens = d.max_tokens;
  opts->sigma = d.sigma;
  opts->beta0 = d.beta0;
  opts->separation_jitter = d.separation_jitter;
  opts->seed = d.seed;
  opts->distractor_words = d.distractor_words ? 1 : 0;
  opts->chunk_limit = 1000;
  opts->max_concurrency = 4;
}

cp_status cp_provider_synthetic(const cp_synthetic_options* opts, const char* cache_dir,
                                cp_provider** out) {
  return guard([&] {
    need(out, "out");
    cp_synthetic_options defaults;
    cp_synthetic_options_init(&defaults);
    if (!opts) opts = &defaults;
    cprobe::ProviderOptions po;
    po.chunk_limit = opts->chunk_limit;
    po.max_concurrency = opts->max_concurrency;
    if (cache_dir) po.cache = std::make_shared<cprobe::ContentCache>(cache_dir);
    auto h = std::make_unique<cp_provider>();
    h->p = std::make_unique<cprobe::Provider>(
        std::make_shared<cprobe::SyntheticBackend>(to_options(opts)), po);
    *out = h.release();
  });
}

cp_status cp_provider_http(const char* endpoint, int64_t chunk_limit, int max_concurrency,
                           const char* cache_dir, cp_provider** out) {
  return guard([&] {
    need(endpoint, "endpoint");
    need(out, "out");
    cprobe::HttpBackendOptions ho;
    ho.endpoint = endpoint;
    cprobe::ProviderOptions po;
    po.chunk_limit = chunk_limit;
    po.max_concurrency = max_concurrency;
    if (cache_dir) po.cache = std::make_shared<cprobe::ContentCache>(cache_dir);
    auto h = std::make_unique<cp_provider>();
    h->p = std::make_unique<cprobe::Provider>(std::make_shared<cprobe::HttpBackend>(ho), po);
    *out = h.release();
  });
}

int64_t cp_provider_hidden_dim(const cp_provider* p) { return p ? p->p->info().hidden_dim : 0; }

size_t cp_provider_backend_calls(const cp_provider* p) { return p ? p->p->backend_calls() : 0; }

cp_status cp_provider_hidden_state(cp_provider* p, const cp_concept* c, const char* role,
                                   const char* text, double* out, size_t len) {
  return guard([&] {
    need(p, "provider");
    need(c, "concept");
    need(role, "role");
    need(text, "text");
    need(out, "out");
    const auto h = p->p->hidden_state(c->spec, cprobe::parse_prompt_role(role), text);
    if (len != h.dim()) throw cprobe::UsageError("output length must equal the hidden dimension");
    std::copy(h.values.begin(), h.values.end(), out);
  });
}

void cp_provider_free(cp_provider* p) { delete p; }

cp_status cp_probe_fit(const cp_concept* c, const cp_dataset* ds, cp_provider* p, size_t n,
                       uint64_t seed, cp_probe** out) {
  return guard([&] {
    need(c, "concept");
    need(ds, "dataset");
    need(p, "provider");
    need(out, "out");
    const auto probes = cprobe::sample_probing_set(ds->ds, n, seed);
    auto h = std::make_unique<cp_probe>();
    h->r = cprobe::run_probe(c->spec, probes, *p->p, seed);
    *out = h.release();
  });
}

cp_status cp_probe_load(const char* path, cp_probe** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<cp_probe>();
    h->r = cprobe::load_probe(path);
    *out = h.release();
  });
}

cp_status cp_probe_save(const cp_probe* probe, const char* path) {
  return guard([&] {
    need(probe, "probe");
    need(path, "path");
    cprobe::save_probe(probe->r, path);
  });
}

size_t cp_probe_dim(const cp_probe* probe) { return probe ? probe->r.dim() : 0; }

int cp_probe_orientation(const cp_probe* probe) { return probe ? probe->r.orientation_sign : 0; }

cp_status cp_probe_concept(const cp_probe* probe, double* out, size_t len) {
  return guard([&] {
    need(probe, "probe");
    need(out, "out");
    if (len != probe->r.dim()) throw cprobe::UsageError("output length must equal the probe dimension");
    std::copy(probe->r.concept_vector.data(), probe->r.concept_vector.data() + len, out);
  });
}

size_t cp_probe_explained_ratios(const cp_probe* probe, double* out, size_t cap) {
  if (!probe) return 0;
  const auto& r = probe->r.explained_ratios;
  for (std::size_t i = 0; out && i < cap && i < r.size(); ++i) out[i] = r[i];
  return r.size();
}

void cp_probe_free(cp_probe* probe) { delete probe; }

cp_status cp_measure(const cp_probe* probe, const cp_concept* c, const cp_dataset* ds,
                     cp_provider* p, double* raw_out, double* z_out, size_t len) {
  return guard([&] {
    need(probe, "probe");
    need(c, "concept");
    need(ds, "dataset");
    need(p, "provider");
    need(raw_out, "raw_out");
    if (len != ds->ds.size()) throw cprobe::UsageError("output length must equal the dataset size");
    const auto rows = cprobe::measure_corpus(probe->r, c->spec, ds->ds, *p->p, z_out != nullptr);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      raw_out[i] = rows[i].raw_projection;
      if (z_out) z_out[i] = *rows[i].z_measure;
    }
  });
}

cp_status cp_prompting_scores(const cp_concept* c, const cp_dataset* ds, cp_provider* p,
                              double temperature, double* out, size_t len) {
  return guard([&] {
    need(c, "concept");
    need(ds, "dataset");
    need(p, "provider");
    need(out, "out");
    if (len != ds->ds.size()) throw cprobe::UsageError("output length must equal the dataset size");
    cprobe::GenerationParams params;
    params.temperature = temperature;
    for (std::size_t i = 0; i < len; ++i)
      out[i] = cprobe::prompting_score(c->spec, ds->ds.records[i], *p->p, params).score;
  });
}

cp_status cp_pearson_r(const double* x, const double* y, size_t n, double* out) {
  return guard([&] {
    need(x, "x");
    need(y, "y");
    need(out, "out");
    *out = cprobe::pearson_r({x, n}, {y, n});
  });
}

cp_status cp_spearman_rho(const double* x, const double* y, size_t n, double* out) {
  return guard([&] {
    need(x, "x");
    need(y, "y");
    need(out, "out");
    *out = cprobe::spearman_rho({x, n}, {y, n});
  });
}

cp_status cp_pca_first_component(const double* rows, size_t n, size_t d, double* component,
                                 double* ratios, size_t k, size_t* n_ratios) {
  return guard([&] {
    need(rows, "rows");
    need(component, "component");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const cprobe::Matrix m = Eigen::Map<const RowMajor>(rows, static_cast<Eigen::Index>(n),
                                                        static_cast<Eigen::Index>(d));
    const auto r = cprobe::pca_first_component(m, k);
    std::copy(r.component.data(), r.component.data() + d, component);
    if (ratios)
      for (std::size_t i = 0; i < r.explained_ratios.size(); ++i) ratios[i] = r.explained_ratios[i];
    if (n_ratios) *n_ratios = r.explained_ratios.size();
  });
}

cp_status cp_ols(const double* y, const double* X, size_t n, size_t p, double* coef,
                 double* std_err, double* t_stat, double* r_squared) {
  return guard([&] {
    need(y, "y");
    need(X, "X");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const cprobe::Matrix m = Eigen::Map<const RowMajor>(X, static_cast<Eigen::Index>(n),
                                                        static_cast<Eigen::Index>(p));
    const cprobe::Vector v = Eigen::Map<const cprobe::Vector>(y, static_cast<Eigen::Index>(n));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < p; ++i) names.push_back("x" + std::to_string(i));
    const auto r = cprobe::ols_fit(v, m, names);
    for (std::size_t i = 0; i < p; ++i) {
      if (coef) coef[i] = r.coefficients[i];
      if (std_err) std_err[i] = r.std_errors[i];
      if (t_stat) t_stat[i] = r.t_stats[i];
    }
    if (r_squared) *r_squared = r.r_squared;
  });
}

cp_status cp_information_overload(const double* probs, size_t j, double* out) {
  return guard([&] {
    need(probs, "probs");
    need(out, "out");
    *out = cprobe::information_overload({std::vector<double>(probs, probs + j)});
  });
}

cp_status cp_stance_ratio(int64_t hawkish, int64_t dovish, int64_t total, double* out) {
  return guard([&] {
    need(out, "out");
    *out = cprobe::stance_ratio({hawkish, dovish, total});
  });
}

void cp_run_options_init(cp_run_options* opts) {
  if (opts) *opts = cp_run_options{};
}

void cp_run_summary_clear(cp_run_summary* s) {
  if (!s) return;
  std::free(s->message);
  if (s->outputs)
    for (std::size_t i = 0; i < s->n_outputs; ++i) std::free(s->outputs[i]);
  std::free(s->outputs);
  *s = cp_run_summary{};
}

cp_status cp_cmd_probe(const cp_run_options* o, cp_run_summary* s) {
  return run_command(&cprobe::cmd_probe, o, s);
}
cp_status cp_cmd_measure(const cp_run_options* o, cp_run_summary* s) {
  return run_command(&cprobe::cmd_measure, o, s);
}
cp_status cp_cmd_baseline(const cp_run_options* o, cp_run_summary* s) {
  return run_command(&cprobe::cmd_baseline, o, s);
}
cp_status cp_cmd_validate(const cp_run_options* o, cp_run_summary* s) {
  return run_command(&cprobe::cmd_validate, o, s);
}
cp_status cp_cmd_sensitivity(const cp_run_options* o, cp_run_summary* s) {
  return run_command(&cprobe::cmd_sensitivity, o, s);
}
cp_status cp_cmd_stability(const cp_run_options* o, cp_run_summary* s) {
  return run_command(&cprobe::cmd_stability, o, s);
}

cp_status cp_conformance(const char* endpoint, char** report, int* all_passed) {
  return guard([&] {
    need(report, "report");
    need(all_passed, "all_passed");
    std::unique_ptr<cprobe::WireServer> local;
    std::string target = str_or(endpoint);
    if (target.empty()) {
      local = std::make_unique<cprobe::WireServer>(std::make_shared<cprobe::SyntheticBackend>());
      local->start();
      target = local->endpoint();
    }
    const auto checks = cprobe::run_conformance(target);
    std::string text;
    bool ok = true;
    for (const auto& c : checks) {
      text += std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
      ok = ok && c.passed;
    }
    *report = dup(text);
    *all_passed = ok ? 1 : 0;
  });
}

cp_status cp_server_start_synthetic(const cp_synthetic_options* opts, int port, cp_server** out) {
  return guard([&] {
    need(out, "out");
    auto h = std::make_unique<cp_server>();
    h->s = std::make_unique<cprobe::WireServer>(std::make_shared<cprobe::SyntheticBackend>(to_options(opts)));
    h->port = h->s->start(port);
    *out = h.release();
  });
}

int cp_server_port(const cp_server* s) { return s ? s->port : 0; }

void cp_server_inject_failures(cp_server* s, int n) {
  if (s) s->s->inject_failures(n);
}

void cp_server_free(cp_server* s) { delete s; }

}  // extern "C"
