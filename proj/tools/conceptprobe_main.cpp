// conceptprobe command-line tool. Talks to the library only through the C API.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "conceptprobe/conceptprobe.h"

namespace {

struct CommandArgs {
  std::string config;
  std::string provider;
  std::string endpoint;
  std::string cache_dir;
  std::string out_dir;
  std::string probe;
  std::string input;
  std::string output;
  std::string method = "llm_measure";
  std::string kind;
  std::vector<std::string> measures;
  std::vector<std::string> variants;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int report_failure(cp_status st) {
  std::fprintf(stderr, "error (%s): %s\n", cp_status_name(st), cp_last_error());
  return static_cast<int>(st);
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure concepts in text by probing language model hidden states."};
  app.set_version_flag("--version", std::string(cp_version()));
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str();

  CommandArgs a;
  std::vector<const char*> measure_ptrs, variant_ptrs;
  cp_status (*command)(const cp_run_options*, cp_run_summary*) = nullptr;

  auto add_common = [&](CLI::App* sub, cp_status (*fn)(const cp_run_options*, cp_run_summary*)) {
    sub->add_option("--config", a.config, "run config (JSON)")->required();
    sub->add_option("--provider", a.provider, "override the provider kind")
        ->check(CLI::IsMember({"synthetic", "http"}));
    sub->add_option("--endpoint", a.endpoint, "inference service URL for --provider http");
    sub->add_option("--cache-dir", a.cache_dir,
                    "content cache directory (also CONCEPTPROBE_CACHE_DIR)");
    sub->add_option("--out", a.out_dir, "output directory");
    sub->callback([&, fn] { command = fn; });
    return sub;
  };

  auto* probe = add_common(app.add_subcommand("probe", "fit a concept vector on a probing set"), cp_cmd_probe);
  probe->add_option("--probe", a.probe, "where to write the probe file");
  probe->add_option("--input", a.input, "dataset to probe instead of the configured one");
  probe->add_option("-n,--n", a.n, "probing-set size");
  probe->add_option("--seed", a.seed, "probing-set seed");

  auto* measure = add_common(app.add_subcommand("measure", "score every record with a fitted probe"), cp_cmd_measure);
  measure->add_option("--probe", a.probe, "probe file");
  measure->add_option("--input", a.input, "dataset to measure instead of the configured one");
  measure->add_option("--output", a.output, "measures CSV path");

  auto* baseline = add_common(app.add_subcommand("baseline", "compute a comparison measure"), cp_cmd_baseline);
  baseline->add_option("--kind", a.kind, "prompting, entropy or stance")
      ->required()
      ->check(CLI::IsMember({"prompting", "entropy", "stance"}));
  baseline->add_option("--input", a.input, "topic or label-count CSV (entropy, stance) or dataset");
  baseline->add_option("--output", a.output, "output CSV path");

  auto* validate = add_common(app.add_subcommand("validate", "run the configured regressions"), cp_cmd_validate);
  validate->add_option("--measure", a.measures, "bind a study measure: name=path.csv");

  auto* sensitivity = add_common(app.add_subcommand("sensitivity", "compare prompt variants"), cp_cmd_sensitivity);
  sensitivity->add_option("--variant", a.variants, "variant label (default: all)");
  sensitivity->add_option("--method", a.method, "llm_measure or prompting")
      ->check(CLI::IsMember({"llm_measure", "prompting"}))
      ->capture_default_str();
  sensitivity->add_option("--input", a.input, "dataset instead of the configured one");
  sensitivity->add_option("-n,--n", a.n, "probing-set size");
  sensitivity->add_option("--seed", a.seed, "probing-set seed");

  auto* stability = add_common(app.add_subcommand("stability", "probe-size stability check"), cp_cmd_stability);
  stability->add_option("--input", a.input, "dataset instead of the configured one");
  stability->add_option("--seed", a.seed, "probing-set seed");

  std::string conf_endpoint;
  auto* conformance = app.add_subcommand("conformance", "check an inference service against the wire protocol");
  conformance->add_option("--endpoint", conf_endpoint, "service URL (default: in-process synthetic server)");

  std::size_t synth_records = 200;
  std::uint64_t synth_seed = 11;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-corpus", "write a synthetic corpus with planted intensities");
  synth->add_option("--records", synth_records)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out, "output JSONL path")->required();

  cp_synthetic_options serve_opts;
  cp_synthetic_options_init(&serve_opts);
  int serve_port = 8000;
  auto* serve = app.add_subcommand("serve-synthetic", "serve the synthetic backend over HTTP");
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--dim", serve_opts.hidden_dim)->capture_default_str();
  serve->add_option("--sigma", serve_opts.sigma)->capture_default_str();
  serve->add_option("--seed", serve_opts.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(CP_ERR_USAGE);
  }

  if (auto st = cp_set_log_level(log_level.c_str()); st != CP_OK) return report_failure(st);

  if (command) {
    cp_run_options o;
    cp_run_options_init(&o);
    o.config_path = a.config.c_str();
    o.provider = opt(a.provider);
    o.endpoint = opt(a.endpoint);
    o.cache_dir = opt(a.cache_dir);
    o.output_dir = opt(a.out_dir);
    o.probe_path = opt(a.probe);
    o.input_path = opt(a.input);
    o.output_path = opt(a.output);
    o.method = opt(a.method);
    o.baseline_kind = opt(a.kind);
    for (const auto& m : a.measures) measure_ptrs.push_back(m.c_str());
    for (const auto& v : a.variants) variant_ptrs.push_back(v.c_str());
    o.measures = measure_ptrs.data();
    o.n_measures = measure_ptrs.size();
    o.variants = variant_ptrs.data();
    o.n_variants = variant_ptrs.size();
    o.probe_n = a.n;
    for (auto* sub : app.get_subcommands())
      if (auto* seed_opt = sub->get_option_no_throw("--seed"); seed_opt && seed_opt->count() > 0)
        o.has_seed = 1;
    o.seed = a.seed;

    cp_run_summary s{};
    const auto st = command(&o, &s);
    if (st != CP_OK) return report_failure(st);
    std::printf("%s\n", s.message);
    std::printf("backend calls: %zu, cache hits: %zu, cache misses: %zu\n", s.backend_calls,
                s.cache_hits, s.cache_misses);
    cp_run_summary_clear(&s);
    return 0;
  }

  if (conformance->parsed()) {
    char* report = nullptr;
    int ok = 0;
    const auto st = cp_conformance(opt(conf_endpoint), &report, &ok);
    if (st != CP_OK) return report_failure(st);
    std::fputs(report, stdout);
    cp_string_free(report);
    return ok ? 0 : static_cast<int>(CP_ERR_PROVIDER);
  }

  if (synth->parsed()) {
    cp_dataset* ds = nullptr;
    auto st = cp_dataset_synthetic(synth_records, synth_seed, &ds);
    if (st == CP_OK) st = cp_dataset_save_jsonl(ds, synth_out.c_str());
    cp_dataset_free(ds);
    if (st != CP_OK) return report_failure(st);
    std::printf("wrote %zu records to %s\n", synth_records, synth_out.c_str());
    return 0;
  }

  if (serve->parsed()) {
    cp_server* srv = nullptr;
    if (auto st = cp_server_start_synthetic(&serve_opts, serve_port, &srv); st != CP_OK)
      return report_failure(st);
    std::printf("serving on http://127.0.0.1:%d\n", cp_server_port(srv));
    std::fflush(stdout);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    cp_server_free(srv);
    return 0;
  }
  return 0;
}
