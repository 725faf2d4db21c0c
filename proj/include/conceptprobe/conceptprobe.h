/* conceptprobe C API.
 *
 * Every fallible call returns a cp_status. On failure the message is
 * available from cp_last_error() on the same thread until the next call.
 * Handles are opaque; each *_free accepts NULL. Strings returned through
 * char** out-parameters are owned by the caller and released with
 * cp_string_free.
 */
#ifndef CONCEPTPROBE_H
#define CONCEPTPROBE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define CP_API __declspec(dllexport)
#else
#  define CP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cp_status {
  CP_OK = 0,
  CP_ERR_INTERNAL = 1,
  CP_ERR_USAGE = 2,
  CP_ERR_CONFIG = 3,
  CP_ERR_PROVIDER = 4,
  CP_ERR_DATA = 5,
  CP_ERR_IO = 6,
  CP_ERR_NUMERIC = 7
} cp_status;

CP_API const char* cp_version(void);
CP_API const char* cp_status_name(cp_status status);
CP_API const char* cp_last_error(void);
CP_API void cp_string_free(char* s);

/* "trace", "debug", "info", "warn", "error" or "off". Logs go to stderr. */
CP_API cp_status cp_set_log_level(const char* level);

/* ---- datasets ---------------------------------------------------------- */

typedef struct cp_dataset cp_dataset;

/* format: "jsonl" or "csv" (canonical column names). */
CP_API cp_status cp_dataset_load(const char* path, const char* format, cp_dataset** out);
/* Records with planted `#intensity=<x>#` markers, a Size covariate and y. */
CP_API cp_status cp_dataset_synthetic(size_t records, uint64_t seed, cp_dataset** out);
CP_API cp_status cp_dataset_save_jsonl(const cp_dataset* ds, const char* path);
CP_API size_t cp_dataset_size(const cp_dataset* ds);
/* Copies the id of record `index` into a new string. */
CP_API cp_status cp_dataset_record_id(const cp_dataset* ds, size_t index, char** out);
CP_API void cp_dataset_free(cp_dataset* ds);

/* ---- concepts ---------------------------------------------------------- */

typedef struct cp_concept cp_concept;

/* variant NULL selects the file's base variant. */
CP_API cp_status cp_concept_load(const char* path, const char* variant, cp_concept** out);
/* role: "positive", "negative", "unified" or "scoring". */
CP_API cp_status cp_concept_render(const cp_concept* c, const char* role, const char* input,
                                   char** out);
CP_API void cp_concept_free(cp_concept* c);

/* ---- providers --------------------------------------------------------- */

typedef struct cp_provider cp_provider;

typedef struct cp_synthetic_options {
  int64_t hidden_dim;
  int64_t max_tokens;
  double sigma;
  double beta0;
  double separation_jitter;
  uint64_t seed;
  int distractor_words;
  int64_t chunk_limit;
  int max_concurrency;
} cp_synthetic_options;

CP_API void cp_synthetic_options_init(cp_synthetic_options* opts);

/* cache_dir may be NULL (no cache). */
CP_API cp_status cp_provider_synthetic(const cp_synthetic_options* opts, const char* cache_dir,
                                       cp_provider** out);
CP_API cp_status cp_provider_http(const char* endpoint, int64_t chunk_limit, int max_concurrency,
                                  const char* cache_dir, cp_provider** out);
CP_API int64_t cp_provider_hidden_dim(const cp_provider* p);
CP_API size_t cp_provider_backend_calls(const cp_provider* p);
/* Hidden state of the concept prompt for `role` applied to `text`. */
CP_API cp_status cp_provider_hidden_state(cp_provider* p, const cp_concept* c, const char* role,
                                          const char* text, double* out, size_t len);
CP_API void cp_provider_free(cp_provider* p);

/* ---- probes and measures ----------------------------------------------- */

typedef struct cp_probe cp_probe;

CP_API cp_status cp_probe_fit(const cp_concept* c, const cp_dataset* ds, cp_provider* p, size_t n,
                              uint64_t seed, cp_probe** out);
CP_API cp_status cp_probe_load(const char* path, cp_probe** out);
CP_API cp_status cp_probe_save(const cp_probe* probe, const char* path);
CP_API size_t cp_probe_dim(const cp_probe* probe);
CP_API int cp_probe_orientation(const cp_probe* probe);
CP_API cp_status cp_probe_concept(const cp_probe* probe, double* out, size_t len);
/* Writes up to `cap` ratios and returns how many the probe holds. */
CP_API size_t cp_probe_explained_ratios(const cp_probe* probe, double* out, size_t cap);
CP_API void cp_probe_free(cp_probe* probe);

/* One value per dataset record, in order. z_out may be NULL; when given,
 * it receives run-level z-scores. */
CP_API cp_status cp_measure(const cp_probe* probe, const cp_concept* c, const cp_dataset* ds,
                            cp_provider* p, double* raw_out, double* z_out, size_t len);

/* 0-100 prompting scores, one per record. */
CP_API cp_status cp_prompting_scores(const cp_concept* c, const cp_dataset* ds, cp_provider* p,
                                     double temperature, double* out, size_t len);

/* ---- numerics ---------------------------------------------------------- */

CP_API cp_status cp_pearson_r(const double* x, const double* y, size_t n, double* out);
CP_API cp_status cp_spearman_rho(const double* x, const double* y, size_t n, double* out);
/* rows: row-major n x d. component: d values. ratios: up to k values,
 * count written to n_ratios. */
CP_API cp_status cp_pca_first_component(const double* rows, size_t n, size_t d, double* component,
                                        double* ratios, size_t k, size_t* n_ratios);
/* X: row-major n x p including the intercept column. Outputs hold p values. */
CP_API cp_status cp_ols(const double* y, const double* X, size_t n, size_t p, double* coef,
                        double* std_err, double* t_stat, double* r_squared);
CP_API cp_status cp_information_overload(const double* probs, size_t j, double* out);
CP_API cp_status cp_stance_ratio(int64_t hawkish, int64_t dovish, int64_t total, double* out);

/* ---- commands ---------------------------------------------------------- */

typedef struct cp_run_options {
  const char* config_path;
  const char* probe_path;
  const char* output_dir;
  const char* cache_dir;
  /* "synthetic", "http" or NULL for the config's choice. */
  const char* provider;
  const char* endpoint;
  /* "name=path" entries binding study measures to CSV files. */
  const char* const* measures;
  size_t n_measures;
  const char* const* variants;
  size_t n_variants;
  /* sensitivity: "llm_measure" or "prompting". */
  const char* method;
  /* baseline: "prompting", "entropy" or "stance". */
  const char* baseline_kind;
  const char* input_path;
  const char* output_path;
  /* 0 keeps the config value. */
  size_t probe_n;
  int has_seed;
  uint64_t seed;
} cp_run_options;

typedef struct cp_run_summary {
  size_t backend_calls;
  size_t cache_hits;
  size_t cache_misses;
  size_t n_outputs;
  /* Owned by the summary; released by cp_run_summary_clear. */
  char* message;
  char** outputs;
} cp_run_summary;

CP_API void cp_run_options_init(cp_run_options* opts);
CP_API void cp_run_summary_clear(cp_run_summary* summary);

CP_API cp_status cp_cmd_probe(const cp_run_options* opts, cp_run_summary* out);
CP_API cp_status cp_cmd_measure(const cp_run_options* opts, cp_run_summary* out);
CP_API cp_status cp_cmd_baseline(const cp_run_options* opts, cp_run_summary* out);
CP_API cp_status cp_cmd_validate(const cp_run_options* opts, cp_run_summary* out);
CP_API cp_status cp_cmd_sensitivity(const cp_run_options* opts, cp_run_summary* out);
CP_API cp_status cp_cmd_stability(const cp_run_options* opts, cp_run_summary* out);

/* Runs the wire-protocol conformance suite against `endpoint`, or against
 * an in-process synthetic server when endpoint is NULL. `report` receives
 * one line per check; all_passed is set to 1 or 0. */
CP_API cp_status cp_conformance(const char* endpoint, char** report, int* all_passed);

/* ---- wire server ------------------------------------------------------- */

typedef struct cp_server cp_server;

/* Serves a synthetic backend on 127.0.0.1; port 0 picks a free port. */
CP_API cp_status cp_server_start_synthetic(const cp_synthetic_options* opts, int port,
                                           cp_server** out);
CP_API int cp_server_port(const cp_server* s);
CP_API void cp_server_inject_failures(cp_server* s, int n);
CP_API void cp_server_free(cp_server* s);

#ifdef __cplusplus
}
#endif

#endif
