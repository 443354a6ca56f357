#ifndef SATLOG_SATLOG_H
#define SATLOG_SATLOG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define SATLOG_API __attribute__((visibility("default")))
#else
#define SATLOG_API
#endif

/* Every call returns SATLOG_OK or one of these codes. The message of the
 * most recent failure on the calling thread is kept by satlog_last_error. */
typedef enum satlog_status {
  SATLOG_OK = 0,
  SATLOG_ERR_INVALID_INPUT = 1,
  SATLOG_ERR_NOT_FOUND = 2,
  SATLOG_ERR_CONFIG = 3,
  SATLOG_ERR_PARSE = 4,
  SATLOG_ERR_CORRUPT_MODEL = 5,
  SATLOG_ERR_INCOMPATIBLE_MODEL = 6,
  SATLOG_ERR_IO = 7,
  SATLOG_ERR_INTERNAL = 8
} satlog_status;

typedef struct satlog_model satlog_model;

typedef struct satlog_match {
  uint64_t node_id;
  double saturation;
  int matched;    /* 0 when a temporary node was inserted for the line */
  int has_tokens; /* 0 for lines that tokenize to nothing; other fields 0 */
} satlog_match;

SATLOG_API const char* satlog_version(void);
SATLOG_API const char* satlog_last_error(void);
SATLOG_API const char* satlog_status_name(satlog_status status);

/* Strings returned through char** out-parameters are owned by the caller. */
SATLOG_API void satlog_string_free(char* s);

/* Config JSON documents. `name` selects a LogHub dataset preset. */
SATLOG_API satlog_status satlog_config_default(char** out_json);
SATLOG_API satlog_status satlog_config_preset(const char* name, char** out_json);
SATLOG_API satlog_status satlog_config_load(const char* path, char** out_json);

/* Training. `config_json` may be NULL for the default config. `trained_at`
 * is unix seconds; 0 stamps the current time. */
SATLOG_API satlog_status satlog_train_lines(const char* topic, const char* config_json,
                                            const char* const* lines, size_t count,
                                            unsigned workers, int64_t trained_at,
                                            satlog_model** out);
SATLOG_API satlog_status satlog_train_file(const char* topic, const char* config_json,
                                           const char* log_path, unsigned workers,
                                           int64_t trained_at, satlog_model** out);

SATLOG_API satlog_status satlog_model_load(const char* path, satlog_model** out);
SATLOG_API satlog_status satlog_model_deserialize(const char* text, size_t length,
                                                  satlog_model** out);
SATLOG_API satlog_status satlog_model_save(const satlog_model* model, const char* path);
SATLOG_API satlog_status satlog_model_serialize(const satlog_model* model, char** out);
SATLOG_API void satlog_model_free(satlog_model* model);

SATLOG_API size_t satlog_model_node_count(const satlog_model* model);
SATLOG_API uint64_t satlog_model_version(const satlog_model* model);

/* Matches `count` lines in order into `out` (caller-allocated, `count`
 * entries). With `insert_unmatched` set, misses get temporary nodes in the
 * handle's model; otherwise a miss reports node_id 0 and matched 0. */
SATLOG_API satlog_status satlog_match_lines(satlog_model* model, const char* const* lines,
                                            size_t count, int insert_unmatched,
                                            satlog_match* out);

SATLOG_API satlog_status satlog_node_display(const satlog_model* model, uint64_t node,
                                             char** out);

/* JSON array of {node_id, display_text, saturation, log_count}. */
SATLOG_API satlog_status satlog_query_json(const satlog_model* model, double threshold,
                                           char** out);
/* JSON {node, ancestors (parent first), children}. */
SATLOG_API satlog_status satlog_ancestors_json(const satlog_model* model, uint64_t node,
                                               char** out);

/* Benchmark a LogHub structured CSV. `config_json` NULL picks the dataset
 * preset by file name, falling back to the default config. Writes a JSON
 * array of reports: the leaf tier first, then one per threshold. */
SATLOG_API satlog_status satlog_bench_json(const char* csv_path, const char* config_json,
                                           unsigned workers, const double* thresholds,
                                           size_t threshold_count, char** out);
/* Same report over `lines` generated synthetic log lines; `config_json`
 * NULL uses the synthetic corpus config. */
SATLOG_API satlog_status satlog_bench_synthetic_json(uint64_t lines, uint64_t seed,
                                                     const char* config_json, unsigned workers,
                                                     const double* thresholds,
                                                     size_t threshold_count, char** out);
/* JSON {"points":[{n, seconds}], "slope"} over prefixes of the CSV. */
SATLOG_API satlog_status satlog_scaling_json(const char* csv_path, const char* config_json,
                                             unsigned workers, const uint64_t* sizes,
                                             size_t size_count, char** out);

/* Serves the HTTP API described by a server config file until SIGINT or
 * SIGTERM. */
SATLOG_API satlog_status satlog_serve(const char* server_config_path);

/* Diagnostics on stderr: 0 debug, 1 info, 2 warn, 3 error, 4 off. */
SATLOG_API void satlog_set_log_level(int level);

#ifdef __cplusplus
}
#endif

#endif
