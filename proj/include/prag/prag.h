/*
 * prag: knowledge-poisoning attacks and defenses for retrieval-augmented
 * generation pipelines.
 *
 * C interface over the C++ core. Objects are opaque handles created by
 * prag_*_create/load/... functions and released with the matching
 * prag_*_free. Every fallible call returns a prag_status; on failure the
 * message is available from prag_last_error() on the same thread until the
 * next prag call. Strings returned through char** are heap-allocated and must
 * be released with prag_string_free. Structured results are JSON text.
 */
#ifndef PRAG_PRAG_H
#define PRAG_PRAG_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(PRAG_BUILDING_LIBRARY)
#    define PRAG_API __declspec(dllexport)
#  else
#    define PRAG_API __declspec(dllimport)
#  endif
#else
#  define PRAG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum prag_status {
  PRAG_OK = 0,
  PRAG_ERR_INVALID_ARGUMENT = 1,
  PRAG_ERR_PARSE = 2,
  PRAG_ERR_CONFLICT = 3,
  PRAG_ERR_IO = 4,
  PRAG_ERR_DOMAIN = 5,
  PRAG_ERR_LOOKUP = 6,
  PRAG_ERR_CAPABILITY = 7,
  PRAG_ERR_CONFIG = 8,
  PRAG_ERR_GENERATION = 9,
  PRAG_ERR_PROTOCOL = 10,
  PRAG_ERR_EXPERIMENT = 11,
  PRAG_ERR_INTERNAL = 99
} prag_status;

typedef enum prag_role { PRAG_ROLE_QUERY = 0, PRAG_ROLE_TEXT = 1 } prag_role;
typedef enum prag_metric { PRAG_METRIC_DOT_PRODUCT = 0, PRAG_METRIC_COSINE = 1 } prag_metric;

typedef struct prag_db prag_db;
typedef struct prag_encoder prag_encoder;
typedef struct prag_cases prag_cases;
typedef struct prag_poisons prag_poisons;
typedef struct prag_report prag_report;

PRAG_API const char* prag_version(void);
PRAG_API const char* prag_status_name(prag_status status);
PRAG_API const char* prag_last_error(void);
PRAG_API void prag_string_free(char* s);

/* ---- configuration ------------------------------------------------------ */

/* Merges `user_json` over the defaults, applies "dotted.key=value"
 * overrides, validates, and returns the full config document. */
PRAG_API prag_status prag_config_resolve(const char* user_json, const char* const* overrides,
                                         size_t n_overrides, int require_seed, char** out_json);

/* ---- corpus ------------------------------------------------------------- */

PRAG_API prag_status prag_db_ingest(const char* jsonl_path, prag_db** out);
PRAG_API prag_status prag_db_load(const char* snapshot_dir, prag_db** out);
/* Snapshot directory if `path` is a directory, JSONL corpus otherwise. */
PRAG_API prag_status prag_db_open(const char* path, prag_db** out);
PRAG_API prag_status prag_db_save(const prag_db* db, const char* snapshot_dir);
PRAG_API prag_status prag_db_size(const prag_db* db, size_t* out);
PRAG_API prag_status prag_db_snapshot_id(const prag_db* db, char** out);
PRAG_API prag_status prag_db_record_json(const prag_db* db, size_t index, char** out_json);
PRAG_API prag_status prag_db_inject(const prag_db* db, const prag_poisons* poisons, prag_db** out);
/* `removed_json` receives a JSON array of removed ids; may be NULL. */
PRAG_API prag_status prag_db_dedup(const prag_db* db, prag_db** out, char** removed_json);
PRAG_API void prag_db_free(prag_db* db);

/* ---- embedding ---------------------------------------------------------- */

/* {"kind": "feature_hash"|"linear_table"|"precomputed", "dim", "seed",
 *  "precomputed_path"} */
PRAG_API prag_status prag_encoder_create(const char* encoder_json, prag_encoder** out);
PRAG_API prag_status prag_encoder_dim(const prag_encoder* encoder, size_t* out);
PRAG_API prag_status prag_encoder_embed(const prag_encoder* encoder, prag_role role, const char* text,
                                        double* out, size_t out_len);
PRAG_API void prag_encoder_free(prag_encoder* encoder);
PRAG_API prag_status prag_tokenize(const char* text, char** tokens_json);

/* ---- retrieval ---------------------------------------------------------- */

PRAG_API prag_status prag_similarity(prag_metric metric, const double* u, const double* v, size_t dim,
                                     double* out);
/* {"k": k, "entries": [{"id", "score"}, ...]} */
PRAG_API prag_status prag_retrieve(const prag_db* db, const prag_encoder* encoder, prag_metric metric,
                                   const char* question, size_t k, char** result_json);

/* ---- generation --------------------------------------------------------- */

/* `generator_json` may be NULL or "{}" for the mock reader defaults. */
PRAG_API prag_status prag_render_prompt(const char* generator_json, const char* question,
                                        const char* const* contexts, size_t n_contexts, char** out);
PRAG_API prag_status prag_answer(const char* generator_json, const char* question,
                                 const char* const* contexts, size_t n_contexts, char** out);

/* ---- attack ------------------------------------------------------------- */

PRAG_API prag_status prag_cases_load(const char* jsonl_path, prag_cases** out);
PRAG_API prag_status prag_cases_count(const prag_cases* cases, size_t* out);
PRAG_API void prag_cases_free(prag_cases* cases);

/* Crafts poisons for every case using attack.*, generator, encoder and
 * metric from the config document. */
PRAG_API prag_status prag_poisons_craft(const prag_cases* cases, const char* config_json,
                                        prag_poisons** out);
PRAG_API prag_status prag_poisons_load(const char* jsonl_path, prag_poisons** out);
PRAG_API prag_status prag_poisons_save(const prag_poisons* poisons, const char* jsonl_path);
PRAG_API prag_status prag_poisons_count(const prag_poisons* poisons, size_t* out);
PRAG_API prag_status prag_poisons_to_json(const prag_poisons* poisons, char** out_json);
PRAG_API void prag_poisons_free(prag_poisons* poisons);

/* ---- defense ------------------------------------------------------------ */

PRAG_API prag_status prag_roc_auc(const double* clean, size_t n_clean, const double* poison,
                                  size_t n_poison, double* auc);
/* Trains a character n-gram model on clean records and scores every record:
 * [{"id", "origin", "perplexity"}, ...] */
PRAG_API prag_status prag_perplexity_scores(const prag_db* db, int n, double alpha, char** out_json);
/* Applies database-side defenses from the config (dedup) and, when the
 * database holds both clean and poison records, perplexity ROC. Writes
 * roc.csv / roc.json / ppl.jsonl to `out_dir` when it is non-NULL. */
PRAG_API prag_status prag_defend(const prag_db* db, const char* config_json, const char* out_dir,
                                 prag_db** out, char** summary_json);
PRAG_API prag_status prag_paraphrase(const char* generator_json, const char* question, int count,
                                     char** out_json);

/* ---- evaluation --------------------------------------------------------- */

PRAG_API prag_status prag_substring_match(const char* generated, const char* target, int* out);
PRAG_API prag_status prag_eval(const prag_db* db, const prag_cases* cases, const char* config_json,
                               prag_report** out);
/* Grid over ks x ns; rows JSON {"rows": [...]}. Writes sweep files to
 * `out_dir` when non-NULL. */
PRAG_API prag_status prag_sweep(const prag_db* db, const prag_cases* cases, const char* config_json,
                                const size_t* ks, size_t n_ks, const int* ns, size_t n_ns,
                                const char* out_dir, char** rows_json);
PRAG_API prag_status prag_report_to_json(const prag_report* report, char** out_json);
PRAG_API prag_status prag_report_emit(const prag_report* report, const char* out_dir);
PRAG_API prag_status prag_report_load(const char* report_json_path, prag_report** out);
PRAG_API prag_status prag_report_summary(const prag_report* report, double* asr, double* precision,
                                         double* recall, double* f1);
PRAG_API prag_status prag_report_runtime(const prag_report* report, double* seconds);
PRAG_API void prag_report_free(prag_report* report);

#ifdef __cplusplus
}
#endif

#endif /* PRAG_PRAG_H */
