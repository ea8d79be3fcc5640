/* Copyright 2026 The ctxrank Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the ctxrank re-ranking engine.
 *
 * Every function returns a ctx_status. On failure the message is available
 * from ctx_last_error() on the same thread until the next call. Strings
 * returned through char** out-parameters are heap allocated and must be
 * released with ctx_string_free. Handles are released with their _free
 * function; passing NULL to a _free function is a no-op.
 *
 * Configuration is passed as a JSON document with the optional sections
 * "seed", "synth", "sampler", "graph", "model", "train" and "eval". Missing
 * keys take their defaults; unknown keys are rejected. NULL or "" means
 * all defaults.
 */
#ifndef CTXRANK_C_API_H_
#define CTXRANK_C_API_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CTXRANK_BUILDING_LIBRARY)
#define CTXRANK_API __declspec(dllexport)
#else
#define CTXRANK_API __declspec(dllimport)
#endif
#else
#define CTXRANK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum ctx_status {
  CTX_OK = 0,
  CTX_ERR_INTERNAL = 1,
  CTX_ERR_CONFIG = 2,
  CTX_ERR_DATA = 3,
  CTX_ERR_NUMERIC = 4
} ctx_status;

typedef struct ctx_store ctx_store;
typedef struct ctx_model ctx_model;

CTXRANK_API const char* ctx_version(void);
CTXRANK_API const char* ctx_last_error(void);
CTXRANK_API void ctx_string_free(char* s);

/* Canonical form of a config: all defaults filled in, plus "config_hash". */
CTXRANK_API ctx_status ctx_config_resolve(const char* config_json, char** out_json);

/* ---- embedding store ---------------------------------------------------- */

CTXRANK_API ctx_status ctx_store_load(const char* manifest_path, ctx_store** out);
CTXRANK_API ctx_status ctx_store_synth(const char* config_json, ctx_store** out);
CTXRANK_API ctx_status ctx_store_write(const ctx_store* store, const char* manifest_path);
CTXRANK_API void ctx_store_free(ctx_store* store);
CTXRANK_API size_t ctx_store_count(const ctx_store* store);
CTXRANK_API int ctx_store_dim(const ctx_store* store);
/* Copies the (possibly normalized) feature of record `index` into `out`,
 * which must hold ctx_store_dim() values. */
CTXRANK_API ctx_status ctx_store_feature(const ctx_store* store, size_t index, double* out,
                                         size_t out_len);

/* ---- model -------------------------------------------------------------- */

/* Trains on the store's train split. When checkpoint_dir is non-NULL it
 * receives ckpt_{epoch}.bin/.json and train_log.jsonl; resume != 0
 * continues from its newest checkpoint. out_model and out_report_json
 * (JSON: epochs, graphs, skipped, loss_history) are optional. */
CTXRANK_API ctx_status ctx_train(const ctx_store* store, const char* config_json,
                                 const char* checkpoint_dir, int resume, ctx_model** out_model,
                                 char** out_report_json);
CTXRANK_API ctx_status ctx_model_load(const char* checkpoint_path, ctx_model** out);
CTXRANK_API ctx_status ctx_model_save(const ctx_model* model, const char* checkpoint_path);
CTXRANK_API void ctx_model_free(ctx_model* model);
CTXRANK_API int ctx_model_dim(const ctx_model* model);
CTXRANK_API int ctx_model_layers(const ctx_model* model);

/* Eval-mode logits for the context graph of one probe. Writes at most
 * `capacity` values and the node count to *out_count. */
CTXRANK_API ctx_status ctx_model_logits(const ctx_model* model, const ctx_store* store,
                                        const char* config_json, int64_t probe_id,
                                        double* out_logits, size_t capacity, size_t* out_count);

/* ---- evaluation --------------------------------------------------------- */

/* Summary JSON: config, config_hash, headline metrics and one row per sweep
 * point. sweep_json may hold arrays "lambda", "k", "kprime", "mode"; NULL
 * evaluates the config as given. models may be NULL when every lambda is 0.
 * Rows iterate models outermost. */
CTXRANK_API ctx_status ctx_eval(const ctx_store* store, const ctx_model* const* models,
                                size_t model_count, const char* config_json,
                                const char* sweep_json, char** out_summary_json);

/* Per-probe rankings as line-delimited JSON written to results_path, plus
 * the summary. */
CTXRANK_API ctx_status ctx_rank(const ctx_store* store, const ctx_model* model,
                                const char* config_json, const char* results_path,
                                char** out_summary_json);

/* CSV of the sweep rows of a ctx_eval summary. */
CTXRANK_API ctx_status ctx_plot_csv(const char* summary_json, char** out_csv);

/* Finite-difference gradient check. options_json may set "node_counts",
 * "step", "tolerance" and "fault" (corrupts one gradient on purpose).
 * Returns CTX_ERR_NUMERIC, with the report still filled in, when any block
 * fails. */
CTXRANK_API ctx_status ctx_gradcheck(const char* config_json, const char* options_json,
                                     char** out_report_json);

/* Candidate ids, labels and support rows of one probe's graph. */
CTXRANK_API ctx_status ctx_inspect(const ctx_store* store, const char* config_json,
                                   int64_t probe_id, char** out_graph_json);

#ifdef __cplusplus
}
#endif

#endif /* CTXRANK_C_API_H_ */
