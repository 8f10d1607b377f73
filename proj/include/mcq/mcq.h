/* C interface to the mildly conservative offline RL engine.
 *
 * All functions return mcq_status; on failure mcq_last_error() carries a
 * thread-local message. Handles are opaque and must be released with the
 * matching _free function.
 */
#ifndef MCQ_H
#define MCQ_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mcq_status {
    MCQ_OK = 0,
    MCQ_ERR_INVALID_ARGUMENT = 1,
    MCQ_ERR_CONFIG = 2,
    MCQ_ERR_IO = 3,
    MCQ_ERR_FORMAT = 4,
    MCQ_ERR_VERIFY_FAILED = 5,
    MCQ_ERR_RUNTIME = 6
} mcq_status;

const char* mcq_version(void);
const char* mcq_status_name(mcq_status status);

/* Thread-local message describing the last failure; empty string if none. */
const char* mcq_last_error(void);

/* --- configuration ------------------------------------------------------ */

typedef struct mcq_config mcq_config;

mcq_status mcq_config_create(mcq_config** out);
mcq_status mcq_config_load(const char* path, mcq_config** out);

/* Applies an override of the form "section.key=value". */
mcq_status mcq_config_set(mcq_config* cfg, const char* dotted_assignment);

/* Copies the value of section.key into buffer (NUL terminated). Fails with
 * MCQ_ERR_INVALID_ARGUMENT when the key is absent or the buffer too small. */
mcq_status mcq_config_get(const mcq_config* cfg, const char* section,
                          const char* key, char* buffer, size_t buffer_len);

void mcq_config_free(mcq_config* cfg);

/* --- runs ---------------------------------------------------------------- */

/* Runs the five proposition certificates; writes certificates.txt and
 * certificates.jsonl under out_dir. *all_hold receives 1 when every
 * certificate holds, 0 otherwise (the call itself still returns MCQ_OK). */
mcq_status mcq_verify(const mcq_config* cfg, uint64_t seed, const char* out_dir,
                      int* all_hold);

/* Generates the dataset described by the config and writes it to
 * [dataset].path. The written path is copied into path_buffer when given. */
mcq_status mcq_generate_dataset(const mcq_config* cfg, uint64_t seed,
                                char* path_buffer, size_t buffer_len);

/* Offline training; writes metrics.csv, manifest.txt and checkpoint.mcqc
 * under out_dir. */
mcq_status mcq_train(const mcq_config* cfg, uint64_t seed, const char* out_dir);

typedef struct mcq_eval_result {
    double mean_return;
    double std_return;
    double normalized_score;
} mcq_eval_result;

mcq_status mcq_evaluate(const mcq_config* cfg, uint64_t seed,
                        const char* checkpoint_path, mcq_eval_result* out);

/* Offline-to-online fine-tuning starting from a trained checkpoint. */
mcq_status mcq_finetune(const mcq_config* cfg, uint64_t seed,
                        const char* checkpoint_path, const char* out_dir);

/* Converts run metrics into per-figure CSV series under out_dir. */
mcq_status mcq_export_plots(const char* const* run_dirs, size_t n_runs,
                            const char* out_dir);

/* --- dataset access ------------------------------------------------------ */

typedef struct mcq_dataset mcq_dataset;

mcq_status mcq_dataset_open(const char* path, mcq_dataset** out);
size_t mcq_dataset_size(const mcq_dataset* data);
size_t mcq_dataset_state_dim(const mcq_dataset* data);
size_t mcq_dataset_action_dim(const mcq_dataset* data);
int mcq_dataset_is_discrete(const mcq_dataset* data);

/* Copies transition `index` into the caller's buffers. s and s_next must
 * hold state_dim doubles, a must hold action_dim doubles. Null pointers
 * skip that field. */
mcq_status mcq_dataset_get(const mcq_dataset* data, size_t index, double* s,
                           double* a, double* r, double* s_next, uint8_t* d);

void mcq_dataset_free(mcq_dataset* data);

#ifdef __cplusplus
}
#endif

#endif /* MCQ_H */
