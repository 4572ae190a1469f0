/* C interface to the amml library. All handles are opaque; every call that can
 * fail returns an amml_status and leaves a message retrievable with
 * amml_last_error() on the calling thread. */
#ifndef AMML_AMML_H
#define AMML_AMML_H

#include <stdint.h>

#if defined(AMML_BUILDING_LIBRARY)
#define AMML_API __attribute__((visibility("default")))
#else
#define AMML_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum amml_status {
  AMML_OK = 0,
  AMML_ERR_PARAMETER = 1,
  AMML_ERR_IO = 2,
  AMML_ERR_PARSE = 3,
  AMML_ERR_SHAPE = 4,
  AMML_ERR_CONFIG = 5,
  AMML_ERR_DEGENERATE = 6,
  AMML_ERR_NONCONVERGED = 7,
  AMML_ERR_MISSING_ORACLE = 8,
  AMML_ERR_RUNTIME = 9,
  AMML_ERR_INTERNAL = 10
} amml_status;

typedef struct amml_config amml_config;
typedef struct amml_result amml_result;
typedef struct amml_checkpoint amml_checkpoint;

AMML_API const char* amml_version(void);
AMML_API const char* amml_status_name(amml_status status);
/* Message of the last failed call on this thread, "" when none. */
AMML_API const char* amml_last_error(void);

/* Configuration. A NULL path gives the defaults. */
AMML_API amml_status amml_config_load(const char* path, amml_config** out);
AMML_API amml_status amml_config_from_json(const char* text, amml_config** out);
AMML_API amml_status amml_config_miniature(amml_config** out);
AMML_API void amml_config_free(amml_config* cfg);
AMML_API amml_status amml_config_set_seed(amml_config* cfg, uint64_t seed);
AMML_API amml_status amml_config_set_out(amml_config* cfg, const char* dir);
AMML_API amml_status amml_config_set_updates(amml_config* cfg, int updates);
/* Output directory and evaluation horizon after overrides. */
AMML_API const char* amml_config_out(const amml_config* cfg);
AMML_API int amml_config_eval_rounds(const amml_config* cfg);
/* Full configuration with defaults filled in; owned by the handle. */
AMML_API const char* amml_config_json(amml_config* cfg);

/* Commands. `out` receives a result handle unless NULL. */
AMML_API amml_status amml_gen(const amml_config* cfg, amml_result** out);
AMML_API amml_status amml_train(const amml_config* cfg, const char* checkpoint_path, amml_result** out);
AMML_API amml_status amml_eval(const amml_config* cfg, const char* checkpoint_path, int rounds, amml_result** out);
AMML_API amml_status amml_compare(const amml_config* cfg, const char* checkpoint_path, amml_result** out);
AMML_API amml_status amml_oracle_check(const amml_config* cfg, amml_result** out);

/* Results: a one-line-per-field text summary plus named numeric values. */
AMML_API const char* amml_result_text(const amml_result* r);
AMML_API amml_status amml_result_number(const amml_result* r, const char* key, double* value);
AMML_API void amml_result_free(amml_result* r);

/* Checkpoints. */
AMML_API amml_status amml_checkpoint_load(const char* path, amml_checkpoint** out);
AMML_API void amml_checkpoint_free(amml_checkpoint* ckpt);
AMML_API amml_status amml_checkpoint_dims(const amml_checkpoint* ckpt, int* state_dim, int* action_dim);
/* Mean action (alpha, beta, rho; alpha is 0 for l1-regression) for a raw state. */
AMML_API amml_status amml_checkpoint_act(const amml_checkpoint* ckpt, const double* state, int state_dim,
                                         double* action3);

#ifdef __cplusplus
}
#endif

#endif
