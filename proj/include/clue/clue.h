#ifndef CLUE_CLUE_H
#define CLUE_CLUE_H

#include <stddef.h>
#include <stdint.h>

#if defined(CLUE_BUILDING_LIBRARY)
#define CLUE_API __attribute__((visibility("default")))
#else
#define CLUE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clue_status {
  CLUE_OK = 0,
  CLUE_ERR_INVALID_ARGUMENT = 1,
  CLUE_ERR_PARSE = 2,
  CLUE_ERR_VALIDATION = 3,
  CLUE_ERR_DIVERGED = 4,
  CLUE_ERR_NO_EXPERT = 5,
  CLUE_ERR_MISSING_REWARDS = 6,
  CLUE_ERR_DEGENERATE_RANGE = 7,
  CLUE_ERR_IO = 8,
  CLUE_ERR_PARTIAL = 9,
  CLUE_ERR_INTERNAL = 100
} clue_status;

typedef struct clue_dataset clue_dataset;
typedef struct clue_maze clue_maze;
typedef struct clue_cvae clue_cvae;
typedef struct clue_labeler clue_labeler;
typedef struct clue_agent clue_agent;
typedef struct clue_kmeans clue_kmeans;

/* Message of the last failed call on this thread; never NULL. */
CLUE_API const char* clue_last_error(void);
CLUE_API const char* clue_status_name(clue_status status);
CLUE_API const char* clue_version(void);
/* Releases strings returned through char** out parameters. */
CLUE_API void clue_string_free(char* s);

/* Warnings go to stderr unless a callback is installed; NULL restores stderr. */
typedef void (*clue_warning_fn)(const char* message, void* user);
CLUE_API void clue_set_warning_callback(clue_warning_fn fn, void* user);

/* Configuration. file_json and overrides_json may be NULL. fallback_seed is
   used only when neither document sets a seed. */
CLUE_API clue_status clue_config_defaults(char** json_out);
CLUE_API clue_status clue_config_resolve(const char* file_json, const char* overrides_json,
                                         const uint64_t* fallback_seed, char** resolved_out);

/* Runs gen-data, train-cvae, relabel, train, eval, skills or sweep. summary_out
   and report_out (JSON) may be NULL. On CLUE_ERR_DIVERGED and CLUE_ERR_PARTIAL
   the partial outputs are already written. */
CLUE_API clue_status clue_command_run(const char* command, const char* resolved_json, char** summary_out,
                                      char** report_out);

/* Datasets */
CLUE_API clue_status clue_dataset_load(const char* path, clue_dataset** out);
CLUE_API clue_status clue_dataset_save(const clue_dataset* d, const char* path);
CLUE_API void clue_dataset_free(clue_dataset* d);
CLUE_API clue_status clue_dataset_info(const clue_dataset* d, size_t* trajectories, size_t* transitions,
                                       size_t* state_dim, size_t* action_dim, int* labeled);
/* Per-trajectory returns; count receives the number of trajectories even when
   capacity is too small. */
CLUE_API clue_status clue_dataset_returns(const clue_dataset* d, double* out, size_t capacity, size_t* count);
CLUE_API clue_status clue_dataset_filter_expert(const clue_dataset* d, size_t k, clue_dataset** expert,
                                                clue_dataset** rest);
CLUE_API clue_status clue_reward_scale(const clue_dataset* d, double* scale);

/* Maze */
CLUE_API clue_status clue_maze_load(const char* path, clue_maze** out);
CLUE_API void clue_maze_free(clue_maze* m);
CLUE_API clue_status clue_maze_step(const clue_maze* m, const double state[2], const double action[2], size_t t,
                                    double next_state[2], double* reward, int* terminal, int* truncated);
CLUE_API clue_status clue_maze_generate(const clue_maze* m, const char* mixture, size_t episodes, uint64_t seed,
                                        clue_dataset** out);

/* CVAE and intrinsic reward */
CLUE_API clue_status clue_cvae_load(const char* checkpoint, clue_cvae** out);
CLUE_API void clue_cvae_free(clue_cvae* m);
CLUE_API clue_status clue_cvae_dims(const clue_cvae* m, size_t* state_dim, size_t* action_dim, size_t* latent_dim);
CLUE_API clue_status clue_cvae_encode(const clue_cvae* m, const double* state, const double* action, double* mean,
                                      double* std);
CLUE_API clue_status clue_labeler_create(const clue_cvae* m, const clue_dataset* expert, double c,
                                         clue_labeler** out);
CLUE_API void clue_labeler_free(clue_labeler* l);
CLUE_API clue_status clue_labeler_reward(const clue_labeler* l, const double* state, const double* action,
                                         double* reward);
CLUE_API clue_status clue_reward_from_distance(double squared_distance, double c, double* reward);

/* Agents */
CLUE_API clue_status clue_agent_load(const char* checkpoint, clue_agent** out);
CLUE_API void clue_agent_free(clue_agent* a);
CLUE_API clue_status clue_agent_act(const clue_agent* a, const double* state, double* action);

/* K-means on row-major points (n x dim) */
CLUE_API clue_status clue_kmeans_fit(const double* points, size_t n, size_t dim, size_t k, size_t max_iter,
                                     uint64_t seed, clue_kmeans** out);
CLUE_API void clue_kmeans_free(clue_kmeans* km);
CLUE_API clue_status clue_kmeans_assignment(const clue_kmeans* km, size_t* out, size_t n);
CLUE_API clue_status clue_kmeans_inertia(const clue_kmeans* km, double* inertia, size_t* iterations);

#ifdef __cplusplus
}
#endif

#endif
