/*
 * C interface to the moge routing library.
 *
 * All objects are opaque handles created by a *_create / producing function and
 * released with the matching *_destroy. Functions report failure through a
 * moge_status code; the message of the most recent failure on the calling
 * thread is available from moge_last_error().
 *
 * Matrices are passed as row-major double arrays. Expert indices are int32.
 */
#ifndef MOGE_MOGE_H
#define MOGE_MOGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(MOGE_BUILDING_LIBRARY)
#define MOGE_API __declspec(dllexport)
#else
#define MOGE_API __declspec(dllimport)
#endif
#else
#define MOGE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum moge_status {
    MOGE_OK = 0,
    MOGE_E_INVALID_ARGUMENT = 1, /* null pointer or scalar out of domain */
    MOGE_E_CONFIG = 2,           /* invalid N, K, M combination */
    MOGE_E_DIMENSION = 3,        /* shape or length mismatch */
    MOGE_E_DATA = 4,             /* malformed or non-finite input data */
    MOGE_E_EMPTY = 5,            /* empty batch or trace */
    MOGE_E_RANGE = 6,            /* index out of range */
    MOGE_E_INTERNAL = 99
} moge_status;

typedef enum moge_mode { MOGE_MODE_TOPK = 0, MOGE_MODE_MOGE = 1 } moge_mode;

typedef enum moge_activation {
    MOGE_ACTIVATION_IDENTITY = 0,
    MOGE_ACTIVATION_RELU = 1,
    MOGE_ACTIVATION_SILU = 2
} moge_activation;

/* N experts, K active per token, M groups. */
typedef struct moge_dims {
    int32_t n_experts;
    int32_t n_active;
    int32_t n_groups;
} moge_dims;

typedef struct moge_string moge_string;
typedef struct moge_router moge_router;
typedef struct moge_trace moge_trace;
typedef struct moge_histogram moge_histogram;
typedef struct moge_layer moge_layer;
typedef struct moge_params moge_params;

MOGE_API const char* moge_version(void);
MOGE_API const char* moge_status_name(moge_status status);
MOGE_API const char* moge_last_error(void);

MOGE_API moge_status moge_dims_validate(moge_dims dims);

/* Locale-independent shortest round-trip formatting. Writes at most `capacity`
 * bytes including the terminator. */
MOGE_API moge_status moge_format_real(double value, char* buffer, size_t capacity);

/* ---- strings returned by serializers ---- */
MOGE_API const char* moge_string_data(const moge_string* str);
MOGE_API size_t moge_string_size(const moge_string* str);
MOGE_API void moge_string_destroy(moge_string* str);

/* ---- router ---- */
MOGE_API moge_status moge_router_create(const double* weights, size_t dim, size_t n_experts,
                                        moge_router** out);
/* N(0, 1/dim) entries from stream 0 of `seed`. */
MOGE_API moge_status moge_router_create_random(size_t dim, size_t n_experts, uint64_t seed,
                                               moge_router** out);
MOGE_API size_t moge_router_dim(const moge_router* router);
MOGE_API size_t moge_router_experts(const moge_router* router);
MOGE_API void moge_router_destroy(moge_router* router);

/* n_tokens x dim N(0, 1) entries from stream 1 of `seed`. */
MOGE_API moge_status moge_synthesize_tokens(size_t n_tokens, size_t dim, uint64_t seed,
                                            double* out);

/* Single token. weights_out has N entries (dense gate vector), selected_out K
 * entries in ascending order. Either output may be NULL. */
MOGE_API moge_status moge_route_token(const moge_router* router, moge_dims dims, moge_mode mode,
                                      const double* token, size_t dim, double* weights_out,
                                      int32_t* selected_out);

/* Global softmax of the router logits for each token (n_tokens x N). */
MOGE_API moge_status moge_global_scores(const moge_router* router, const double* tokens,
                                        size_t n_tokens, size_t dim, double* scores_out);

/* ---- traces ---- */
MOGE_API moge_status moge_route_batch(const moge_router* router, moge_dims dims, moge_mode mode,
                                      const double* tokens, size_t n_tokens, size_t dim,
                                      moge_trace** out);
MOGE_API size_t moge_trace_size(const moge_trace* trace);
/* Number of selections recorded for `token`. */
MOGE_API moge_status moge_trace_token_size(const moge_trace* trace, size_t token, size_t* out);
/* Copies `token`'s selections; both buffers must hold moge_trace_token_size entries. */
MOGE_API moge_status moge_trace_get(const moge_trace* trace, size_t token, int32_t* selected,
                                    double* weights);
MOGE_API moge_status moge_trace_to_jsonl(const moge_trace* trace, moge_string** out);
MOGE_API moge_status moge_trace_from_jsonl(const char* data, size_t size, moge_dims dims,
                                           moge_trace** out);
MOGE_API void moge_trace_destroy(moge_trace* trace);

/* ---- balance metrics ---- */
MOGE_API moge_status moge_device_loads(const moge_trace* trace, moge_dims dims,
                                       int64_t* loads_out);
MOGE_API moge_status moge_imbalance_score(const int64_t* loads, size_t n_devices,
                                          size_t batch_size, double* out);
/* scores: n_tokens x N global softmax rows. f_out and p_out (N entries) may be NULL. */
MOGE_API moge_status moge_aux_loss(const moge_trace* trace, const double* scores,
                                   size_t n_tokens, moge_dims dims, double alpha, double* f_out,
                                   double* p_out, double* loss_out);

/* threads == 0 uses hardware concurrency; output does not depend on it. */
MOGE_API moge_status moge_simulate_is(moge_dims dims, moge_mode mode, size_t batch_size,
                                      uint64_t trials, uint64_t seed, uint32_t threads,
                                      moge_histogram** out);
MOGE_API size_t moge_histogram_bins(const moge_histogram* histogram);
MOGE_API moge_status moge_histogram_bin(const moge_histogram* histogram, size_t index,
                                        double* is_value, double* probability);
MOGE_API moge_status moge_histogram_to_csv(const moge_histogram* histogram, moge_string** out);
MOGE_API void moge_histogram_destroy(moge_histogram* histogram);

/* ---- analytics ---- */
/* per_token_out sums to K, share_out sums to 1; N entries each, either may be NULL. */
MOGE_API moge_status moge_usage_histogram(const moge_trace* trace, moge_dims dims,
                                          double* per_token_out, double* share_out);
MOGE_API moge_status moge_coactivation(const moge_trace* trace, moge_dims dims,
                                       double* scores_out);
MOGE_API moge_status moge_intra_group(const moge_trace* trace, moge_dims dims, int32_t group,
                                      double* share_out);

typedef enum moge_report {
    MOGE_REPORT_USAGE = 0,       /* expert,proportion */
    MOGE_REPORT_USAGE_SHARE = 1, /* expert,share */
    MOGE_REPORT_COACTIVATION = 2,/* i,j,score */
    MOGE_REPORT_INTRA_GROUP = 3  /* group,expert,share */
} moge_report;

MOGE_API moge_status moge_analysis_to_csv(const moge_trace* trace, moge_dims dims,
                                          moge_report report, moge_string** out);

/* ---- device cost ---- */
MOGE_API moge_status moge_step_cost(const int64_t* loads, size_t n_devices, size_t batch_size,
                                    double cost, double* per_device_out, double* makespan_out);
/* router == NULL draws i.i.d. N(0, 1) logits; otherwise N(0, I) hidden states
 * are routed through it. Output arrays hold `trials` entries. */
MOGE_API moge_status moge_compare_routing_cost(const moge_router* router, moge_dims dims,
                                               size_t batch_size, double cost, uint64_t trials,
                                               uint64_t seed, double* topk_makespan_out,
                                               double* moge_makespan_out);

/* ---- expert layer ---- */
MOGE_API moge_status moge_layer_create_random(moge_dims dims, size_t dim, size_t hidden_dim,
                                              size_t n_shared, moge_activation activation,
                                              uint64_t seed, moge_layer** out);
/* output_out has dim entries; gate_out (N entries) may be NULL. */
MOGE_API moge_status moge_layer_forward(const moge_layer* layer, moge_mode mode,
                                        const double* token, size_t dim, double* output_out,
                                        double* gate_out);
MOGE_API void moge_layer_destroy(moge_layer* layer);

/* ---- parameter sets, checkpoint merging, smoothing ---- */
MOGE_API moge_status moge_params_from_json(const char* data, size_t size, moge_params** out);
MOGE_API moge_status moge_params_to_json(const moge_params* params, moge_string** out);
MOGE_API size_t moge_params_count(const moge_params* params);
/* Name of the index-th parameter in sorted order; NULL if out of range. */
MOGE_API const char* moge_params_name(const moge_params* params, size_t index);
/* Borrowed views valid until the handle is destroyed. */
MOGE_API moge_status moge_params_get(const moge_params* params, const char* name,
                                     const double** values, size_t* size, const size_t** shape,
                                     size_t* rank);
MOGE_API void moge_params_destroy(moge_params* params);

/* Group k has weight lambdas[k] and the next group_sizes[k] entries of
 * `checkpoints`. */
MOGE_API moge_status moge_merge_checkpoints(const moge_params* base, size_t n_groups,
                                            const double* lambdas, const size_t* group_sizes,
                                            const moge_params* const* checkpoints,
                                            moge_params** out);

/* expert_w_absmax is n_experts x dim. out has dim entries. */
MOGE_API moge_status moge_smoothing_vector(const double* act_absmax, size_t dim,
                                           const double* expert_w_absmax, size_t n_experts,
                                           const double* router_w_absmax, double alpha,
                                           double* out);

#ifdef __cplusplus
}
#endif

#endif /* MOGE_MOGE_H */
