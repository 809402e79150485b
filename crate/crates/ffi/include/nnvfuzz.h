#ifndef NNVFUZZ_H
#define NNVFUZZ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NnvStatus {
  NNV_STATUS_OK = 0,
  NNV_STATUS_NULL_ARGUMENT = 1,
  NNV_STATUS_INVALID_UTF8 = 2,
  NNV_STATUS_PARSE = 3,
  NNV_STATUS_IO = 4,
  NNV_STATUS_SHAPE = 5,
  NNV_STATUS_NON_FINITE = 6,
  NNV_STATUS_INVALID_ARGUMENT = 7,
  NNV_STATUS_BUFFER_TOO_SMALL = 8,
  NNV_STATUS_PANIC = 9,
} NnvStatus;

typedef enum NnvVerifierKind {
  NNV_VERIFIER_KIND_IBP = 0,
  NNV_VERIFIER_KIND_BAB = 1,
  NNV_VERIFIER_KIND_SAMPLER = 2,
} NnvVerifierKind;

typedef enum NnvVerdict {
  NNV_VERDICT_HOLDS = 0,
  NNV_VERDICT_VIOLATED = 1,
  NNV_VERDICT_UNKNOWN = 2,
  NNV_VERDICT_TIMEOUT = 3,
  NNV_VERDICT_CRASH = 4,
} NnvVerdict;

/**
 * Opaque network handle.
 */
typedef struct NnvNetwork NnvNetwork;

/**
 * Opaque specification handle.
 */
typedef struct NnvSpec NnvSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * call into this library from the same thread.
 */
const char *nnv_last_error_message(void);

const char *nnv_version(void);

/**
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum NnvStatus nnv_network_from_json(const char *json, struct NnvNetwork **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum NnvStatus nnv_network_load(const char *path, struct NnvNetwork **out);

/**
 * # Safety
 * `net` is null or a handle from this library, not yet freed.
 */
void nnv_network_free(struct NnvNetwork *net);

/**
 * Zero for a null handle.
 *
 * # Safety
 * `net` is null or a live handle.
 */
size_t nnv_network_input_dim(const struct NnvNetwork *net);

/**
 * Zero for a null handle.
 *
 * # Safety
 * `net` is null or a live handle.
 */
size_t nnv_network_output_dim(const struct NnvNetwork *net);

/**
 * Writes `output_dim` values to `y`; `y_len` must be at least that.
 *
 * # Safety
 * `x` holds `x_len` doubles; `y` has room for `y_len` doubles.
 */
enum NnvStatus nnv_network_forward(const struct NnvNetwork *net,
                                   const double *x,
                                   size_t x_len,
                                   double *y,
                                   size_t y_len);

/**
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum NnvStatus nnv_spec_from_json(const char *json, struct NnvSpec **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum NnvStatus nnv_spec_load(const char *path, struct NnvSpec **out);

/**
 * Linf robustness: inputs within `epsilon` of `center` keep `label`.
 *
 * # Safety
 * `center` holds `n` doubles; `out` is writable.
 */
enum NnvStatus nnv_spec_robustness(const double *center,
                                   size_t n,
                                   double epsilon,
                                   size_t label,
                                   struct NnvSpec **out);

/**
 * # Safety
 * `spec` is null or a handle from this library, not yet freed.
 */
void nnv_spec_free(struct NnvSpec *spec);

/**
 * Sets `*out` when `x` satisfies the precondition and the network output
 * violates the postcondition.
 *
 * # Safety
 * Handles are live; `x` holds `x_len` doubles; `out` is writable.
 */
enum NnvStatus nnv_violates(const struct NnvNetwork *net,
                            const struct NnvSpec *spec,
                            const double *x,
                            size_t x_len,
                            bool *out);

/**
 * Runs one in-tree verifier. On Violated the counterexample is copied to
 * `cex` when `cex_len` is at least the input dimension; `cex` may be null
 * to skip the copy.
 *
 * # Safety
 * Handles are live; `verdict` is writable; `cex` is null or has room for
 * `cex_len` doubles.
 */
enum NnvStatus nnv_verify(const struct NnvNetwork *net,
                          const struct NnvSpec *spec,
                          enum NnvVerifierKind kind,
                          uint64_t timeout_ms,
                          enum NnvVerdict *verdict,
                          double *cex,
                          size_t cex_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NNVFUZZ_H */
