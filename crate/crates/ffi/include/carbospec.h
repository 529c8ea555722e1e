#ifndef CARBOSPEC_H
#define CARBOSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_VALIDATION = 3,
  CS_STATUS_IO = 4,
  CS_STATUS_DIVERGENCE = 5,
  CS_STATUS_PANIC = 6,
} CsStatus;

// Opaque fitted model.
typedef struct CsModel CsModel;

typedef struct CsMetrics {
  double r2;
  double rmse;
  // Population standard deviation of the observations over RMSE.
  double rpd;
  double rpiq;
  // 0 Poor, 1 Moderate, 2 Good, 3 Excellent.
  int32_t band;
} CsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library from the same thread.
const char *cs_last_error_message(void);

// Load a model file. On success `*out` owns a handle.
//
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CsStatus cs_model_load(const char *path, struct CsModel **out);

// Release a handle from [`cs_model_load`]. Null is ignored.
//
// `model` must be null or a live handle not used afterwards.
void cs_model_free(struct CsModel *model);

// Container kind tag (1 PLSR, 2 Cubist, 3 LS-SVM, 4 MLP, 5 CNN), 0 for null.
//
// `model` must be null or a live handle.
uint8_t cs_model_kind(const struct CsModel *model);

// Spectral points per input row, 0 for null.
//
// `model` must be null or a live handle.
uintptr_t cs_model_n_points(const struct CsModel *model);

// Predict from `n_rows` row-major spectra of `n_cols` points each, given
// in the kind and on the grid the model was trained with. Writes `n_rows`
// values to `out`.
//
// `model` must be a live handle, `spectra` must hold `n_rows · n_cols`
// values and `out` room for `n_rows`.
enum CsStatus cs_model_predict(const struct CsModel *model,
                               const double *spectra,
                               uintptr_t n_rows,
                               uintptr_t n_cols,
                               double *out);

// R², RMSE, RPD, RPIQ and quality band for `n` pairs.
//
// `obs` and `pred` must hold `n` values; `out` must be valid.
enum CsStatus cs_metrics(const double *obs, const double *pred, uintptr_t n, struct CsMetrics *out);

// Empirical p-Wasserstein distance between two samples.
//
// `x` must hold `nx` values, `y` `ny` values; `out` must be valid.
enum CsStatus cs_wasserstein(const double *x,
                             uintptr_t nx,
                             const double *y,
                             uintptr_t ny,
                             uint32_t p,
                             double *out);

// Savitzky–Golay filter of `n` samples spaced `step` apart; writes `n`
// values to `out`.
//
// `x` must hold `n` values and `out` room for `n`.
enum CsStatus cs_savitzky_golay(const double *x,
                                uintptr_t n,
                                uintptr_t window,
                                uintptr_t polyorder,
                                uintptr_t deriv,
                                double step,
                                double *out);

// Total carbonates from crystalline content and crystalline index.
//
// `out` must be valid.
enum CsStatus cs_xrd_total(double crystalline_wt_pct, double crystalline_index, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CARBOSPEC_H */
