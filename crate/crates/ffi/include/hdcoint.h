#ifndef HDCOINT_H
#define HDCOINT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared by every entry point.
 */
typedef enum HdcStatus {
  HDC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  HDC_STATUS_NULL_POINTER = 1,
  /**
   * Invalid argument or configuration.
   */
  HDC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data rejected (ingestion, panel invariants, too few observations).
   */
  HDC_STATUS_DATA = 3,
  /**
   * Numerical failure (singular system, non-convergence).
   */
  HDC_STATUS_NUMERICAL = 4,
  /**
   * Index out of range or value unavailable.
   */
  HDC_STATUS_OUT_OF_RANGE = 5,
  /**
   * Strings must be valid UTF-8.
   */
  HDC_STATUS_UTF8 = 6,
  /**
   * Internal error; the library state is unchanged.
   */
  HDC_STATUS_PANIC = 7,
} HdcStatus;

/**
 * Integration-order classification of a panel.
 */
typedef struct HdcClassification HdcClassification;

/**
 * Result of a rolling forecast evaluation.
 */
typedef struct HdcForecast HdcForecast;

/**
 * `T x N` panel of observations.
 */
typedef struct HdcPanel HdcPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread (empty if none). The pointer is
 * valid until the next failing call on the same thread.
 */
const char *hdc_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library or be null.
 */
void hdc_string_free(char *s);

/**
 * Panel from `t * n` row-major values (NaN marks leading missing values).
 *
 * # Safety
 * `values` must point to `t * n` doubles; `out` must be writable.
 */
enum HdcStatus hdc_panel_new(const double *values, size_t t, size_t n, struct HdcPanel **out);

/**
 * Panel read from a CSV file (dates in the first column, optional code row).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HdcStatus hdc_panel_from_csv(const char *path, struct HdcPanel **out);

/**
 * Simulate `t` observations of a rank-`r` VECM with `n` series.
 *
 * # Safety
 * `out` must be writable.
 */
enum HdcStatus hdc_simulate_vecm(size_t n,
                                 size_t r,
                                 double speed,
                                 size_t t,
                                 uint64_t seed,
                                 struct HdcPanel **out);

/**
 * # Safety
 * `panel` must be a live handle; the out-pointers must be writable.
 */
enum HdcStatus hdc_panel_shape(const struct HdcPanel *panel, size_t *t, size_t *n);

/**
 * Copy observation `(row, col)`.
 *
 * # Safety
 * `panel` must be a live handle; `value` must be writable.
 */
enum HdcStatus hdc_panel_value(const struct HdcPanel *panel, size_t row, size_t col, double *value);

/**
 * # Safety
 * `panel` must come from this library or be null; it is invalid afterwards.
 */
void hdc_panel_free(struct HdcPanel *panel);

/**
 * ADF t-statistic with `lags` augmentation lags; `det` is 0 none, 1 mean, 2 trend.
 *
 * # Safety
 * `x` must point to `len` doubles; `stat` must be writable.
 */
enum HdcStatus hdc_adf_stat(const double *x, size_t len, uint32_t det, size_t lags, double *stat);

/**
 * Cointegration rank chosen by information criterion (`p` short-run lags).
 *
 * # Safety
 * `panel` must be a live handle; `rank` must be writable.
 */
enum HdcStatus hdc_select_rank(const struct HdcPanel *panel,
                               size_t p,
                               size_t rmax,
                               uint32_t det,
                               size_t *rank);

/**
 * Classify every series. `method` is "iadf", "bsqt", "bfdr" or "naive";
 * `strategy` is 1 or 2.
 *
 * # Safety
 * `panel` must be a live handle, `method` a NUL-terminated string and `out` writable.
 */
enum HdcStatus hdc_classify(const struct HdcPanel *panel,
                            const char *method,
                            uint32_t strategy,
                            double alpha,
                            double gamma,
                            size_t reps,
                            uint64_t seed,
                            struct HdcClassification **out);

/**
 * Integration order (0, 1 or 2) of series `index`.
 *
 * # Safety
 * `cls` must be a live handle; `order` must be writable.
 */
enum HdcStatus hdc_classification_order(const struct HdcClassification *cls,
                                        size_t index,
                                        uint32_t *order);

/**
 * Full classification report as JSON (free with [`hdc_string_free`]).
 *
 * # Safety
 * `cls` must be a live handle; `json` must be writable.
 */
enum HdcStatus hdc_classification_json(const struct HdcClassification *cls, char **json);

/**
 * # Safety
 * `cls` must come from this library or be null; it is invalid afterwards.
 */
void hdc_classification_free(struct HdcClassification *cls);

/**
 * Rolling forecast evaluation configured by a JSON document with the
 * harness configuration fields (window, step, horizons, targets, methods,
 * benchmark, orders, log, mcs_alpha, mcs_gamma, mcs_reps, seed).
 *
 * # Safety
 * `panel` must be a live handle, `config_json` a NUL-terminated string and `out` writable.
 */
enum HdcStatus hdc_forecast(const struct HdcPanel *panel,
                            const char *config_json,
                            struct HdcForecast **out);

/**
 * Relative MSFE of `method` for the given target and horizon (by index in
 * the configuration). `HDC_STATUS_OUT_OF_RANGE` if unavailable.
 *
 * # Safety
 * `fc` must be a live handle; `value` must be writable.
 */
enum HdcStatus hdc_forecast_rel_msfe(const struct HdcForecast *fc,
                                     size_t target,
                                     size_t horizon,
                                     size_t method,
                                     double *value);

/**
 * Full report as JSON (free with [`hdc_string_free`]).
 *
 * # Safety
 * `fc` must be a live handle; `json` must be writable.
 */
enum HdcStatus hdc_forecast_json(const struct HdcForecast *fc, char **json);

/**
 * # Safety
 * `fc` must come from this library or be null; it is invalid afterwards.
 */
void hdc_forecast_free(struct HdcForecast *fc);

/**
 * Model confidence set of `n x m` row-major losses. Writes one membership
 * flag (0/1) and one MCS p-value per method.
 *
 * # Safety
 * `losses` must point to `n * m` doubles; `members` and `pvalues` to `m` writable slots.
 */
enum HdcStatus hdc_mcs(const double *losses,
                       size_t n,
                       size_t m,
                       double alpha,
                       double gamma,
                       size_t reps,
                       uint64_t seed,
                       uint8_t *members,
                       double *pvalues);

/**
 * Library version as a static string.
 */
const char *hdc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HDCOINT_H */
