#ifndef RADGUARD_H
#define RADGUARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>

typedef enum RgDomain {
  RG_DOMAIN_INTERVAL = 0,
  RG_DOMAIN_ZONOTOPE = 1,
} RgDomain;

// Result code of every fallible call.
typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_ARGUMENT = 2,
  RG_STATUS_PARSE_ERROR = 3,
  RG_STATUS_SHAPE_MISMATCH = 4,
  RG_STATUS_DATA_ERROR = 5,
  RG_STATUS_IO_ERROR = 6,
  RG_STATUS_INSUFFICIENT_SAMPLE = 7,
  RG_STATUS_DEGENERATE_SAMPLE = 8,
  RG_STATUS_INVALID_UTF8 = 9,
  RG_STATUS_PANIC = 10,
} RgStatus;

// Opaque network handle.
typedef struct RgNetwork RgNetwork;

// Opaque sliding-window validator handle.
typedef struct RgWindow RgWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or null if the
// last call succeeded. Valid until the next call on this thread.
const char *rg_last_error(void);

// Static name of a status code.
const char *rg_status_name(enum RgStatus status);

// Loads a network from a weight file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum RgStatus rg_network_load(const char *path, struct RgNetwork **out_network);

// Parses a network from weight-format JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum RgStatus rg_network_from_json(const char *json, struct RgNetwork **out_network);

// Releases a network. Null is ignored.
//
// # Safety
// `network` must come from `rg_network_load`/`rg_network_from_json` and not
// have been freed.
void rg_network_free(struct RgNetwork *network);

// Number of input values (0 for a null handle).
//
// # Safety
// `network` must be null or a live handle.
size_t rg_network_input_len(const struct RgNetwork *network);

// Number of output classes (0 for a null handle).
//
// # Safety
// `network` must be null or a live handle.
size_t rg_network_label_count(const struct RgNetwork *network);

// Forward pass. Writes `label_count` scores to `scores` (if non-null) and
// the predicted label to `out_label`.
//
// # Safety
// `input` must hold `input_len` values, `scores` (if non-null) `scores_len`
// writable values, `out_label` must be writable.
enum RgStatus rg_forward(const struct RgNetwork *network,
                         const double *input,
                         size_t input_len,
                         double *scores,
                         size_t scores_len,
                         size_t *out_label);

// Single robustness query: is the label constant on the clipped L∞ ball of
// radius `delta` around `input`?
//
// # Safety
// `input` must hold `input_len` values; `out_robust` must be writable.
enum RgStatus rg_is_robust(const struct RgNetwork *network,
                           const double *input,
                           size_t input_len,
                           double delta,
                           enum RgDomain domain,
                           bool *out_robust);

// Approximate robustness radius by bisection on `[0, up]` down to width `tol`.
//
// # Safety
// `input` must hold `input_len` values; `out_radius` must be writable;
// `out_probes` may be null.
enum RgStatus rg_approximate_radius(const struct RgNetwork *network,
                                    const double *input,
                                    size_t input_len,
                                    double up,
                                    double tol,
                                    enum RgDomain domain,
                                    double *out_radius,
                                    size_t *out_probes);

// Threshold validator: accepts iff the input is certified robust at `theta`.
//
// # Safety
// `input` must hold `input_len` values; `out_accept` must be writable.
enum RgStatus rg_threshold_validate(const struct RgNetwork *network,
                                    const double *input,
                                    size_t input_len,
                                    double theta,
                                    enum RgDomain domain,
                                    bool *out_accept);

// Creates a sliding-window validator from the last `window_size` of
// `count` radii of known-valid inputs.
//
// # Safety
// `radii` must hold `count` values; `out_window` must be writable.
enum RgStatus rg_window_new(const double *radii,
                            size_t count,
                            size_t window_size,
                            double sigma0,
                            double sigma1,
                            struct RgWindow **out_window);

// Feeds one radius to the window. Accepted radii enter the window.
//
// # Safety
// `window` must be a live handle; `out_accept` must be writable.
enum RgStatus rg_window_step(struct RgWindow *window, double radius, bool *out_accept);

// Certifies the radius of `input` and feeds it to the window in one call.
//
// # Safety
// As for [`rg_approximate_radius`] and [`rg_window_step`]; `out_radius`
// may be null.
enum RgStatus rg_window_validate(struct RgWindow *window,
                                 const struct RgNetwork *network,
                                 const double *input,
                                 size_t input_len,
                                 double up,
                                 double tol,
                                 enum RgDomain domain,
                                 bool *out_accept,
                                 double *out_radius);

// Number of radii currently in the window (0 for a null handle).
//
// # Safety
// `window` must be null or a live handle.
size_t rg_window_len(const struct RgWindow *window);

// Releases a window. Null is ignored.
//
// # Safety
// `window` must come from `rg_window_new` and not have been freed.
void rg_window_free(struct RgWindow *window);

// Omnibus normality p-value of `count` samples (at least 20, not all equal).
//
// # Safety
// `samples` must hold `count` values; `out_p` must be writable.
enum RgStatus rg_normality_pvalue(const double *samples, size_t count, double *out_p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RADGUARD_H */
