#ifndef NANDSCRUB_H
#define NANDSCRUB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The simulator rejected the operation (full device, unmapped page, ...).
   */
  NS_STATUS_DOMAIN = 3,
  /**
   * Destruction ran but some page still yields its payload.
   */
  NS_STATUS_VERIFICATION_FAILED = 4,
  /**
   * The requested figure has no numeric value for this scheme.
   */
  NS_STATUS_NOT_APPLICABLE = 5,
  NS_STATUS_PANIC = 6,
} NsStatus;

/**
 * Opaque simulator handle.
 */
typedef struct NsSimulator NsSimulator;

typedef struct NsCostParams {
  double a;
  double b;
  double t_pgm;
  double t_rdg;
  double t_sdg;
  double t_pow;
  double t_slcp;
  double t_ddp;
  double t_oneshot;
} NsCostParams;

typedef struct NsGcReport {
  uint64_t moved;
  uint64_t residual;
  /**
   * Block that received the copies, or -1 when nothing was moved.
   */
  int64_t destination;
} NsGcReport;

typedef struct NsScanResult {
  uint64_t mapped_hits;
  uint64_t unmapped_hits;
} NsScanResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next library call on the same thread.
 */
const char *ns_last_error_message(void);

struct NsCostParams ns_cost_params_default(void);

/**
 * Builds a fresh device. `config_json` may be NULL for the default
 * configuration.
 *
 * # Safety
 * `config_json` must be NULL or a valid C string; `out` must be writable.
 */
enum NsStatus ns_sim_new(const char *config_json, struct NsSimulator **out);

/**
 * Restores a device from a dump produced by [`ns_sim_to_json`].
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
enum NsStatus ns_sim_from_json(const char *json, struct NsSimulator **out);

/**
 * # Safety
 * `sim` must be NULL or a handle from this library not yet freed.
 */
void ns_sim_free(struct NsSimulator *sim);

/**
 * Serializes the device. Free the result with [`ns_string_free`].
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum NsStatus ns_sim_to_json(struct NsSimulator *sim, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void ns_string_free(char *s);

/**
 * Host write of ASCII `text` to `lpn`. The physical location is stored in
 * `out_block`/`out_page` when they are not NULL.
 *
 * # Safety
 * `sim` must be a live handle and `text` a valid C string.
 */
enum NsStatus ns_sim_write(struct NsSimulator *sim,
                           uint64_t lpn,
                           const char *text,
                           bool privacy,
                           uint32_t *out_block,
                           uint32_t *out_page);

/**
 * Out-of-place update of a mapped `lpn`.
 *
 * # Safety
 * `sim` must be a live handle and `text` a valid C string.
 */
enum NsStatus ns_sim_update(struct NsSimulator *sim,
                            uint64_t lpn,
                            const char *text,
                            uint32_t *out_block,
                            uint32_t *out_page);

/**
 * Garbage-collects `count` victim blocks without erasing them.
 *
 * # Safety
 * `victims` must point at `count` readable values (or be NULL with count 0).
 */
enum NsStatus ns_sim_gc(struct NsSimulator *sim,
                        const uint32_t *victims,
                        size_t count,
                        struct NsGcReport *out);

/**
 * Destroys every flagged invalid page with `scheme` ("po", "fold", "slc" or
 * "ddp"), using the reference states and DDP parameters from the device
 * configuration. The number of treated pages goes to `out_pages`.
 *
 * # Safety
 * `sim` must be a live handle and `scheme` a valid C string.
 */
enum NsStatus ns_sim_destroy(struct NsSimulator *sim, const char *scheme, size_t *out_pages);

/**
 * Forensic scan of every page for the ASCII `payload`.
 *
 * # Safety
 * `sim` must be a live handle and `payload` a valid C string.
 */
enum NsStatus ns_sim_scan(struct NsSimulator *sim, const char *payload, struct NsScanResult *out);

/**
 * Destruction time after a GC of `m` valid and `n` invalid pages. `params`
 * may be NULL for the defaults. Block erase reports `NS_STATUS_NOT_APPLICABLE`
 * with its lower bound written to `out`.
 *
 * # Safety
 * `scheme` must be a valid C string; `params` NULL or readable.
 */
enum NsStatus ns_cost_gc_time(const char *scheme,
                              uint64_t m,
                              uint64_t n,
                              const struct NsCostParams *params,
                              double *out);

/**
 * Destruction time of a single-page update after `m` GC copies.
 *
 * # Safety
 * `scheme` must be a valid C string; `params` NULL or readable.
 */
enum NsStatus ns_cost_update_time(const char *scheme,
                                  uint64_t m,
                                  const struct NsCostParams *params,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NANDSCRUB_H */
