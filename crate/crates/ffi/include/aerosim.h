#ifndef AEROSIM_H
#define AEROSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AerosimStatus {
  AEROSIM_STATUS_OK = 0,
  AEROSIM_STATUS_NULL_POINTER = 1,
  AEROSIM_STATUS_INVALID_ARGUMENT = 2,
  AEROSIM_STATUS_CONFIG_ERROR = 3,
  AEROSIM_STATUS_DOMAIN_ERROR = 4,
  AEROSIM_STATUS_IO_ERROR = 5,
  AEROSIM_STATUS_PARSE_ERROR = 6,
  AEROSIM_STATUS_RUNTIME_ERROR = 7,
  AEROSIM_STATUS_PANIC = 8,
} AerosimStatus;

/**
 * Parsed run configuration.
 */
typedef struct AerosimConfig AerosimConfig;

/**
 * Hexagonal network layout with wraparound.
 */
typedef struct AerosimLayout AerosimLayout;

/**
 * Sampled base-station array pattern.
 */
typedef struct AerosimPattern AerosimPattern;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until
 * the next call on the same thread.
 */
const char *aerosim_last_error(void);

/**
 * Free-space pathloss in dB.
 *
 * # Safety
 * `out_db` must be NULL or valid for one write.
 */
enum AerosimStatus aerosim_fspl_db(double d3d_m, double fc_ghz, double *out_db);

/**
 * Open-loop fractional uplink power in dBm for `n_rb` resource blocks.
 *
 * # Safety
 * `out_dbm` must be NULL or valid for one write.
 */
enum AerosimStatus aerosim_ul_tx_power_dbm(double p0_dbm,
                                           double alpha,
                                           double p_max_dbm,
                                           size_t n_rb,
                                           double pathloss_db,
                                           double *out_dbm);

/**
 * Flags a received-power profile as aerial when at least `k_cells` cells
 * lie within `delta_db` of the strongest.
 *
 * # Safety
 * `profile_dbm` must point to `len` readable doubles; `out_aerial` must be
 * NULL or valid for one write.
 */
enum AerosimStatus aerosim_classify_aerial(const double *profile_dbm,
                                           size_t len,
                                           double delta_db,
                                           size_t k_cells,
                                           bool *out_aerial);

/**
 * Baseline configuration with every section at its default.
 *
 * # Safety
 * `out_config` must be NULL or valid for one write.
 */
enum AerosimStatus aerosim_config_baseline(struct AerosimConfig **out_config);

/**
 * Parses and validates a TOML configuration file.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out_config` must be
 * NULL or valid for one write.
 */
enum AerosimStatus aerosim_config_load(const char *path, struct AerosimConfig **out_config);

/**
 * # Safety
 * `config` must be NULL or a handle from this library, freed once.
 */
void aerosim_config_free(struct AerosimConfig *config);

/**
 * Pathloss in dB under the configuration's channel model and carrier.
 *
 * # Safety
 * `config` must be NULL or a live handle; `out_db` must be NULL or valid
 * for one write.
 */
enum AerosimStatus aerosim_pathloss_db(const struct AerosimConfig *config,
                                       double d2d_m,
                                       double h_bs_m,
                                       double h_ut_m,
                                       bool los,
                                       double *out_db);

/**
 * Runs an experiment by name and writes its results into `out_dir`.
 *
 * # Safety
 * `config` must be NULL or a live handle; the strings must be NULL or
 * NUL-terminated.
 */
enum AerosimStatus aerosim_run_experiment(const struct AerosimConfig *config,
                                          const char *experiment,
                                          const char *out_dir);

/**
 * Wraparound layout with three cells per site.
 *
 * # Safety
 * `out_layout` must be NULL or valid for one write.
 */
enum AerosimStatus aerosim_layout_new(double isd_m,
                                      size_t n_sites,
                                      double bs_height_m,
                                      struct AerosimLayout **out_layout);

/**
 * # Safety
 * `layout` must be NULL or a handle from this library, freed once.
 */
void aerosim_layout_free(struct AerosimLayout *layout);

/**
 * # Safety
 * `layout` must be NULL or a live handle; `out_cells` must be NULL or
 * valid for one write.
 */
enum AerosimStatus aerosim_layout_n_cells(const struct AerosimLayout *layout, size_t *out_cells);

/**
 * Shortest distance between two points over the wraparound images.
 *
 * # Safety
 * `layout` must be NULL or a live handle; `out_m` must be NULL or valid
 * for one write.
 */
enum AerosimStatus aerosim_wrap_distance(const struct AerosimLayout *layout,
                                         double ax,
                                         double ay,
                                         double bx,
                                         double by,
                                         double *out_m);

/**
 * Array pattern of the default 8x1x2 panel with 6 degree tilt.
 *
 * # Safety
 * `out_pattern` must be NULL or valid for one write.
 */
enum AerosimStatus aerosim_pattern_default(struct AerosimPattern **out_pattern);

/**
 * # Safety
 * `pattern` must be NULL or a handle from this library, freed once.
 */
void aerosim_pattern_free(struct AerosimPattern *pattern);

/**
 * Interpolated array gain in dBi. `theta_deg` is zenith angle in [0, 180],
 * `phi_deg` azimuth relative to boresight.
 *
 * # Safety
 * `pattern` must be NULL or a live handle; `out_dbi` must be NULL or valid
 * for one write.
 */
enum AerosimStatus aerosim_pattern_gain(const struct AerosimPattern *pattern,
                                        double theta_deg,
                                        double phi_deg,
                                        double *out_dbi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AEROSIM_H */
