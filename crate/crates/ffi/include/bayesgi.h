#ifndef BAYESGI_H
#define BAYESGI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum BgiStatus {
  BGI_STATUS_OK = 0,
  BGI_STATUS_NULL_POINTER = 1,
  BGI_STATUS_INVALID_ARGUMENT = 2,
  BGI_STATUS_NOT_CONVERGED = 3,
  BGI_STATUS_ASSUMPTION_VIOLATED = 4,
  BGI_STATUS_OUT_OF_RANGE = 5,
  BGI_STATUS_PANIC = 6,
} BgiStatus;

/**
 * Prior over a single channel gain.
 */
typedef struct BgiDistribution BgiDistribution;

/**
 * Game parameters `(P, N0, K, k)`.
 */
typedef struct BgiParams BgiParams;

/**
 * Result of a repeated-game simulation.
 */
typedef struct BgiTrace BgiTrace;

/**
 * Equilibrium path of the two-stage game. Actions are 1 for share, 0 for spread.
 */
typedef struct BgiSbgiResult {
  int32_t primary_shares;
  int32_t secondary_shares;
  double primary_payoff;
  double secondary_payoff;
} BgiSbgiResult;

/**
 * Fixed point of the two-sided game. Infinite thresholds come back as `INFINITY`.
 */
typedef struct BgiTwoSidedResult {
  double kappa_hat;
  double g21_hat;
  double alpha;
  double g12_hat;
  double entry_probability;
  double max_residual;
  size_t iterations;
  int32_t converged;
  int32_t off_path;
} BgiTwoSidedResult;

typedef struct BgiTraceSummary {
  uint32_t horizon;
  /**
   * 1 when the reputation strategy is in play, 0 for repeated one-shot play.
   */
  int32_t reputation;
  double rho;
  double g_star;
  /**
   * Belief cutoff, NaN outside the reputation regime.
   */
  double d;
  /**
   * NaN outside the reputation regime.
   */
  double t_star;
  double total1;
  double total2;
  uint32_t deterred_periods;
  /**
   * Reverse index of the first entry, 0 if the secondary never enters.
   */
  uint32_t first_entry_period;
  double welfare;
  double benchmark_welfare;
  double efficiency_ratio;
} BgiTraceSummary;

/**
 * One period of play. `primary_action` is -1 on exit, 0 spread, 1 share.
 */
typedef struct BgiPeriod {
  uint32_t t_reverse;
  int32_t entered;
  int32_t primary_action;
  double mu_before;
  double mu_after;
  double payoff1;
  double payoff2;
} BgiPeriod;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or NULL. The pointer is
 * valid until the next `bgi_*` call on the same thread.
 */
const char *bgi_last_error(void);

/**
 * Static name of a status code.
 */
const char *bgi_status_name(enum BgiStatus status);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum BgiStatus bgi_params_new(double power,
                              double noise,
                              size_t subchannels,
                              double cost,
                              struct BgiParams **out);

/**
 * # Safety
 * `params` must be NULL or a handle from [`bgi_params_new`] not yet freed.
 */
void bgi_params_free(struct BgiParams *params);

/**
 * Spread/share indifference gain of a primary.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_g_star(const struct BgiParams *params, double *out);

/**
 * Secondary gain above which entry is no longer free of risk; `INFINITY` when `k = 0`.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_g12_tilde(const struct BgiParams *params, double *out);

/**
 * Belief cutoff below which a high-gain secondary enters.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_entry_cutoff(const struct BgiParams *params, double g12, double *out);

/**
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_sbgi_equilibrium(const struct BgiParams *params,
                                    double g12,
                                    double g21,
                                    struct BgiSbgiResult *out);

/**
 * Parses a prior literal such as `uniform(0,1)`, `texp(2,0,inf)`,
 * `point(0.7)` or `discrete(0.1:0.5,0.9:0.5)`.
 *
 * # Safety
 * `literal` must be a NUL-terminated string and `out` writable.
 */
enum BgiStatus bgi_distribution_parse(const char *literal, struct BgiDistribution **out);

/**
 * # Safety
 * `dist` must be NULL or a handle from [`bgi_distribution_parse`] not yet freed.
 */
void bgi_distribution_free(struct BgiDistribution *dist);

/**
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_distribution_cdf(const struct BgiDistribution *dist, double x, double *out);

/**
 * Solves the two-sided belief fixed point with default settings. A solve
 * that stalls returns [`BgiStatus::NotConverged`] and still fills `out`.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum BgiStatus bgi_solve_two_sided(const struct BgiParams *params,
                                   const struct BgiDistribution *prior_g12,
                                   const struct BgiDistribution *prior_g21,
                                   struct BgiTwoSidedResult *out);

/**
 * Simulates `horizon` periods of the repeated entry game.
 *
 * # Safety
 * `params` and `prior_g21` must be live handles and `out` writable.
 */
enum BgiStatus bgi_simulate(const struct BgiParams *params,
                            uint32_t horizon,
                            double g12,
                            double g21,
                            const struct BgiDistribution *prior_g21,
                            uint64_t seed,
                            struct BgiTrace **out);

/**
 * # Safety
 * `trace` must be NULL or a handle from [`bgi_simulate`] not yet freed.
 */
void bgi_trace_free(struct BgiTrace *trace);

/**
 * Number of periods; 0 for a NULL handle.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t bgi_trace_len(const struct BgiTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_trace_summary(const struct BgiTrace *trace, struct BgiTraceSummary *out);

/**
 * Period `index` in play order (0 is the first period, reverse index `T`).
 *
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_trace_period(const struct BgiTrace *trace, size_t index, struct BgiPeriod *out);

/**
 * Per-period trace as CSV. Release with [`bgi_string_free`].
 *
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum BgiStatus bgi_trace_csv(const struct BgiTrace *trace, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void bgi_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BAYESGI_H */
