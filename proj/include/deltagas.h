/* deltagas: imaginary-time propagator of the one-dimensional contact Bose gas.
 *
 * C interface to the evaluator library. All functions return a dg_status;
 * on failure dg_last_error() describes the problem (thread-local).
 */
#ifndef DELTAGAS_H
#define DELTAGAS_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dg_status {
    DG_OK = 0,
    DG_ERR_NUMERICAL = 1,
    DG_ERR_INVALID = 2,
    DG_ERR_RESOURCE = 3
} dg_status;

/* Opaque evaluation request: particle configuration plus solver settings. */
typedef struct dg_query dg_query;

typedef struct dg_result {
    double value_re;
    double value_im;
    double error_estimate;
    double imag_residue;
    int64_t evaluations;
    char method[16];
} dg_result;

typedef struct dg_mc_result {
    double estimate;   /* bandwidth-extrapolated, endpoint-symmetrized */
    double std_error;
    double mean_h;     /* plain estimates at h, h/2, h/4 */
    double mean_h2;
    double mean_h4;
    int64_t paths;
} dg_mc_result;

const char* dg_version(void);
/* Message for the most recent failing call on this thread. */
const char* dg_last_error(void);

/* x and y are weakly increasing arrays of length n. The query owns copies. */
dg_query* dg_query_new(int n, const double* x, const double* y, double t, double kappa);
void dg_query_free(dg_query* q);

/* nodes = 0, half_width = 0 and tol = 0 keep the automatic choices. */
dg_status dg_query_set_grid(dg_query* q, int nodes, double half_width, double tol);
/* Contour offsets of the cluster expansion: nonzero selects mu_j = 0,
 * default is the symmetric choice mu_j = -(n_j - 1)/2. */
dg_status dg_query_set_mu_zero(dg_query* q, int use_zero);
/* Contour fractions for the partition form (len >= n entries in [0,1),
 * pairwise distinct; len = 0 restores the defaults j/(M+1)). */
dg_status dg_query_set_eps(dg_query* q, const double* eps, int len);
/* Monte Carlo settings; bandwidth <= 0 keeps the default 0.05*sqrt(t). */
dg_status dg_query_set_mc(dg_query* q, int64_t paths, int steps, double bandwidth,
                          uint64_t seed, int antithetic);
/* Relative-coordinate solver steps; values <= 0 keep the defaults. */
dg_status dg_query_set_pde(dg_query* q, double du, double dt);

/* method: tw | eigen | thm1 | thm2 | partition | zero | free | pde | mc */
dg_status dg_eval(const dg_query* q, const char* method, dg_result* out);

/* Endpoint-symmetrized bridge-sampling estimate with bandwidth diagnostics. */
dg_status dg_eval_mc(const dg_query* q, dg_mc_result* out);

/* Least-squares slope of -log(P sqrt(t)) at x = y = 0 over t_grid. */
dg_status dg_decay_rate(int n, double kappa, const char* method, const double* t_grid,
                        int num_t, double* slope);

/* n = 2 only: n! * integral of P_t(x, y) over the ordered sector. */
dg_status dg_completeness(double kappa, double t, const double* y, int n, double* integral);

/* suite: identities | poles | completeness | decay. *report_json receives a
 * malloc'd JSON document (free with dg_string_free); *pass receives 0/1. */
dg_status dg_verify(const char* suite, uint64_t seed, char** report_json, int* pass);
void dg_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* DELTAGAS_H */
