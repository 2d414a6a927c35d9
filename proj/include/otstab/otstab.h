/* C interface to the otstab library. All functions are thread-safe on
 * distinct handles; otstab_last_error() is per thread. */
#ifndef OTSTAB_H
#define OTSTAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(OTSTAB_BUILDING)
#define OTSTAB_API __attribute__((visibility("default")))
#else
#define OTSTAB_API
#endif

typedef enum otstab_status {
    OTSTAB_OK = 0,
    OTSTAB_INVALID_ARGUMENT = 1,
    OTSTAB_INVALID_GEOMETRY = 2,
    OTSTAB_DUPLICATE_POINT = 3,
    OTSTAB_ORIGIN_DEGENERACY = 4,
    OTSTAB_SHAPE_MISMATCH = 5,
    OTSTAB_ILL_POSED = 6,
    OTSTAB_MARGIN = 7,
    OTSTAB_ADMISSIBILITY = 8,
    OTSTAB_ALIASING = 9,
    OTSTAB_AMBIGUOUS_MATCHING = 10,
    OTSTAB_INFEASIBLE_SPEC = 11,
    OTSTAB_IMBALANCE = 12,
    OTSTAB_ORACLE_SIZE = 13,
    OTSTAB_INFEASIBLE_DUALS = 14,
    OTSTAB_RHO_TOO_SMALL = 15,
    OTSTAB_ILL_CONDITIONED = 16,
    OTSTAB_OUT_OF_BAND = 17,
    OTSTAB_INVALID_CONFIG = 18,
    OTSTAB_IO = 19,
    OTSTAB_SOLVER_STAGNATION = 20,
    OTSTAB_INTERNAL = 99
} otstab_status;

typedef struct otstab_config otstab_config;
typedef struct otstab_report otstab_report;

typedef struct otstab_summary {
    double max_ratio;   /* max T_c / boundary misfit over successful trials */
    double min_margin;  /* NaN when no trial succeeded */
    size_t failures;    /* failed trials plus trials whose chain does not hold */
    double runtime_s;
    size_t trials;
    int all_chain_ok;
    double certificate_line_log10;
    double C1;
    double scale_log10; /* log10 of C3, C4 or C5 after calibration */
} otstab_summary;

typedef struct otstab_trial {
    size_t trial;
    uint64_t seed;
    int ok;        /* 0 when a stage raised an error, see otstab_report_trial_error */
    int chain_ok;
    double T_c;
    double J;
    double R1_minus_R2;
    double atom_level;
    double boundary_misfit;
    double bound_formula;
    double certificate_log10;
    double empirical_ratio;
    double margin;
    double identity_residual;
    double transfer_residual;
    double eta1, eta2, R0, r;
    double sigma_min;
} otstab_trial;

OTSTAB_API const char* otstab_version(void);
OTSTAB_API const char* otstab_status_name(otstab_status status);
/* Message of the last failing call on this thread ("" when none). */
OTSTAB_API const char* otstab_last_error(void);

OTSTAB_API otstab_status otstab_config_from_file(const char* path, otstab_config** out);
/* source names the text in error messages ("<string>" when NULL). */
OTSTAB_API otstab_status otstab_config_from_string(const char* json, const char* source, otstab_config** out);
/* Defaults of every block. */
OTSTAB_API otstab_status otstab_config_default(otstab_config** out);
/* Integer keys: trials, seed, threads, nx, ny, nt, K, M, slots, max_iter. */
OTSTAB_API otstab_status otstab_config_set_int(otstab_config* cfg, const char* key, int64_t value);
/* Real keys: T, tstar, slack, epsilon, terminal_tol, stop_terminal, eta1_min, eta2_min, margin. */
OTSTAB_API otstab_status otstab_config_set_double(otstab_config* cfg, const char* key, double value);
/* String keys: mode, output, kappa, q, cost. Switching the mode between
 * parabolic and the others also switches a default cost kind. */
OTSTAB_API otstab_status otstab_config_set_string(otstab_config* cfg, const char* key, const char* value);
/* Reads "output" and "threads" back for callers that need them. */
OTSTAB_API const char* otstab_config_output(const otstab_config* cfg);
/* 16 hex digits plus terminator. */
OTSTAB_API otstab_status otstab_config_hash(const otstab_config* cfg, char out[17]);
/* Canonical JSON of the effective configuration; free with otstab_string_free. */
OTSTAB_API otstab_status otstab_config_json(const otstab_config* cfg, char** out);
OTSTAB_API void otstab_config_free(otstab_config* cfg);

/* Stability experiment of the configured mode. Trial-level errors do not
 * fail the call; they are recorded in the report. */
OTSTAB_API otstab_status otstab_run(const otstab_config* cfg, otstab_report** out);
OTSTAB_API otstab_status otstab_report_summary(const otstab_report* rep, otstab_summary* out);
OTSTAB_API size_t otstab_report_trial_count(const otstab_report* rep);
OTSTAB_API otstab_status otstab_report_trial(const otstab_report* rep, size_t index, otstab_trial* out);
OTSTAB_API const char* otstab_report_trial_error(const otstab_report* rep, size_t index);
/* report.csv, report.json, summary.json, scatter.svg and manifest.json. */
OTSTAB_API otstab_status otstab_report_write(const otstab_report* rep, const char* dir);
/* CSV text of the report; free with otstab_string_free. */
OTSTAB_API otstab_status otstab_report_csv(const otstab_report* rep, char** out);
OTSTAB_API void otstab_report_free(otstab_report* rep);

/* One module pipeline: forward-elliptic, forward-parabolic, ot, cgo-basis,
 * control, calibrate-constants or stability. out_dir may be NULL (no files).
 * check_status receives 0 when the pipeline's own checks pass, 1 otherwise. */
OTSTAB_API otstab_status otstab_pipeline(const otstab_config* cfg, const char* name, const char* out_dir,
                                         char** summary_json, int* check_status);
OTSTAB_API void otstab_string_free(char* s);

/* Exact discrete OT between a (m) and b (n) with a row-major m x n cost.
 * plan (m*n), phi (m) and psi (n) may be NULL. */
OTSTAB_API otstab_status otstab_ot_solve(const double* a, size_t m, const double* b, size_t n, const double* cost,
                                         double* total, double* plan, double* phi, double* psi);
/* Enumeration over all basic feasible plans; m, n <= 4. */
OTSTAB_API otstab_status otstab_ot_brute_force(const double* a, size_t m, const double* b, size_t n,
                                               const double* cost, double* total);
/* Row-major n x n complex matrix given by real and imaginary parts (im may be NULL). */
OTSTAB_API otstab_status otstab_smallest_singular_value(const double* re, const double* im, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
