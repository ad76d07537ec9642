/* C ABI for the thermovisco solver.
 *
 * All functions returning int use these status codes, which mirror the
 * CLI exit codes:
 *   0  TV_OK              success (for studies: the study passed)
 *   1  TV_ERR_CHECK       a quantitative check or study criterion failed
 *   2  TV_ERR_CONFIG      invalid configuration or study ladder
 *   3  TV_ERR_SOLVER      solver failure (line search, Newton, singular
 *                         system, non-positive determinant, negative
 *                         temperature)
 *   4  TV_ERR_ARGUMENT    null pointer or malformed argument
 *
 * On any non-zero status a human-readable message is stored per thread
 * and can be retrieved with tv_last_error().
 */
#ifndef THERMOVISCO_H
#define THERMOVISCO_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    TV_OK = 0,
    TV_ERR_CHECK = 1,
    TV_ERR_CONFIG = 2,
    TV_ERR_SOLVER = 3,
    TV_ERR_ARGUMENT = 4
};

/* Study kinds accepted by tv_study(). */
enum {
    TV_STUDY_TAU = 0,     /* time-step refinement (Cauchy) study */
    TV_STUDY_EPSILON = 1, /* linearization-limit study            */
    TV_STUDY_COMMUTE = 2, /* limit-commutativity study            */
    TV_STUDY_SCALING = 3  /* a-priori scaling-exponent study      */
};

/* Opaque, thread-confined configuration handle. */
typedef struct TvConfig TvConfig;

/* Linearized material tensors at the reference state.  Rank-4 tensors are
 * stored row-major over matrix indices: cw[(i*2+j)*4 + k*2 + l] is the
 * component mapping strain (k,l) to stress (i,j).  Matrices are
 * b_alpha[i*2+j], k0[i*2+j]. */
typedef struct TvLinearTensors {
    double cw[16];   /* elasticity tensor                         */
    double cd[16];   /* viscosity tensor                          */
    double b_alpha[4]; /* thermal coupling; zero unless alpha == 1 */
    double k0[4];    /* reference conductivity                    */
    double c_v_bar;  /* reference heat capacity                   */
} TvLinearTensors;

/* Copies the most recent error message on this thread into buf
 * (NUL-terminated, truncated to cap bytes) and returns the full message
 * length in bytes.  buf may be NULL to query the length. */
size_t tv_last_error(char *buf, size_t cap);

/* Parses and validates a TOML configuration string.  Returns NULL on
 * error; free the handle with tv_config_free(). */
TvConfig *tv_config_parse(const char *text);

void tv_config_free(TvConfig *cfg);

/* Runs the constitutive assumption battery on the configured material. */
int tv_material_check(const TvConfig *cfg);

/* Fills *out with the linearized tensors at temperature exponent alpha
 * (alpha must lie in [1, 2]). */
int tv_linearized_tensors(const TvConfig *cfg, double alpha,
                          TvLinearTensors *out);

/* Runs one simulation and writes the artifact directory out_dir
 * (config.resolved.toml, ledger.csv, snapshots, summary.json).
 * use_linear != 0 selects the linearized scheme. */
int tv_simulate(const TvConfig *cfg, int use_linear, const char *out_dir);

/* Runs a convergence study over the ladders in the configuration and
 * writes study.json / study.csv into out_dir.  Returns TV_OK iff the
 * study's acceptance thresholds hold. */
int tv_study(const TvConfig *cfg, int kind, const char *out_dir);

#ifdef __cplusplus
}
#endif

#endif /* THERMOVISCO_H */
