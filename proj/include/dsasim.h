/* C interface to the event-based dynamic spectrum access simulator.
 *
 * All functions return DSA_OK (0) on success; on failure they return a
 * nonzero code and a diagnostic is available via dsa_last_error() until
 * the next call on the same thread.
 */
#ifndef DSASIM_H
#define DSASIM_H

#ifdef __cplusplus
extern "C" {
#endif

enum dsa_status {
    DSA_OK = 0,
    DSA_ERR_ARGUMENT = 1,  /* null handle or malformed input */
    DSA_ERR_CONFIG = 2,    /* unknown key or invariant violation */
    DSA_ERR_IO = 3,        /* unreadable config or unwritable output */
    DSA_ERR_INTERNAL = 4
};

typedef struct dsa_config dsa_config;

/* Fresh configuration holding the default experiment parameters. */
dsa_config* dsa_config_new(void);
void dsa_config_free(dsa_config* config);

/* Set one field by its kebab-case key, e.g. ("mu", "0.9"),
 * ("algorithm", "madspg,tdma"), ("topology", "1,2;3;4;1"). */
int dsa_config_set(dsa_config* config, const char* key, const char* value);

/* Load a plain-text `key = value` file; later calls to dsa_config_set
 * override loaded values. */
int dsa_config_load_file(dsa_config* config, const char* path);

/* Train/evaluate a single (mu, algorithm) cell and write the per-episode
 * CSV to csv_path. Prints a one-line summary per cell to stdout. */
int dsa_run(const dsa_config* config, const char* csv_path);

/* Sweep the configured mu grid over all configured algorithms. */
int dsa_sweep(const dsa_config* config, const char* csv_path);

/* Run the built-in oracle/invariant suite; returns DSA_OK when every
 * check passes. Prints one line per check. */
int dsa_selftest(void);

/* Diagnostic for the most recent failing call on this thread. */
const char* dsa_last_error(void);

const char* dsa_version(void);

#ifdef __cplusplus
}
#endif

#endif /* DSASIM_H */
