#ifndef FOCKCHAOS_H
#define FOCKCHAOS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FC_API __declspec(dllexport)
#else
#define FC_API __attribute__((visibility("default")))
#endif

typedef enum {
    FC_OK = 0,
    FC_INVALID_ARGUMENT = 1,
    FC_CONFIG = 2,
    FC_CAPACITY = 3,
    FC_NUMERIC = 4,
    FC_DIMENSION = 5,
    FC_INTERNAL = 9
} fc_status;

typedef enum { FC_RING = 0, FC_OPEN_CHAIN = 1 } fc_geometry;

typedef struct fc_basis fc_basis;
typedef struct fc_operator fc_operator;

typedef struct {
    int L;
    double J;
    double U;
    double phi;
    const double *eps; /* L entries or NULL */
    fc_geometry geometry;
} fc_lattice;

/* Message of the last failing call on this thread; empty after success. */
FC_API const char *fc_last_error(void);
FC_API const char *fc_version(void);
FC_API fc_status fc_set_threads(int n);

/* Fock basis of N bosons on L sites, descending lexicographic order. cap = 0 uses the default. */
FC_API fc_status fc_basis_create(int L, int N, size_t cap, fc_basis **out);
FC_API void fc_basis_free(fc_basis *b);
FC_API fc_status fc_basis_size(const fc_basis *b, size_t *out);
FC_API fc_status fc_basis_state(const fc_basis *b, size_t k, int *occupations);
FC_API fc_status fc_basis_index(const fc_basis *b, const int *occupations, size_t *out);

/* Complex vectors are interleaved re/im arrays of length 2 * dim. */
FC_API fc_status fc_hamiltonian_create(const fc_basis *b, const fc_lattice *p, fc_operator **out);
FC_API fc_status fc_occupation_create(const fc_basis *b, int site, fc_operator **out);
FC_API void fc_operator_free(fc_operator *op);
FC_API fc_status fc_operator_dim(const fc_operator *op, size_t *out);
FC_API fc_status fc_operator_apply(const fc_operator *op, const double *in, double *out);
/* psi <- exp(-i H t) psi */
FC_API fc_status fc_propagate(const fc_operator *H, double *psi, double t, double tol);
/* Ascending eigenvalues, dim entries. */
FC_API fc_status fc_eigenvalues(const fc_operator *H, double *out);

FC_API fc_status fc_goe_form_factor(double tau, double *out);

/* Experiment runner. JSON strings returned through char** must be released with fc_string_free.
   validate: report is {"ok": bool, "issues": [{"path", "message", "capacity"}]}.
   run: seed < 0 keeps the config seed; out_dir NULL uses the config "output" field;
   summary is {"files": [...], "config_hash", "wall_time_s", "notes": [...]}. */
FC_API fc_status fc_experiment_validate(const char *config_json, char **report_json);
FC_API fc_status fc_experiment_run(const char *config_json, const char *out_dir, long long seed,
                                   char **summary_json);
FC_API void fc_string_free(char *s);

#ifdef __cplusplus
}
#endif

#endif
