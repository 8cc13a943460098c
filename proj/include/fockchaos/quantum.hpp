#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "fockchaos/fock.hpp"

namespace fockchaos {

// ---- diagonalization ------------------------------------------------------

struct DenseCaps {
    std::size_t values_only = 30000;
    std::size_t with_vectors = 8000;
};

struct Spectrum {
    std::vector<double> values; // ascending
    // column-major dim x dim, column j is the eigenvector of values[j]; empty if not requested
    std::vector<cplx> vectors;
    std::size_t dim = 0;
    double max_residual = 0.0; // max ||Hv - Ev|| over computed pairs, only with vectors

    cplx vec(std::size_t row, std::size_t j) const { return vectors[j * dim + row]; }
};

Spectrum diagonalize(const SparseOperator &H, bool want_vectors, DenseCaps caps = {});

// ---- Krylov propagation ---------------------------------------------------

struct KrylovOptions {
    int max_dim = 60;
    long max_substeps = 1000000;
};

struct KrylovStats {
    long substeps = 0;
    long matvecs = 0;
};

// psi <- exp(-i H t) psi with ||error|| <= tol ||psi||.
KrylovStats propagate_inplace(const SparseOperator &H, CVec &psi, double t, double tol,
                              const KrylovOptions &opt = {});
CVec propagate(const SparseOperator &H, const CVec &psi, double t, double tol, const KrylovOptions &opt = {});

// ---- states ---------------------------------------------------------------

struct Sector {
    int N = 0;
    std::shared_ptr<const FockBasis> basis;
    CVec amp;
};

struct MultiSectorState {
    int L = 0;
    std::vector<Sector> sectors;
    double truncated_weight = 0.0; // probability mass outside the kept sectors
    bool warning = false;          // truncated weight above the warning threshold

    double norm2() const;
};

struct CoherentOptions {
    double k_sigma = 5.0;
    double warn_weight = 1e-6;
    double error_weight = 1e-3;
    std::size_t cap = default_basis_cap;
};

// Product of site coherent states, split into the N sectors within k sigma of the mean.
MultiSectorState coherent_state(int L, const CVec &b, const CoherentOptions &opt = {});
// Coherent state projected on one sector and renormalized.
MultiSectorState coherent_state_in_sector(int L, int N, const CVec &b, std::size_t cap = default_basis_cap);
MultiSectorState fock_state(const std::vector<int> &n);

// ---- time series ----------------------------------------------------------

struct TimeSeries {
    std::vector<double> t;
    std::vector<cplx> value;
};

void check_uniform_grid(const std::vector<double> &t);
std::vector<double> uniform_grid(double t0, double t1, std::size_t n);

struct AutocorrelationResult {
    TimeSeries amplitude; // A(t)
    std::vector<double> probability; // C(t) = |A|^2
};

// A(t) = sum over sectors <v_N| exp(-i H_N t) |v_N>; H_N assembled from params for each sector.
AutocorrelationResult autocorrelation(const LatticeParams &params, const MultiSectorState &state,
                                      const std::vector<double> &t_grid, double tol);

struct SpectrumCurve {
    std::vector<double> E;
    std::vector<double> weight;
};

// SP(E) = (1/2pi) int dt e^{iEt} A(t) exp(-(eta t)^2/2), using A(-t) = conj A(t).
SpectrumCurve weighted_spectrum(const TimeSeries &A, double eta, const std::vector<double> &E_grid);

// |<n_f| exp(-iHt) |n_i>|^2 for one target, or for the whole sector.
double transition_probability(const SparseOperator &H, const FockBasis &basis, const std::vector<int> &n_i,
                              const std::vector<int> &n_f, double t, double tol);
std::vector<double> transition_probabilities(const SparseOperator &H, const FockBasis &basis,
                                             const std::vector<int> &n_i, double t, double tol);

// ---- coherent backscattering ---------------------------------------------

struct CbsOptions {
    double t_start = 20.0;
    double t_end = 40.0;
    std::size_t n_times = 201;
    double shell_width = 0.5; // |E_diag(n_f) - E_diag(n_i)| <= shell_width
    bool exclude_images = true;
    double tol = 1e-9;
};

struct CbsPoint {
    double phi = 0;
    double g = 0;
    double return_probability = 0; // time averaged P(n_i -> n_i)
    double background = 0;
    std::size_t background_states = 0;
    std::size_t n_window_times = 0;
    double drift = 0; // relative change of g between the two halves of the window
};

// Symmetry images of n under lattice translations and reflections (ring) or reflection (chain).
std::vector<std::vector<int>> lattice_images(const std::vector<int> &n, Geometry g);

std::vector<CbsPoint> cbs_experiment(const LatticeParams &params, const std::vector<int> &n_i,
                                     const std::vector<double> &phi_list, const CbsOptions &opt = {});

// ---- OTOC -----------------------------------------------------------------

// C(t) = || [W(t), V] psi ||^2 summed over sectors; V and W are given as site weights
// for diagonal operators sum_j w_j n_j (occupations are the unit vectors).
struct OtocOperators {
    std::vector<double> V;
    std::vector<double> W;
};

TimeSeries otoc(const LatticeParams &params, const MultiSectorState &state, const OtocOperators &ops,
                const std::vector<double> &t_grid, double tol);

// Same contract with prebuilt diagonal operators, for a single sector.
std::vector<double> otoc_sector(const SparseOperator &H, const SparseOperator &V, const SparseOperator &W,
                                const CVec &psi, const std::vector<double> &t_grid, double tol);

// Growth analysis of an OTOC trace: straight-line fit of ln C on [1/lambda, ln(N)/lambda],
// plateau as the mean over the last `plateau_fraction` of the time span after t_E, and the
// stationarity spread as max |window mean - plateau| / plateau over `windows` equal windows.
struct OtocGrowth {
    double fit_t0 = 0, fit_t1 = 0;
    double slope = 0, intercept = 0;
    double t_ehrenfest = 0;
    double t_saturation = 0;
    double plateau = 0;
    double stationarity = 0;
    std::size_t fit_points = 0, plateau_points = 0;
};
OtocGrowth analyse_otoc(const std::vector<double> &t, const std::vector<double> &C, double lambda, double N,
                        double plateau_fraction = 0.5, int windows = 4);

// helpers
double norm2(const CVec &v);
cplx dot(const CVec &a, const CVec &b); // <a|b>

} // namespace fockchaos
