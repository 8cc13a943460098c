#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fockchaos/fock.hpp"
#include "fockchaos/quantum.hpp"

namespace fockchaos {

// Gaussian window W(x) = exp(-x^2 / (2 eta^2)) centred at E, with
// W(x) = (1/2pi) int dtau Wt(tau) e^{i tau x}, Wt(tau) = sqrt(2 pi) eta exp(-eta^2 tau^2 / 2).
struct SpectralWindow {
    double E = 0;
    double eta = 1;

    double weight(double energy) const;      // W(energy - E)
    double shape(double x) const;            // W(x)
    double fourier(double tau) const;        // Wt(tau)
};

enum class Provenance { exact, semiclassical };

struct CovarianceMatrix {
    std::vector<std::vector<int>> states;
    std::size_t size() const { return states.size(); }
    std::vector<cplx> R; // row-major
    Provenance provenance = Provenance::exact;
    double density = 0;  // rho used for normalization
    cplx at(std::size_t i, std::size_t j) const { return R[i * states.size() + j]; }
};

struct ExactCovarianceInfo {
    double window_weight = 0;       // rho_eta = sum_j W(E_j - E)
    std::size_t states_in_window = 0; // eigenvalues with |E_j - E| <= 2 eta
    bool warning = false;           // fewer than 50 states inside the window
};

CovarianceMatrix exact_covariance(const Spectrum &spec, const FockBasis &basis, const SpectralWindow &w,
                                  const std::vector<std::vector<int>> &states, ExactCovarianceInfo *info = nullptr);

struct DosResult {
    double value = 0;  // <W(E - H_cl)> over the sphere sum |psi|^2 = N
    double stderr_ = 0;
};

// Monte Carlo average over psi uniform on the complex sphere of radius sqrt(N).
DosResult classical_dos(const LatticeParams &p, int N, const SpectralWindow &w, std::size_t n_mc, std::uint64_t seed);

// Bessel functions J_k(x) for k = 0..kmax by Miller's backward recurrence.
std::vector<double> bessel_j_table(int kmax, double x);
double bessel_j(int k, double x);

struct SemiclassicalOptions {
    int q_max = 12;        // starting truncation of the winding sum
    int q_cap = 400;       // growth stops here
    double rel_tol = 1e-8; // change when q_max grows by 2
    double tau_cutoff = 1e-14; // quadrature support where Wt/Wt(0) exceeds this
};

struct SemiclassicalValue {
    cplx value = 0;     // before division by rho
    int q_used = 0;
    bool converged = true;
};

// Integral and winding sum of the Bessel-product covariance, not yet divided by rho.
// Optional diagonal override replaces (U/2) sum I(I-1) + sum eps I by any function of I.
SemiclassicalValue semiclassical_kernel(const std::vector<int> &n, const std::vector<int> &m, const LatticeParams &p,
                                        const SpectralWindow &w, const SemiclassicalOptions &opt = {},
                                        const std::function<double(const std::vector<double> &)> *diag = nullptr);

// R^sc_{n,m} = kernel / rho with rho = dim x classical_dos.
cplx semiclassical_covariance(const std::vector<int> &n, const std::vector<int> &m, const LatticeParams &p,
                              const SpectralWindow &w, double rho, const SemiclassicalOptions &opt = {});

CovarianceMatrix semiclassical_covariance_matrix(const std::vector<std::vector<int>> &states, const LatticeParams &p,
                                                 const SpectralWindow &w, double rho,
                                                 const SemiclassicalOptions &opt = {}, int *max_q_used = nullptr);

struct NormalizedCorrelator {
    std::vector<cplx> C; // row-major
    std::size_t n = 0;
    double max_abs = 0;
    bool exceeds_one = false; // any |C| > 1 + 1e-10 (possible only for semiclassical input)
};

NormalizedCorrelator normalized_correlator(const CovarianceMatrix &cov);

// All in-sector occupation vectors within max-norm distance `radius` of `seed`.
std::vector<std::vector<int>> occupation_ball(const std::vector<int> &seed, int radius);

// Gaussian functional averages.
struct Monomial {
    cplx coeff = 1;
    std::vector<std::size_t> plain;      // indices of a_n factors
    std::vector<std::size_t> conjugated; // indices of a*_m factors
};

cplx gaussian_average(const std::vector<Monomial> &F, const CovarianceMatrix &cov);

struct McAverage {
    cplx mean = 0;
    double stderr_ = 0;
};
McAverage gaussian_average_mc(const std::vector<Monomial> &F, const CovarianceMatrix &cov, std::size_t n_samples,
                              std::uint64_t seed);

double pearson(const std::vector<double> &a, const std::vector<double> &b);

} // namespace fockchaos
