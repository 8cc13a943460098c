#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fockchaos/fock.hpp"

namespace fockchaos {

enum class UnfoldMethod { gaussian_counting, polynomial };

struct UnfoldOptions {
    UnfoldMethod method = UnfoldMethod::gaussian_counting;
    double sigma_spacings = 8.0; // broadening in units of the local mean spacing
    int degree = 9;              // polynomial fit of the staircase
    double trim = 0.05;          // fraction dropped at each edge
};

struct UnfoldedSpectrum {
    std::vector<double> raw;     // sorted input
    std::vector<double> x;       // unfolded bulk levels
    std::string recipe;
    double bulk_mean_spacing = 0;
};

UnfoldedSpectrum unfold(std::vector<double> eigs, const UnfoldOptions &opt = {});

std::vector<double> spacings(const std::vector<double> &x);

// Mean of min(s_i, s_{i+1}) / max(s_i, s_{i+1}) over the central `bulk` fraction; needs no unfolding.
// About 0.386 for Poisson and 0.531 for GOE.
double mean_gap_ratio(std::vector<double> eigs, double bulk = 0.5);

double poisson_spacing_cdf(double s);
double wigner_surmise_cdf(double s); // GOE surmise 1 - exp(-pi s^2 / 4)

struct KsResult {
    double statistic = 0;
    double p_value = 0;
};
KsResult ks_test(std::vector<double> sample, const std::function<double(double)> &cdf);

struct FormFactorOptions {
    double smoothing = 0.05;   // width of the moving average in tau
    int smoothing_points = 0;  // 0 picks about two samples per resolution cell
    double taper = 1.0;        // Gaussian taper width as a fraction of the level count
    std::size_t min_realizations = 10;
};

// K(tau) averaged over the ensemble, connected part only (the ensemble-mean transform is subtracted).
std::vector<double> form_factor(const std::vector<UnfoldedSpectrum> &ensemble, const std::vector<double> &tau,
                                const FormFactorOptions &opt = {});

double goe_form_factor(double tau);

enum class SymmetryClass { orthogonal, unitary };
double diagonal_ramp(double tau, SymmetryClass c);

struct RampFit {
    double slope = 0;     // a in a tau + b tau^2
    double curvature = 0; // b
};
RampFit fit_ramp(const std::vector<double> &tau, const std::vector<double> &K, double lo = 0.05, double hi = 0.3);

// Values-only spectra of H with on-site disorder eps ~ uniform(-W, W), one per realization.
std::vector<std::vector<double>> disorder_spectra(const LatticeParams &base, int N, double W, std::size_t realizations,
                                                  std::uint64_t seed);

} // namespace fockchaos
