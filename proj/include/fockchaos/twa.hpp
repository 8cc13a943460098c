#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fockchaos/meanfield.hpp"

namespace fockchaos {

struct WignerEnsemble {
    int L = 0;
    std::vector<CVec> samples;
    std::uint64_t seed = 0;
    CVec center;
};

// Psi = b + zeta, Re and Im of each zeta_j independent with variance 1/4.
// Sample s depends only on (seed, s), so the ensemble is identical under any thread count.
WignerEnsemble sample_wigner(const CVec &center, std::size_t n_samples, std::uint64_t seed);

// Real-valued phase-space symbol A(psi).
using Symbol = std::function<double(const CVec &)>;

namespace symbols {
Symbol occupation(int site);  // |psi_j|^2 - 1/2
Symbol total_number();        // sum |psi_j|^2 - L/2
Symbol energy(const LatticeParams &p);
Symbol quadrature_re(int site);
Symbol quadrature_im(int site);
} // namespace symbols

struct TwaOptions {
    // Propagate with the Weyl symbol of the Hamiltonian: n(n-1) maps to |psi|^4 - 2|psi|^2 + 1/2,
    // i.e. the on-site energies shift by -U. Off gives the plain mean-field polynomial.
    bool weyl_hamiltonian = true;
    FlowOptions flow{1e-10, 1e-10, 1e-3, false};
};

struct TwaSeries {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> stderr_;
};

LatticeParams weyl_flow_params(const LatticeParams &p);

TwaSeries twa_expectation(const Symbol &A, const WignerEnsemble &ens, const LatticeParams &p,
                          const std::vector<double> &t_grid, const TwaOptions &opt = {});

// C_TWA(t) = 2^L E[exp(-2 |Psi(t) - b|^2)], the overlap of the evolved Wigner cloud
// with the Wigner function of the initial coherent state.
TwaSeries twa_return(const CVec &center, const LatticeParams &p, const std::vector<double> &t_grid,
                     std::size_t n_samples, std::uint64_t seed, const TwaOptions &opt = {});

} // namespace fockchaos
