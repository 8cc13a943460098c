#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fockchaos/fock.hpp"

namespace fockchaos {

// psi_j = (q_j + i p_j) / sqrt(2); real coordinates are ordered (Re psi, Im psi),
// which is (q, p) up to the common factor sqrt(2), so tangent matrices agree in both.

double classical_hamiltonian(const CVec &psi, const LatticeParams &p);
double particle_number(const CVec &psi);
// dH/dpsi*_j; the flow is i dpsi/dt = gradient
CVec field_gradient(const CVec &psi, const LatticeParams &p);

// 2L x 2L row-major Jacobian of the flow at psi in the frame rotating with mu.
std::vector<double> flow_jacobian(const CVec &psi, const LatticeParams &p, double mu = 0.0);

struct FlowOptions {
    double rtol = 1e-13;
    double atol = 1e-13;
    double dt_init = 1e-3;
    bool tangent = false;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<CVec> psi;
    std::vector<std::vector<double>> M; // row-major 2L x 2L per sample when tangent data was requested
    std::vector<double> action;         // R(t) = int (p . dq/dt - H) dt
    std::vector<double> energy;
    std::vector<double> number;
};

// Adaptive Runge-Kutta-Fehlberg 7(8) flow sampled on t_grid (t_grid[0] is the start time of psi0).
Trajectory gpe_flow(const CVec &psi0, const LatticeParams &p, const std::vector<double> &t_grid,
                    const FlowOptions &opt = {});
Trajectory gpe_flow(const CVec &psi0, const LatticeParams &p, double T, double dt, const FlowOptions &opt = {});
Trajectory tangent_flow(const CVec &psi0, const LatticeParams &p, double T, double dt, FlowOptions opt = {});

// Second-order split step: exact hopping exponential, exact on-site phase rotation.
// Conserves the particle number to rounding; used as an independent cross-check.
Trajectory split_step_flow(const CVec &psi0, const LatticeParams &p, double T, double dt, int substeps);

double action_integral(const Trajectory &traj);
// Action accumulated between two samples of one trajectory.
double action_between(const Trajectory &traj, std::size_t i0, std::size_t i1);

// Closed-form lab-frame action of a relative equilibrium psi_j(t) = psi_j e^{-i mu t}.
double relative_equilibrium_action(const CVec &psi, const LatticeParams &p, double mu, double T);

struct FixedPoint {
    CVec psi;
    double mu = 0;
    double energy = 0;
    double residual = 0;            // || dH/dpsi* - mu psi ||
    std::vector<cplx> exponents;    // eigenvalues of the rotating-frame linearization, sorted by real part
    double max_growth = 0;          // largest real part
    bool hyperbolic = false;
    int iterations = 0;
};

struct FixedPointOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

// Relative equilibrium near `seed` at fixed particle number sum |seed|^2.
FixedPoint find_fixed_point(const CVec &seed, const LatticeParams &p, const FixedPointOptions &opt = {});

struct LyapunovOptions {
    double renorm_dt = 0.5;
    int blocks = 10;
    std::uint64_t seed = 1; // initial tangent direction
    FlowOptions flow;
    // When set, the reference orbit is the analytic rotation psi e^{-i mu t} of this
    // fixed point instead of a numerically integrated trajectory.
    std::optional<FixedPoint> fixed_point;
};

struct LyapunovResult {
    double lambda = 0;
    double error = 0;
    std::vector<double> block_means;
    double drift = 0;      // relative difference of late and early block averages
    bool converged = true; // false when drift exceeds 20% for a non-negligible exponent
};

// Largest exponent by tangent renormalization every renorm_dt; the first block is
// treated as transient and left out of the estimate.
LyapunovResult lyapunov(const CVec &psi0, const LatticeParams &p, double T, const LyapunovOptions &opt = {});

// Symplectic form test value max |M^T Omega M - Omega| for a 2L x 2L row-major matrix.
double symplectic_defect(const std::vector<double> &M, int L);
double determinant(const std::vector<double> &M, int n);

} // namespace fockchaos
