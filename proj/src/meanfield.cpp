#include "fockchaos/meanfield.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <random>
#include <string>

namespace fockchaos {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

double particle_number(const CVec &psi) {
    double s = 0;
    for (auto z : psi)
        s += std::norm(z);
    return s;
}

double classical_hamiltonian(const CVec &psi, const LatticeParams &p) {
    if (static_cast<int>(psi.size()) != p.L)
        throw DimensionError("field length differs from L");
    const cplx ph = std::polar(1.0, p.phi);
    double e = 0;
    for (auto [a, b] : p.bonds())
        e += -2.0 * p.J * (ph * std::conj(psi[a]) * psi[b]).real();
    for (int j = 0; j < p.L; ++j) {
        double n = std::norm(psi[j]);
        e += 0.5 * p.U * n * n + p.eps_at(j) * n;
    }
    return e;
}

CVec field_gradient(const CVec &psi, const LatticeParams &p) {
    const cplx ph = std::polar(1.0, p.phi);
    CVec g(psi.size(), 0.0);
    for (auto [a, b] : p.bonds()) {
        g[a] += -p.J * ph * psi[b];
        g[b] += -p.J * std::conj(ph) * psi[a];
    }
    for (int j = 0; j < p.L; ++j)
        g[j] += (p.U * std::norm(psi[j]) + p.eps_at(j)) * psi[j];
    return g;
}

namespace {

// Hopping matrix K with dH/dpsi* = K psi + (U|psi|^2 + eps) psi.
Eigen::MatrixXcd hopping_matrix(const LatticeParams &p) {
    Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(p.L, p.L);
    const cplx ph = std::polar(1.0, p.phi);
    for (auto [a, b] : p.bonds()) {
        K(a, b) += -p.J * ph;
        K(b, a) += -p.J * std::conj(ph);
    }
    return K;
}

struct Rhs {
    const LatticeParams &p;
    int L;
    bool tangent;
    int extra_vectors; // tangent columns carried (2L for full M, 1 for Benettin)
    Eigen::MatrixXcd K;
    std::vector<double> D;

    Rhs(const LatticeParams &p_, bool tangent_, int vectors)
        : p(p_), L(p_.L), tangent(tangent_), extra_vectors(vectors), K(hopping_matrix(p_)), D(4 * L * L) {}

    void jacobian(const double *x, const double *y) {
        // dpsi' = -i (G dpsi + B dpsi*), G = K + diag(2U|psi|^2 + eps), B = diag(U psi^2)
        const int n = 2 * L;
        std::fill(D.begin(), D.end(), 0.0);
        for (int a = 0; a < L; ++a)
            for (int b = 0; b < L; ++b) {
                double gr = K(a, b).real(), gi = K(a, b).imag();
                if (a == b)
                    gr += 2 * p.U * (x[a] * x[a] + y[a] * y[a]) + p.eps_at(a);
                double br = 0, bi = 0;
                if (a == b) {
                    br = p.U * (x[a] * x[a] - y[a] * y[a]);
                    bi = p.U * 2 * x[a] * y[a];
                }
                D[a * n + b] = gi + bi;
                D[a * n + L + b] = gr - br;
                D[(L + a) * n + b] = -(gr + br);
                D[(L + a) * n + L + b] = gi - bi;
            }
    }

    void operator()(const State &s, State &ds, double) {
        const double *x = s.data();
        const double *y = s.data() + L;
        // field: dpsi/dt = -i g, g = K psi + (U|psi|^2 + eps) psi
        double H = 0;
        for (int a = 0; a < L; ++a) {
            cplx g = 0;
            for (int b = 0; b < L; ++b)
                if (K(a, b) != cplx(0))
                    g += K(a, b) * cplx(x[b], y[b]);
            double n = x[a] * x[a] + y[a] * y[a];
            cplx loc = (p.U * n + p.eps_at(a)) * cplx(x[a], y[a]);
            g += loc;
            ds[a] = g.imag();
            ds[L + a] = -g.real();
            // H = sum psi* K psi + U/2 n^2 + eps n
            cplx kpsi = g - loc;
            H += (std::conj(cplx(x[a], y[a])) * kpsi).real() + 0.5 * p.U * n * n + p.eps_at(a) * n;
        }
        std::size_t off = 2 * static_cast<std::size_t>(L);
        if (tangent) {
            jacobian(x, y);
            const int n = 2 * L;
            const int m = extra_vectors;
            // columns stored row-major as an n x m block
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < m; ++c) {
                    double acc = 0;
                    for (int k = 0; k < n; ++k)
                        acc += D[i * n + k] * s[off + k * m + c];
                    ds[off + i * m + c] = acc;
                }
            off += static_cast<std::size_t>(n) * m;
        }
        // action: p . dq/dt - H = 2 y . dx/dt - H
        double pq = 0;
        for (int a = 0; a < L; ++a)
            pq += 2 * y[a] * ds[a];
        ds[off] = pq - H;
    }
};

State pack(const CVec &psi, int L, int vectors, bool identity) {
    const int n = 2 * L;
    State s(static_cast<std::size_t>(n) + static_cast<std::size_t>(n) * vectors + 1, 0.0);
    for (int a = 0; a < L; ++a) {
        s[a] = psi[a].real();
        s[L + a] = psi[a].imag();
    }
    if (identity && vectors == n)
        for (int i = 0; i < n; ++i)
            s[n + i * vectors + i] = 1.0;
    return s;
}

CVec unpack(const State &s, int L) {
    CVec psi(L);
    for (int a = 0; a < L; ++a)
        psi[a] = {s[a], s[L + a]};
    return psi;
}

// Adaptive RKF7(8) from t0 to t1; dt carries the step size across calls.
template <class Sys>
void run_controlled(Sys &sys, State &s, double t0, double t1, const FlowOptions &opt, double &dt) {
    auto stepper = odeint::make_controlled(opt.atol, opt.rtol, odeint::runge_kutta_fehlberg78<State>());
    const double span = t1 - t0;
    if (span == 0.0)
        return;
    if (!(dt > 0))
        dt = opt.dt_init;
    double t = t0;
    int fails = 0;
    while ((t1 - t) * (span > 0 ? 1 : -1) > 1e-14 * std::max(1.0, std::abs(t1))) {
        double remaining = t1 - t;
        bool clipped = dt >= std::abs(remaining);
        double h = clipped ? remaining : std::copysign(dt, span);
        double h_in = h;
        auto r = stepper.try_step(sys, s, t, h);
        if (r == odeint::success) {
            fails = 0;
            // keep the controller's proposal unless this step was shortened to hit t1
            if (!clipped || std::abs(h) > std::abs(h_in))
                dt = std::abs(h);
        } else {
            dt = std::abs(h);
            if (++fails > 500 || dt < 1e-14 * std::max(1.0, std::abs(t)))
                throw NumericError("flow integration: step size underflow");
        }
    }
    for (double v : s)
        if (!std::isfinite(v))
            throw NumericError("flow produced non-finite values");
}

} // namespace

std::vector<double> flow_jacobian(const CVec &psi, const LatticeParams &p, double mu) {
    Rhs r(p, true, 0);
    std::vector<double> x(p.L), y(p.L);
    for (int a = 0; a < p.L; ++a) {
        x[a] = psi[a].real();
        y[a] = psi[a].imag();
    }
    r.jacobian(x.data(), y.data());
    const int n = 2 * p.L;
    // rotating frame: G -> G - mu
    for (int a = 0; a < p.L; ++a) {
        r.D[a * n + p.L + a] -= mu;
        r.D[(p.L + a) * n + a] += mu;
    }
    return r.D;
}

Trajectory gpe_flow(const CVec &psi0, const LatticeParams &p, const std::vector<double> &t_grid,
                    const FlowOptions &opt) {
    p.validate();
    if (static_cast<int>(psi0.size()) != p.L)
        throw DimensionError("field length differs from L");
    if (t_grid.empty())
        throw ArgumentError("empty time grid");
    for (std::size_t k = 1; k < t_grid.size(); ++k)
        if (!(t_grid[k] > t_grid[k - 1]))
            throw ArgumentError("time grid must be strictly increasing");
    const int L = p.L, n = 2 * L;
    const int vectors = opt.tangent ? n : 0;
    Rhs sys(p, opt.tangent, vectors);
    State s = pack(psi0, L, vectors, true);
    Trajectory tr;
    auto record = [&](double t) {
        tr.t.push_back(t);
        auto psi = unpack(s, L);
        tr.energy.push_back(classical_hamiltonian(psi, p));
        tr.number.push_back(particle_number(psi));
        tr.psi.push_back(std::move(psi));
        if (opt.tangent)
            tr.M.emplace_back(s.begin() + n, s.begin() + n + n * n);
        tr.action.push_back(s.back());
    };
    record(t_grid[0]);
    double dt = opt.dt_init;
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        run_controlled(sys, s, t_grid[k - 1], t_grid[k], opt, dt);
        record(t_grid[k]);
    }
    return tr;
}

Trajectory gpe_flow(const CVec &psi0, const LatticeParams &p, double T, double dt, const FlowOptions &opt) {
    if (!(T > 0) || !(dt > 0))
        throw ArgumentError("T and dt must be positive");
    auto steps = static_cast<std::size_t>(std::llround(T / dt));
    std::vector<double> g(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        g[k] = T * static_cast<double>(k) / static_cast<double>(steps);
    return gpe_flow(psi0, p, g, opt);
}

Trajectory tangent_flow(const CVec &psi0, const LatticeParams &p, double T, double dt, FlowOptions opt) {
    opt.tangent = true;
    return gpe_flow(psi0, p, T, dt, opt);
}

Trajectory split_step_flow(const CVec &psi0, const LatticeParams &p, double T, double dt, int substeps) {
    p.validate();
    if (!(T > 0) || !(dt > 0) || substeps < 1)
        throw ArgumentError("invalid split-step parameters");
    const int L = p.L;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hopping_matrix(p));
    auto steps = static_cast<std::size_t>(std::llround(T / dt));
    const double h = T / static_cast<double>(steps) / substeps;
    Eigen::VectorXcd ph(L);
    for (int k = 0; k < L; ++k)
        ph(k) = std::polar(1.0, -0.5 * h * es.eigenvalues()(k));
    Eigen::MatrixXcd half = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();

    Eigen::VectorXcd psi(L);
    for (int a = 0; a < L; ++a)
        psi(a) = psi0[a];
    Trajectory tr;
    double R = 0;
    auto record = [&](double t) {
        CVec v(psi.data(), psi.data() + L);
        tr.t.push_back(t);
        tr.energy.push_back(classical_hamiltonian(v, p));
        tr.number.push_back(particle_number(v));
        tr.psi.push_back(std::move(v));
        tr.action.push_back(R);
    };
    record(0);
    for (std::size_t k = 1; k <= steps; ++k) {
        for (int s = 0; s < substeps; ++s) {
            // action by the midpoint rule on the step
            Eigen::VectorXcd before = psi;
            psi = half * psi;
            for (int a = 0; a < L; ++a)
                psi(a) *= std::polar(1.0, -h * (p.U * std::norm(psi(a)) + p.eps_at(a)));
            psi = half * psi;
            Eigen::VectorXcd mid = 0.5 * (before + psi);
            CVec m(mid.data(), mid.data() + L);
            double pq = 0;
            for (int a = 0; a < L; ++a)
                pq += 2 * mid(a).imag() * (psi(a).real() - before(a).real());
            R += pq - h * classical_hamiltonian(m, p);
        }
        record(T * static_cast<double>(k) / static_cast<double>(steps));
    }
    return tr;
}

double action_integral(const Trajectory &traj) {
    if (traj.action.empty())
        throw ArgumentError("trajectory has no samples");
    return traj.action.back() - traj.action.front();
}

double action_between(const Trajectory &traj, std::size_t i0, std::size_t i1) {
    if (i0 >= traj.action.size() || i1 >= traj.action.size())
        throw ArgumentError("sample index out of range");
    return traj.action[i1] - traj.action[i0];
}

double relative_equilibrium_action(const CVec &psi, const LatticeParams &p, double mu, double T) {
    double R = -classical_hamiltonian(psi, p) * T;
    for (auto z : psi) {
        double r2 = std::norm(z), th = std::arg(z);
        R += mu * r2 * T + 0.5 * r2 * (std::sin(2 * th - 2 * mu * T) - std::sin(2 * th));
    }
    return R;
}

// ---- fixed points ---------------------------------------------------------

namespace {

double stationarity_residual(const CVec &psi, const LatticeParams &p, double mu) {
    auto g = field_gradient(psi, p);
    double r = 0;
    for (std::size_t j = 0; j < psi.size(); ++j)
        r += std::norm(g[j] - mu * psi[j]);
    return std::sqrt(r);
}

} // namespace

FixedPoint find_fixed_point(const CVec &seed, const LatticeParams &p, const FixedPointOptions &opt) {
    p.validate();
    const int L = p.L;
    if (static_cast<int>(seed.size()) != L)
        throw DimensionError("seed length differs from L");
    const double Nt = particle_number(seed);
    if (!(Nt > 0))
        throw ArgumentError("seed must carry particles");
    // gauge: the largest component is kept real
    int k0 = 0;
    for (int j = 1; j < L; ++j)
        if (std::abs(seed[j]) > std::abs(seed[k0]))
            k0 = j;
    CVec psi = seed;
    const cplx rot = std::polar(1.0, -std::arg(seed[k0]));
    for (auto &z : psi)
        z *= rot;
    double mu = 0;
    {
        auto g0 = field_gradient(psi, p);
        for (int j = 0; j < L; ++j)
            mu += (std::conj(psi[j]) * g0[j]).real();
        mu /= Nt;
    }

    const int nu = 2 * L + 1, ne = 2 * L + 2;
    auto residuals = [&](const CVec &f, double m) {
        Eigen::VectorXd r(ne);
        auto g = field_gradient(f, p);
        for (int j = 0; j < L; ++j) {
            r(j) = (g[j] - m * f[j]).real();
            r(L + j) = (g[j] - m * f[j]).imag();
        }
        r(2 * L) = particle_number(f) - Nt;
        r(2 * L + 1) = f[k0].imag();
        return r;
    };

    FixedPoint fp;
    Eigen::VectorXd r = residuals(psi, mu);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (stationarity_residual(psi, p, mu) <= opt.tol * 1e-2 * std::max(1.0, std::abs(mu)) &&
            std::abs(r(2 * L)) <= 1e-12 * Nt)
            break;
        // Jacobian: rows of (G - mu) dpsi + B dpsi* in real form, minus psi for mu
        Eigen::MatrixXd Jm = Eigen::MatrixXd::Zero(ne, nu);
        auto D = flow_jacobian(psi, p, mu);
        // D encodes -i(...): d(x')/d. = Im(...), d(y')/d. = -Re(...); undo the -i
        const int n = 2 * L;
        for (int a = 0; a < L; ++a)
            for (int c = 0; c < n; ++c) {
                Jm(a, c) = -D[(L + a) * n + c]; // Re part
                Jm(L + a, c) = D[a * n + c];    // Im part
            }
        for (int a = 0; a < L; ++a) {
            Jm(a, 2 * L) = -psi[a].real();
            Jm(L + a, 2 * L) = -psi[a].imag();
            Jm(2 * L, a) = 2 * psi[a].real();
            Jm(2 * L, L + a) = 2 * psi[a].imag();
        }
        Jm(2 * L + 1, L + k0) = 1.0;
        Eigen::VectorXd step = Jm.completeOrthogonalDecomposition().solve(-r);
        double lam = 1.0, r0 = r.norm();
        CVec trial(L);
        double mu_t = mu;
        Eigen::VectorXd rt;
        for (int bt = 0; bt < 30; ++bt) {
            for (int a = 0; a < L; ++a)
                trial[a] = psi[a] + lam * cplx(step(a), step(L + a));
            mu_t = mu + lam * step(2 * L);
            rt = residuals(trial, mu_t);
            if (rt.norm() < r0 || bt == 29)
                break;
            lam *= 0.5;
        }
        if (!(rt.norm() < r0) && rt.norm() > 1e-12)
            break;
        psi = trial;
        mu = mu_t;
        r = rt;
    }
    fp.iterations = it;
    fp.psi = psi;
    fp.mu = mu;
    fp.energy = classical_hamiltonian(psi, p);
    fp.residual = stationarity_residual(psi, p, mu);
    if (!(fp.residual <= opt.tol) || !std::isfinite(fp.residual))
        throw NumericError("fixed-point Newton solve did not converge (residual " + std::to_string(fp.residual) +
                           ")");

    auto D = flow_jacobian(psi, p, mu);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Dm(D.data(), 2 * L,
                                                                                                2 * L);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Dm);
    for (int k = 0; k < 2 * L; ++k)
        fp.exponents.push_back(es.eigenvalues()(k));
    std::sort(fp.exponents.begin(), fp.exponents.end(), [](cplx a, cplx b) {
        if (a.real() != b.real())
            return a.real() > b.real();
        return a.imag() > b.imag();
    });
    fp.max_growth = fp.exponents.front().real();
    fp.hyperbolic = fp.max_growth > 1e-6;
    return fp;
}

// ---- Lyapunov -------------------------------------------------------------

namespace {

struct FrozenRhs {
    // tangent vector along the analytic orbit psi e^{-i mu t}
    const LatticeParams &p;
    CVec psi;
    double mu;
    Rhs inner;
    FrozenRhs(const LatticeParams &p_, CVec f, double m) : p(p_), psi(std::move(f)), mu(m), inner(p_, true, 1) {}

    void operator()(const State &v, State &dv, double t) {
        const int L = p.L, n = 2 * L;
        std::vector<double> x(L), y(L);
        for (int a = 0; a < L; ++a) {
            cplx z = psi[a] * std::polar(1.0, -mu * t);
            x[a] = z.real();
            y[a] = z.imag();
        }
        inner.jacobian(x.data(), y.data());
        for (int i = 0; i < n; ++i) {
            double acc = 0;
            for (int k = 0; k < n; ++k)
                acc += inner.D[i * n + k] * v[k];
            dv[i] = acc;
        }
    }
};

} // namespace

LyapunovResult lyapunov(const CVec &psi0, const LatticeParams &p, double T, const LyapunovOptions &opt) {
    p.validate();
    if (static_cast<int>(psi0.size()) != p.L)
        throw DimensionError("field length differs from L");
    if (!(opt.renorm_dt > 0) || opt.blocks < 2)
        throw ArgumentError("lyapunov: renorm_dt > 0 and blocks >= 2 required");
    const int L = p.L, n = 2 * L;
    auto intervals = static_cast<long>(std::llround(T / opt.renorm_dt));
    long per_block = intervals / opt.blocks;
    if (per_block < 1)
        throw ArgumentError("lyapunov: T too short for the requested blocks");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    double nv = 0;
    for (auto &x : v) {
        x = g(rng);
        nv += x * x;
    }
    for (auto &x : v)
        x /= std::sqrt(nv);

    Rhs sys(p, true, 1);
    State s = pack(opt.fixed_point ? opt.fixed_point->psi : psi0, L, 1, false);
    std::optional<FrozenRhs> frozen;
    State w;
    if (opt.fixed_point) {
        frozen.emplace(p, opt.fixed_point->psi, opt.fixed_point->mu);
        w = v;
    } else
        std::copy(v.begin(), v.end(), s.begin() + n);

    LyapunovResult res;
    double t = 0, dt = opt.flow.dt_init;
    for (int b = 0; b < opt.blocks; ++b) {
        double acc = 0;
        for (long k = 0; k < per_block; ++k) {
            double nrm = 0;
            if (frozen) {
                run_controlled(*frozen, w, t, t + opt.renorm_dt, opt.flow, dt);
                for (double x : w)
                    nrm += x * x;
                nrm = std::sqrt(nrm);
                for (auto &x : w)
                    x /= nrm;
            } else {
                run_controlled(sys, s, t, t + opt.renorm_dt, opt.flow, dt);
                for (int i = 0; i < n; ++i)
                    nrm += s[n + i] * s[n + i];
                nrm = std::sqrt(nrm);
                for (int i = 0; i < n; ++i)
                    s[n + i] /= nrm;
            }
            acc += std::log(nrm);
            t += opt.renorm_dt;
        }
        res.block_means.push_back(acc / (static_cast<double>(per_block) * opt.renorm_dt));
    }
    const int nb = opt.blocks - 1;
    double mean = 0;
    for (int b = 1; b < opt.blocks; ++b)
        mean += res.block_means[b];
    mean /= nb;
    double var = 0;
    for (int b = 1; b < opt.blocks; ++b)
        var += (res.block_means[b] - mean) * (res.block_means[b] - mean);
    var /= std::max(1, nb - 1);
    res.lambda = mean;
    res.error = std::sqrt(var / nb);
    int h = nb / 2;
    double early = 0, late = 0;
    for (int b = 1; b <= h; ++b)
        early += res.block_means[b];
    for (int b = h + 1; b < opt.blocks; ++b)
        late += res.block_means[b];
    early /= std::max(1, h);
    late /= std::max(1, nb - h);
    res.drift = std::abs(mean) > 0 ? std::abs(late - early) / std::abs(mean) : 0.0;
    res.converged = !(std::abs(mean) > 1e-3 && res.drift > 0.2);
    return res;
}

double symplectic_defect(const std::vector<double> &M, int L) {
    const int n = 2 * L;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(M.data(), n, n);
    Eigen::MatrixXd O = Eigen::MatrixXd::Zero(n, n);
    O.topRightCorner(L, L) = Eigen::MatrixXd::Identity(L, L);
    O.bottomLeftCorner(L, L) = -Eigen::MatrixXd::Identity(L, L);
    return (A.transpose() * O * A - O).cwiseAbs().maxCoeff();
}

double determinant(const std::vector<double> &M, int n) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(M.data(), n, n);
    return A.determinant();
}

} // namespace fockchaos
