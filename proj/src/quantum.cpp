#include "fockchaos/quantum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>

#include "fockchaos/parallel.hpp"

namespace fockchaos {

double norm2(const CVec &v) {
    double s = 0;
    for (const auto &x : v)
        s += std::norm(x);
    return s;
}

cplx dot(const CVec &a, const CVec &b) {
    cplx s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::conj(a[i]) * b[i];
    return s;
}

// ---- diagonalization ------------------------------------------------------

namespace {

void check_hermitian(const SparseOperator &H) {
    double scale = std::max(1.0, H.norm_bound());
    for (std::size_t r = 0; r < H.dim; ++r)
        for (std::size_t k = H.row_ptr[r]; k < H.row_ptr[r + 1]; ++k) {
            cplx a = H.val[k];
            cplx b = H.entry(H.col[k], r);
            if (std::abs(a - std::conj(b)) > 1e-12 * scale)
                throw NumericError("operator is not Hermitian at (" + std::to_string(r) + "," +
                                   std::to_string(H.col[k]) + ")");
        }
}

} // namespace

Spectrum diagonalize(const SparseOperator &H, bool want_vectors, DenseCaps caps) {
    std::size_t cap = want_vectors ? caps.with_vectors : caps.values_only;
    if (H.dim > cap)
        throw CapacityError("dense diagonalization of dim " + std::to_string(H.dim) + " exceeds cap " +
                            std::to_string(cap));
    check_hermitian(H);
    const auto n = static_cast<Eigen::Index>(H.dim);
    Spectrum s;
    s.dim = H.dim;
    auto opts = want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
    if (H.real) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t r = 0; r < H.dim; ++r)
            for (std::size_t k = H.row_ptr[r]; k < H.row_ptr[r + 1]; ++k)
                A(static_cast<Eigen::Index>(r), H.col[k]) = H.val[k].real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, opts);
        if (es.info() != Eigen::Success)
            throw NumericError("eigensolver failed");
        s.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
        if (want_vectors) {
            s.vectors.resize(H.dim * H.dim);
            const double *p = es.eigenvectors().data();
            for (std::size_t i = 0; i < H.dim * H.dim; ++i)
                s.vectors[i] = p[i];
        }
    } else {
        Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
        for (std::size_t r = 0; r < H.dim; ++r)
            for (std::size_t k = H.row_ptr[r]; k < H.row_ptr[r + 1]; ++k)
                A(static_cast<Eigen::Index>(r), H.col[k]) = H.val[k];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, opts);
        if (es.info() != Eigen::Success)
            throw NumericError("eigensolver failed");
        s.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
        if (want_vectors) {
            const cplx *p = es.eigenvectors().data();
            s.vectors.assign(p, p + H.dim * H.dim);
        }
    }
    if (want_vectors) {
        CVec v(H.dim), hv(H.dim);
        for (std::size_t j = 0; j < H.dim; ++j) {
            std::copy_n(s.vectors.begin() + static_cast<std::ptrdiff_t>(j * H.dim), H.dim, v.begin());
            apply_operator(H, v, hv);
            double r = 0;
            for (std::size_t i = 0; i < H.dim; ++i)
                r += std::norm(hv[i] - s.values[j] * v[i]);
            s.max_residual = std::max(s.max_residual, std::sqrt(r));
        }
        if (s.max_residual > 1e-8 * std::max(1.0, H.norm_bound()))
            throw NumericError("eigenpair residual " + std::to_string(s.max_residual) + " too large");
    }
    return s;
}

// ---- Krylov ---------------------------------------------------------------

KrylovStats propagate_inplace(const SparseOperator &H, CVec &psi, double t, double tol, const KrylovOptions &opt) {
    if (psi.size() != H.dim)
        throw DimensionError("propagate: state length " + std::to_string(psi.size()) + " vs dim " +
                             std::to_string(H.dim));
    if (!std::isfinite(t))
        throw ArgumentError("propagate: non-finite time");
    if (!(tol > 1e-14 && tol < 1e-4))
        throw ArgumentError("propagate: tol must lie in (1e-14, 1e-4)");
    KrylovStats st;
    const std::size_t n = H.dim;
    if (t == 0.0 || n == 0)
        return st;
    const double total = std::abs(t);
    const double sgn = t > 0 ? 1.0 : -1.0;
    const int mmax = std::max(2, std::min<int>(opt.max_dim, static_cast<int>(n)));
    const double hscale = std::max(1e-300, H.norm_bound());
    const bool full_reorth = n <= static_cast<std::size_t>(4 * mmax);

    std::vector<cplx> V(static_cast<std::size_t>(mmax + 1) * n);
    auto col = [&](int k) { return V.data() + static_cast<std::size_t>(k) * n; };
    CVec w(n);
    std::vector<double> alpha, beta;
    double remaining = total;
    double h_last = total;

    while (remaining > 0) {
        if (st.substeps >= opt.max_substeps)
            throw NumericError("Krylov propagation exceeded max substeps");
        double b0 = std::sqrt(norm2(psi));
        if (b0 == 0.0)
            return st;
        for (std::size_t i = 0; i < n; ++i)
            col(0)[i] = psi[i] / b0;
        alpha.clear();
        beta.clear();
        double h_try = std::min(remaining, 2.0 * h_last);

        Eigen::VectorXd theta;
        Eigen::MatrixXd S;
        auto krylov_coeffs = [&](double h, int m, Eigen::VectorXcd &y) {
            y.resize(m);
            for (int k = 0; k < m; ++k) {
                cplx s = 0;
                for (int l = 0; l < m; ++l)
                    s += S(k, l) * S(0, l) * std::polar(1.0, -sgn * h * theta(l));
                y(k) = s;
            }
        };
        bool done = false;
        for (int j = 0; j < mmax && !done; ++j) {
            apply_operator(H, std::span<const cplx>(col(j), n), w);
            ++st.matvecs;
            double a = 0;
            for (std::size_t i = 0; i < n; ++i)
                a += (std::conj(col(j)[i]) * w[i]).real();
            for (std::size_t i = 0; i < n; ++i)
                w[i] -= a * col(j)[i];
            if (j > 0)
                for (std::size_t i = 0; i < n; ++i)
                    w[i] -= beta[j - 1] * col(j - 1)[i];
            // Small sectors get full reorthogonalization since the Krylov space can exhaust
            // them; otherwise only the last two vectors, the exponential tolerates the slow
            // global loss of orthogonality of plain Lanczos.
            for (int k = full_reorth ? 0 : std::max(0, j - 1); k <= j; ++k) {
                cplx c = 0;
                const cplx *vk = col(k);
                for (std::size_t i = 0; i < n; ++i)
                    c += std::conj(vk[i]) * w[i];
                for (std::size_t i = 0; i < n; ++i)
                    w[i] -= c * vk[i];
                if (k == j)
                    a += c.real();
            }
            double b = std::sqrt(norm2(w));
            alpha.push_back(a);
            const int m = j + 1;
            bool happy = b <= 1e-13 * hscale || m == static_cast<int>(n);

            // the small eigenproblem is only solved at a few subspace sizes
            bool check = happy || m == mmax || m == 3 || m == 5 || m == 8 || (m >= 12 && m % 6 == 0);
            if (!check) {
                beta.push_back(b);
                for (std::size_t i = 0; i < n; ++i)
                    col(j + 1)[i] = w[i] / b;
                continue;
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
            Eigen::VectorXd e = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                      : Eigen::VectorXd();
            es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
            theta = es.eigenvalues();
            S = es.eigenvectors();

            Eigen::VectorXcd y;
            // |y(m-1)| cannot be resolved below a few m*eps; an estimate at that floor counts as zero
            const double floor = 8.0 * m * std::numeric_limits<double>::epsilon();
            auto err = [&](double h) {
                krylov_coeffs(h, m, y);
                return b * std::max(0.0, std::abs(y(m - 1)) - floor);
            };
            double h_acc = -1;
            if (happy)
                h_acc = remaining;
            else if (err(h_try) <= tol * h_try / total)
                h_acc = h_try;
            else if (m == mmax) {
                // largest admissible step by bisection on the cheap spectral form
                double lo = 0, hi = h_try;
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo + hi);
                    if (err(mid) <= tol * mid / total)
                        lo = mid;
                    else
                        hi = mid;
                }
                if (lo <= total * 1e-15)
                    throw NumericError("Krylov step size underflow");
                h_acc = lo;
            }
            if (h_acc > 0) {
                krylov_coeffs(h_acc, m, y);
                std::fill(psi.begin(), psi.end(), cplx(0));
                for (int k = 0; k < m; ++k) {
                    cplx c = b0 * y(k);
                    const cplx *vk = col(k);
                    for (std::size_t i = 0; i < n; ++i)
                        psi[i] += c * vk[i];
                }
                remaining -= h_acc;
                if (remaining < total * 1e-15)
                    remaining = 0;
                h_last = h_acc;
                done = true;
            } else {
                beta.push_back(b);
                for (std::size_t i = 0; i < n; ++i)
                    col(j + 1)[i] = w[i] / b;
            }
        }
        ++st.substeps;
    }
    return st;
}

CVec propagate(const SparseOperator &H, const CVec &psi, double t, double tol, const KrylovOptions &opt) {
    CVec out = psi;
    propagate_inplace(H, out, t, tol, opt);
    return out;
}

// ---- states ---------------------------------------------------------------

double MultiSectorState::norm2() const {
    double s = 0;
    for (const auto &sec : sectors)
        s += fockchaos::norm2(sec.amp);
    return s;
}

namespace {

double poisson_pmf(double mean, int N) {
    return std::exp(-mean + N * std::log(mean) - std::lgamma(N + 1.0));
}

CVec coherent_amplitudes(const FockBasis &basis, const CVec &b, double mean) {
    const int L = basis.sites();
    std::vector<double> logabs(L), arg(L);
    for (int j = 0; j < L; ++j) {
        logabs[j] = std::abs(b[j]) > 0 ? std::log(std::abs(b[j])) : -INFINITY;
        arg[j] = std::arg(b[j]);
    }
    CVec amp(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) {
        auto n = basis.state(k);
        double la = -0.5 * mean, ph = 0;
        bool zero = false;
        for (int j = 0; j < L; ++j) {
            if (n[j] == 0)
                continue;
            if (std::isinf(logabs[j])) {
                zero = true;
                break;
            }
            la += n[j] * logabs[j] - 0.5 * std::lgamma(n[j] + 1.0);
            ph += n[j] * arg[j];
        }
        amp[k] = zero ? cplx(0) : std::polar(std::exp(la), ph);
    }
    return amp;
}

} // namespace

MultiSectorState coherent_state(int L, const CVec &b, const CoherentOptions &opt) {
    if (static_cast<int>(b.size()) != L)
        throw DimensionError("coherent_state: b has wrong length");
    double mean = 0;
    for (auto x : b)
        mean += std::norm(x);
    if (!(mean > 0))
        throw ArgumentError("coherent_state: sum |b|^2 must be positive");
    double sigma = std::sqrt(mean);
    int nlo = std::max(0, static_cast<int>(std::ceil(mean - opt.k_sigma * sigma)));
    int nhi = static_cast<int>(std::floor(mean + opt.k_sigma * sigma));
    MultiSectorState st;
    st.L = L;
    double outside = 0;
    for (int N = 0; N < nlo; ++N)
        outside += poisson_pmf(mean, N);
    for (int N = nhi + 1;; ++N) {
        double p = poisson_pmf(mean, N);
        outside += p;
        if (p < 1e-20 * std::max(outside, 1e-300) || p < 1e-300)
            break;
    }
    st.truncated_weight = outside;
    if (outside > opt.error_weight)
        throw NumericError("coherent_state: truncated weight " + std::to_string(outside) + " exceeds " +
                           std::to_string(opt.error_weight));
    st.warning = outside > opt.warn_weight;
    for (int N = nlo; N <= nhi; ++N) {
        auto basis = std::make_shared<const FockBasis>(L, N, opt.cap);
        Sector s;
        s.N = N;
        s.amp = coherent_amplitudes(*basis, b, mean);
        s.basis = std::move(basis);
        st.sectors.push_back(std::move(s));
    }
    return st;
}

MultiSectorState coherent_state_in_sector(int L, int N, const CVec &b, std::size_t cap) {
    if (static_cast<int>(b.size()) != L)
        throw DimensionError("coherent_state_in_sector: b has wrong length");
    double mean = 0;
    for (auto x : b)
        mean += std::norm(x);
    if (!(mean > 0))
        throw ArgumentError("coherent_state_in_sector: sum |b|^2 must be positive");
    auto basis = std::make_shared<const FockBasis>(L, N, cap);
    Sector s;
    s.N = N;
    s.amp = coherent_amplitudes(*basis, b, mean);
    double nn = norm2(s.amp);
    if (!(nn > 0))
        throw NumericError("coherent state has no weight in sector N=" + std::to_string(N));
    MultiSectorState st;
    st.L = L;
    st.truncated_weight = 1.0 - nn;
    for (auto &x : s.amp)
        x /= std::sqrt(nn);
    s.basis = std::move(basis);
    st.sectors.push_back(std::move(s));
    return st;
}

MultiSectorState fock_state(const std::vector<int> &n) {
    int N = 0;
    for (int x : n)
        N += x;
    auto basis = std::make_shared<const FockBasis>(static_cast<int>(n.size()), N);
    Sector s;
    s.N = N;
    s.amp.assign(basis->size(), 0.0);
    s.amp[basis->index(n)] = 1.0;
    s.basis = std::move(basis);
    MultiSectorState st;
    st.L = static_cast<int>(n.size());
    st.sectors.push_back(std::move(s));
    return st;
}

// ---- time series ----------------------------------------------------------

void check_uniform_grid(const std::vector<double> &t) {
    if (t.size() < 2)
        return;
    double dt = t[1] - t[0];
    if (!(dt > 0))
        throw ArgumentError("time grid must be strictly increasing");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (std::abs((t[k] - t[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(t[k])))
            throw ArgumentError("time grid must be uniform");
}

std::vector<double> uniform_grid(double t0, double t1, std::size_t n) {
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = t0;
        return g;
    }
    for (std::size_t k = 0; k < n; ++k)
        g[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n - 1);
    return g;
}

namespace {
void check_increasing(const std::vector<double> &t) {
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1]))
            throw ArgumentError("time grid must be strictly increasing");
}
} // namespace

AutocorrelationResult autocorrelation(const LatticeParams &params, const MultiSectorState &state,
                                      const std::vector<double> &t_grid, double tol) {
    check_increasing(t_grid);
    if (state.L != params.L)
        throw DimensionError("state and params disagree on L");
    const std::size_t nt = t_grid.size();
    std::vector<CVec> partial(state.sectors.size(), CVec(nt, 0.0));
    parallel_for(state.sectors.size(), [&](std::size_t s) {
        const auto &sec = state.sectors[s];
        auto H = assemble_hamiltonian(*sec.basis, params);
        CVec v = sec.amp;
        double tprev = 0;
        for (std::size_t k = 0; k < nt; ++k) {
            propagate_inplace(H, v, t_grid[k] - tprev, tol);
            tprev = t_grid[k];
            partial[s][k] = dot(sec.amp, v);
        }
    });
    AutocorrelationResult r;
    r.amplitude.t = t_grid;
    r.amplitude.value.assign(nt, 0.0);
    for (const auto &p : partial)
        for (std::size_t k = 0; k < nt; ++k)
            r.amplitude.value[k] += p[k];
    r.probability.resize(nt);
    for (std::size_t k = 0; k < nt; ++k)
        r.probability[k] = std::norm(r.amplitude.value[k]);
    return r;
}

SpectrumCurve weighted_spectrum(const TimeSeries &A, double eta, const std::vector<double> &E_grid) {
    if (!(eta > 0))
        throw ArgumentError("weighted_spectrum: eta must be positive");
    if (A.t.size() < 2 || A.t.size() != A.value.size())
        throw ArgumentError("weighted_spectrum: need at least two samples");
    check_uniform_grid(A.t);
    if (std::abs(A.t[0]) > 1e-12)
        throw ArgumentError("weighted_spectrum: time grid must start at 0");
    const double dt = A.t[1] - A.t[0];
    SpectrumCurve out;
    out.E = E_grid;
    out.weight.resize(E_grid.size());
    std::vector<cplx> damped(A.t.size());
    for (std::size_t k = 0; k < A.t.size(); ++k)
        damped[k] = A.value[k] * std::exp(-0.5 * eta * eta * A.t[k] * A.t[k]) * (k == 0 ? 0.5 : 1.0);
    for (std::size_t e = 0; e < E_grid.size(); ++e) {
        cplx s = 0;
        for (std::size_t k = 0; k < A.t.size(); ++k)
            s += damped[k] * std::polar(1.0, E_grid[e] * A.t[k]);
        out.weight[e] = s.real() * dt / std::numbers::pi;
    }
    return out;
}

std::vector<double> transition_probabilities(const SparseOperator &H, const FockBasis &basis,
                                             const std::vector<int> &n_i, double t, double tol) {
    if (H.dim != basis.size())
        throw DimensionError("transition_probabilities: H and basis differ");
    CVec v(basis.size(), 0.0);
    v[basis.index(n_i)] = 1.0;
    propagate_inplace(H, v, t, tol);
    std::vector<double> p(v.size());
    for (std::size_t k = 0; k < v.size(); ++k)
        p[k] = std::norm(v[k]);
    return p;
}

double transition_probability(const SparseOperator &H, const FockBasis &basis, const std::vector<int> &n_i,
                              const std::vector<int> &n_f, double t, double tol) {
    if (!basis.contains(n_f))
        throw ArgumentError("transition_probability: n_f not in the sector of n_i");
    auto p = transition_probabilities(H, basis, n_i, t, tol);
    return p[basis.index(n_f)];
}

// ---- coherent backscattering ---------------------------------------------

std::vector<std::vector<int>> lattice_images(const std::vector<int> &n, Geometry g) {
    std::set<std::vector<int>> out;
    const int L = static_cast<int>(n.size());
    std::vector<int> m(n.size());
    if (g == Geometry::ring) {
        for (int s = 0; s < L; ++s)
            for (int refl = 0; refl < 2; ++refl) {
                for (int j = 0; j < L; ++j) {
                    int src = refl ? ((s - j) % L + L) % L : (j + s) % L;
                    m[j] = n[src];
                }
                out.insert(m);
            }
    } else {
        out.insert(n);
        out.insert(std::vector<int>(n.rbegin(), n.rend()));
    }
    return {out.begin(), out.end()};
}

std::vector<CbsPoint> cbs_experiment(const LatticeParams &params, const std::vector<int> &n_i,
                                     const std::vector<double> &phi_list, const CbsOptions &opt) {
    if (static_cast<int>(n_i.size()) != params.L)
        throw DimensionError("cbs: initial state length differs from L");
    if (!(opt.t_end > opt.t_start) || opt.t_start < 0 || opt.n_times < 2)
        throw ArgumentError("cbs: invalid time window");
    int N = 0;
    for (int x : n_i)
        N += x;
    FockBasis basis(params.L, N);
    const std::size_t i0 = basis.index(n_i);

    std::set<std::size_t> excluded;
    excluded.insert(i0);
    if (opt.exclude_images)
        for (const auto &m : lattice_images(n_i, params.geometry))
            excluded.insert(basis.index(m));
    const double e0 = diagonal_energy(n_i, params);
    std::vector<std::size_t> shell;
    for (std::size_t k = 0; k < basis.size(); ++k)
        if (!excluded.count(k) && std::abs(diagonal_energy(basis.state(k), params) - e0) <= opt.shell_width)
            shell.push_back(k);
    if (shell.empty())
        throw NumericError("cbs: empty background set, widen the energy shell");

    std::vector<CbsPoint> out(phi_list.size());
    parallel_for(phi_list.size(), [&](std::size_t q) {
        LatticeParams p = params;
        p.phi = phi_list[q];
        auto H = assemble_hamiltonian(basis, p);
        CVec v(basis.size(), 0.0);
        v[i0] = 1.0;
        propagate_inplace(H, v, opt.t_start, opt.tol);
        const double dt = (opt.t_end - opt.t_start) / static_cast<double>(opt.n_times - 1);
        std::vector<double> first(basis.size(), 0.0), second(basis.size(), 0.0);
        const std::size_t half = opt.n_times / 2;
        for (std::size_t k = 0; k < opt.n_times; ++k) {
            if (k > 0)
                propagate_inplace(H, v, dt, opt.tol);
            auto &acc = k < half ? first : second;
            for (std::size_t i = 0; i < v.size(); ++i)
                acc[i] += std::norm(v[i]);
        }
        auto ratio = [&](const std::vector<double> &acc, double count, double &ret, double &bg) {
            ret = acc[i0] / count;
            bg = 0;
            for (auto k : shell)
                bg += acc[k];
            bg /= count * static_cast<double>(shell.size());
            return ret / bg;
        };
        double r1, b1, r2, b2, r, b;
        double g1 = ratio(first, static_cast<double>(half), r1, b1);
        double g2 = ratio(second, static_cast<double>(opt.n_times - half), r2, b2);
        std::vector<double> all(basis.size());
        for (std::size_t i = 0; i < all.size(); ++i)
            all[i] = first[i] + second[i];
        double g = ratio(all, static_cast<double>(opt.n_times), r, b);
        out[q] = {phi_list[q], g, r, b, shell.size(), opt.n_times, std::abs(g1 - g2) / g};
    });
    return out;
}

// ---- OTOC -----------------------------------------------------------------

std::vector<double> otoc_sector(const SparseOperator &H, const SparseOperator &V, const SparseOperator &W,
                                const CVec &psi, const std::vector<double> &t_grid, double tol) {
    if (!V.diagonal || !W.diagonal)
        throw ArgumentError("otoc: only diagonal V and W are supported");
    check_increasing(t_grid);
    if (!t_grid.empty() && t_grid[0] < 0)
        throw ArgumentError("otoc: times must be non-negative");
    CVec psi_t = psi;
    CVec a_t = apply_operator(V, psi);
    CVec x(psi.size()), y(psi.size());
    std::vector<double> C(t_grid.size());
    double tprev = 0;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        double dt = t_grid[k] - tprev;
        propagate_inplace(H, psi_t, dt, tol);
        propagate_inplace(H, a_t, dt, tol);
        tprev = t_grid[k];
        apply_operator(W, a_t, x);
        apply_operator(W, psi_t, y);
        // back to time zero: x = W(t) V psi, y = W(t) psi
        propagate_inplace(H, x, -t_grid[k], tol);
        propagate_inplace(H, y, -t_grid[k], tol);
        double c = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            c += std::norm(x[i] - V.val[i] * y[i]);
        C[k] = c;
    }
    return C;
}

TimeSeries otoc(const LatticeParams &params, const MultiSectorState &state, const OtocOperators &ops,
                const std::vector<double> &t_grid, double tol) {
    if (state.L != params.L)
        throw DimensionError("state and params disagree on L");
    std::vector<std::vector<double>> parts(state.sectors.size());
    parallel_for(state.sectors.size(), [&](std::size_t s) {
        const auto &sec = state.sectors[s];
        auto H = assemble_hamiltonian(*sec.basis, params);
        auto V = number_weighted_diagonal(*sec.basis, ops.V);
        auto W = number_weighted_diagonal(*sec.basis, ops.W);
        parts[s] = otoc_sector(H, V, W, sec.amp, t_grid, tol);
    });
    TimeSeries ts;
    ts.t = t_grid;
    ts.value.assign(t_grid.size(), 0.0);
    for (const auto &p : parts)
        for (std::size_t k = 0; k < p.size(); ++k)
            ts.value[k] += p[k];
    return ts;
}

OtocGrowth analyse_otoc(const std::vector<double> &t, const std::vector<double> &C, double lambda, double N,
                        double plateau_fraction, int windows) {
    if (t.size() != C.size())
        throw DimensionError("time grid and OTOC trace differ in length");
    if (!(lambda > 0) || !(N > 1))
        throw ArgumentError("growth analysis needs lambda > 0 and N > 1");
    if (!(plateau_fraction > 0 && plateau_fraction <= 1) || windows < 1)
        throw ArgumentError("bad plateau settings");
    OtocGrowth g;
    g.t_ehrenfest = std::log(N) / lambda;
    g.fit_t0 = 1 / lambda;
    g.fit_t1 = g.t_ehrenfest;

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= g.fit_t0 && t[k] <= g.fit_t1 && C[k] > 0) {
            double y = std::log(C[k]);
            sx += t[k];
            sy += y;
            sxx += t[k] * t[k];
            sxy += t[k] * y;
            ++g.fit_points;
        }
    if (g.fit_points < 3)
        throw NumericError("fewer than three OTOC points inside the growth window");
    double n = static_cast<double>(g.fit_points);
    g.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    g.intercept = (sy - g.slope * sx) / n;

    const double t_end = t.back();
    const double from = t_end - plateau_fraction * (t_end - g.t_ehrenfest);
    std::vector<double> late_t, late_c;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] > g.t_ehrenfest && t[k] >= from) {
            late_t.push_back(t[k]);
            late_c.push_back(C[k]);
        }
    g.plateau_points = late_c.size();
    if (g.plateau_points < static_cast<std::size_t>(2 * windows))
        throw NumericError("time grid does not extend far enough past t_E to measure a plateau");
    for (double c : late_c)
        g.plateau += c;
    g.plateau /= static_cast<double>(late_c.size());
    // windows split the plateau interval evenly in time
    const double a = late_t.front(), span = late_t.back() - a;
    for (int w = 0; w < windows; ++w) {
        double lo = a + span * w / windows, hi = a + span * (w + 1) / windows;
        double s = 0;
        int m = 0;
        for (std::size_t k = 0; k < late_t.size(); ++k)
            if (late_t[k] >= lo && (late_t[k] < hi || (w == windows - 1 && late_t[k] <= hi))) {
                s += late_c[k];
                ++m;
            }
        if (m > 0)
            g.stationarity = std::max(g.stationarity, std::abs(s / m - g.plateau) / g.plateau);
    }
    g.t_saturation = g.slope > 0 ? (std::log(g.plateau) - g.intercept) / g.slope : std::nan("");
    return g;
}

} // namespace fockchaos
