#include "fockchaos/rwm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fockchaos/meanfield.hpp"
#include "fockchaos/parallel.hpp"

namespace fockchaos {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

void check_window(const SpectralWindow &w) {
    if (!(w.eta > 0) || !std::isfinite(w.eta) || !std::isfinite(w.E))
        throw ArgumentError("window needs finite centre and eta > 0");
}

// i^k for integer k
cplx ipow(long k) {
    switch (((k % 4) + 4) % 4) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
    }
}
} // namespace

double SpectralWindow::shape(double x) const { return std::exp(-x * x / (2 * eta * eta)); }
double SpectralWindow::weight(double energy) const { return shape(energy - E); }
double SpectralWindow::fourier(double tau) const {
    return std::sqrt(two_pi) * eta * std::exp(-eta * eta * tau * tau / 2);
}

CovarianceMatrix exact_covariance(const Spectrum &spec, const FockBasis &basis, const SpectralWindow &w,
                                  const std::vector<std::vector<int>> &states, ExactCovarianceInfo *info) {
    check_window(w);
    if (spec.vectors.empty())
        throw ArgumentError("exact covariance needs eigenvectors");
    if (spec.dim != basis.size())
        throw DimensionError("spectrum and basis sizes differ");
    const std::size_t D = spec.dim;
    std::vector<double> W(D);
    double rho = 0;
    std::size_t inside = 0;
    for (std::size_t j = 0; j < D; ++j) {
        W[j] = w.weight(spec.values[j]);
        rho += W[j];
        if (std::abs(spec.values[j] - w.E) <= 2 * w.eta)
            ++inside;
    }
    if (!(rho > 1e-300))
        throw NumericError("empty spectral window");
    if (info) {
        info->window_weight = rho;
        info->states_in_window = inside;
        info->warning = inside < 50;
    }

    const std::size_t S = states.size();
    Eigen::MatrixXcd A(S, D);
    for (std::size_t i = 0; i < S; ++i) {
        std::size_t r = basis.index(states[i]);
        for (std::size_t j = 0; j < D; ++j)
            A(i, j) = spec.vec(r, j) * std::sqrt(W[j] / rho);
    }
    Eigen::MatrixXcd R = A * A.adjoint();

    CovarianceMatrix out;
    out.states = states;
    out.provenance = Provenance::exact;
    out.density = rho;
    out.R.resize(S * S);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < S; ++j)
            out.R[i * S + j] = R(i, j);
    return out;
}

DosResult classical_dos(const LatticeParams &p, int N, const SpectralWindow &w, std::size_t n_mc,
                        std::uint64_t seed) {
    check_window(w);
    p.validate();
    if (n_mc < 10000)
        throw ArgumentError("classical_dos needs at least 1e4 samples");
    // symbol whose value on occupations I is (U/2) sum I(I-1) + sum eps I, matching the diagonal part
    LatticeParams q = p;
    q.eps.assign(static_cast<std::size_t>(p.L), 0.0);
    for (int j = 0; j < p.L; ++j)
        q.eps[static_cast<std::size_t>(j)] = p.eps_at(j) - 0.5 * p.U;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    double s = 0, s2 = 0;
    CVec psi(static_cast<std::size_t>(p.L));
    for (std::size_t k = 0; k < n_mc; ++k) {
        double nrm = 0;
        for (auto &z : psi) {
            z = {g(rng), g(rng)};
            nrm += std::norm(z);
        }
        double scale = std::sqrt(N / nrm);
        for (auto &z : psi)
            z *= scale;
        double v = w.weight(classical_hamiltonian(psi, q));
        s += v;
        s2 += v * v;
    }
    double n = static_cast<double>(n_mc);
    DosResult r;
    r.value = s / n;
    r.stderr_ = std::sqrt(std::max(0.0, s2 / n - r.value * r.value) / (n - 1));
    if (!(r.value > 0))
        throw NumericError("classical energy shell has no support in the window");
    return r;
}

std::vector<double> bessel_j_table(int kmax, double x) {
    if (kmax < 0)
        throw ArgumentError("negative Bessel order");
    std::vector<double> J(static_cast<std::size_t>(kmax) + 1, 0.0);
    const double ax = std::abs(x);
    if (ax == 0.0) {
        J[0] = 1.0;
        return J;
    }
    // Miller: start well above both kmax and x, recur downwards, normalize by J0 + 2 sum J_2k = 1
    int top = std::max(kmax, static_cast<int>(ax));
    int start = top + 20 + static_cast<int>(std::sqrt(160.0 * top));
    start += start & 1;
    double jp = 0.0, j = 1e-300, sum = 0.0;
    for (int k = start; k > 0; --k) {
        double jm = 2.0 * k / ax * j - jp;
        jp = j;
        j = jm;
        if (std::abs(j) > 1e250) {
            j *= 1e-250;
            jp *= 1e-250;
            sum *= 1e-250;
            for (auto &v : J)
                v *= 1e-250;
        }
        // j now holds the unnormalized J_{k-1}
        if (k - 1 <= kmax)
            J[static_cast<std::size_t>(k - 1)] = j;
        if ((k - 1) % 2 == 0 && k - 1 > 0)
            sum += 2 * j;
    }
    sum += j;
    for (auto &v : J)
        v /= sum;
    if (x < 0)
        for (int k = 1; k <= kmax; k += 2)
            J[static_cast<std::size_t>(k)] = -J[static_cast<std::size_t>(k)];
    return J;
}

double bessel_j(int k, double x) {
    int a = std::abs(k);
    double v = bessel_j_table(a, x)[static_cast<std::size_t>(a)];
    return (k < 0 && (a & 1)) ? -v : v;
}

SemiclassicalValue semiclassical_kernel(const std::vector<int> &n, const std::vector<int> &m, const LatticeParams &p,
                                        const SpectralWindow &w, const SemiclassicalOptions &opt,
                                        const std::function<double(const std::vector<double> &)> *diag) {
    check_window(w);
    const int L = p.L;
    if (static_cast<int>(n.size()) != L || static_cast<int>(m.size()) != L)
        throw DimensionError("occupation vectors must have L entries");
    if (opt.q_max < 0 || opt.q_cap < opt.q_max)
        throw ArgumentError("bad winding truncation");
    int Nn = 0, Nm = 0;
    for (int j = 0; j < L; ++j) {
        if (n[j] < 0 || m[j] < 0)
            throw ArgumentError("negative occupation");
        Nn += n[j];
        Nm += m[j];
    }
    SemiclassicalValue out;
    if (Nn != Nm)
        return out; // different sectors never mix

    std::vector<double> I(L);
    for (int j = 0; j < L; ++j)
        I[j] = 0.5 * (n[j] + m[j]);
    double e_diag = 0;
    if (diag) {
        e_diag = (*diag)(I);
    } else {
        for (int j = 0; j < L; ++j)
            e_diag += 0.5 * p.U * I[j] * (I[j] - 1) + p.eps_at(j) * I[j];
    }
    const double c = w.E - e_diag;

    // one Bessel factor per bond; on a ring with L > 2 the closing bond frees the winding Q
    auto bonds = p.bonds();
    const int nb = static_cast<int>(bonds.size());
    const bool winding = nb == L;
    std::vector<long> delta(nb);
    std::vector<double> z(nb);
    long acc = 0, dmax = 0;
    double zsum = 0;
    for (int a = 0; a < nb; ++a) {
        acc += n[bonds[a].first] - m[bonds[a].first];
        delta[a] = acc;
        dmax = std::max(dmax, std::abs(acc));
        z[a] = 2.0 * p.J * std::sqrt(I[bonds[a].first] * I[bonds[a].second]);
        zsum += std::abs(z[a]);
    }

    const double tau_max = std::sqrt(2.0 * std::log(1.0 / opt.tau_cutoff)) / w.eta;
    const double h = two_pi / (std::abs(c) + zsum + 9.0 * w.eta);
    const long K = static_cast<long>(std::ceil(tau_max / h));

    // order of the bond-a factor for winding Q is k = Q - delta_a; each unit of order carries e^{-i phi}
    // (sign fixed against exact diagonalization at phi != 0)
    auto integrate = [&](int qlim, std::vector<cplx> &IQ) {
        const int nq = winding ? 2 * qlim + 1 : 1;
        IQ.assign(static_cast<std::size_t>(nq), 0.0);
        const int kmax = static_cast<int>(dmax) + (winding ? qlim : 0);
        std::vector<std::vector<double>> tab(nb);
        std::vector<cplx> qphase(nq);
        for (int iq = 0; iq < nq; ++iq) {
            long Q = winding ? iq - qlim : 0;
            long ksum = 0;
            for (int a = 0; a < nb; ++a)
                ksum += Q - delta[a];
            qphase[iq] = ipow(ksum) * std::polar(1.0, -p.phi * static_cast<double>(ksum));
        }
        for (long it = 0; it <= K; ++it) {
            const double tau = h * static_cast<double>(it);
            for (int a = 0; a < nb; ++a)
                tab[a] = bessel_j_table(kmax, z[a] * tau);
            const double wt = w.fourier(tau);
            const cplx ep = std::polar(wt, tau * c), em = std::conj(ep);
            for (int iq = 0; iq < nq; ++iq) {
                long Q = winding ? iq - qlim : 0;
                double prod = 1.0;
                long ksum = 0;
                for (int a = 0; a < nb && prod != 0.0; ++a) {
                    long k = Q - delta[a];
                    long ak = std::abs(k);
                    double v = tab[a][static_cast<std::size_t>(ak)];
                    if (k < 0 && (ak & 1))
                        v = -v;
                    prod *= v;
                    ksum += k;
                }
                if (it == 0) {
                    IQ[iq] += qphase[iq] * prod * ep;
                } else {
                    // J_k(-x) = (-1)^k J_k(x), so the -tau product differs by (-1)^{sum k}
                    double sgn = (ksum & 1) ? -1.0 : 1.0;
                    IQ[iq] += qphase[iq] * prod * (ep + sgn * em);
                }
            }
        }
        for (auto &v : IQ)
            v *= h / two_pi;
    };

    const double floor = 1e-12; // absolute scale, window peak is 1
    int qlim = winding ? opt.q_max + 2 : 0;
    std::vector<cplx> IQ;
    while (true) {
        integrate(qlim, IQ);
        if (!winding) {
            out.value = IQ[0];
            out.q_used = 0;
            return out;
        }
        // partial sums S_q over |Q| <= q; accept the first q >= q_max with |S_{q+2} - S_q| small
        auto partial = [&](int q) {
            cplx s = 0;
            for (int Q = -q; Q <= q; ++Q)
                s += IQ[static_cast<std::size_t>(Q + qlim)];
            return s;
        };
        for (int q = opt.q_max; q + 2 <= qlim; ++q) {
            cplx a = partial(q), b = partial(q + 2);
            if (std::abs(b - a) <= opt.rel_tol * std::max(std::abs(b), floor)) {
                out.value = b;
                out.q_used = q + 2;
                return out;
            }
        }
        if (qlim >= opt.q_cap) {
            out.value = partial(qlim);
            out.q_used = qlim;
            out.converged = false;
            return out;
        }
        qlim = std::min(opt.q_cap, 2 * qlim);
    }
}

cplx semiclassical_covariance(const std::vector<int> &n, const std::vector<int> &m, const LatticeParams &p,
                              const SpectralWindow &w, double rho, const SemiclassicalOptions &opt) {
    if (!(rho > 0))
        throw ArgumentError("density must be positive");
    auto v = semiclassical_kernel(n, m, p, w, opt);
    if (!v.converged)
        throw NumericError("winding sum did not converge below the configured cap");
    return v.value / rho;
}

CovarianceMatrix semiclassical_covariance_matrix(const std::vector<std::vector<int>> &states, const LatticeParams &p,
                                                 const SpectralWindow &w, double rho,
                                                 const SemiclassicalOptions &opt, int *max_q_used) {
    if (!(rho > 0))
        throw ArgumentError("density must be positive");
    const std::size_t S = states.size();
    CovarianceMatrix out;
    out.states = states;
    out.provenance = Provenance::semiclassical;
    out.density = rho;
    out.R.assign(S * S, 0.0);
    std::vector<int> qused(S, 0);
    std::vector<char> failed(S, 0);
    parallel_for(S, [&](std::size_t i) {
        for (std::size_t j = i; j < S; ++j) {
            auto v = semiclassical_kernel(states[i], states[j], p, w, opt);
            if (!v.converged)
                failed[i] = 1;
            qused[i] = std::max(qused[i], v.q_used);
            out.R[i * S + j] = v.value / rho;
            out.R[j * S + i] = std::conj(v.value) / rho;
        }
    });
    if (std::any_of(failed.begin(), failed.end(), [](char f) { return f != 0; }))
        throw NumericError("winding sum did not converge below the configured cap");
    if (max_q_used)
        *max_q_used = S ? *std::max_element(qused.begin(), qused.end()) : 0;
    return out;
}

NormalizedCorrelator normalized_correlator(const CovarianceMatrix &cov) {
    const std::size_t S = cov.size();
    if (cov.R.size() != S * S)
        throw DimensionError("covariance matrix size mismatch");
    std::vector<double> d(S);
    for (std::size_t i = 0; i < S; ++i) {
        d[i] = cov.at(i, i).real();
        if (!(d[i] > 0))
            throw NumericError("covariance diagonal must be strictly positive");
    }
    NormalizedCorrelator out;
    out.n = S;
    out.C.resize(S * S);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < S; ++j) {
            cplx v = i == j ? cplx(1.0) : cov.at(i, j) / std::sqrt(d[i] * d[j]);
            out.C[i * S + j] = v;
            out.max_abs = std::max(out.max_abs, std::abs(v));
        }
    out.exceeds_one = out.max_abs > 1 + 1e-10;
    return out;
}

std::vector<std::vector<int>> occupation_ball(const std::vector<int> &seed, int radius) {
    if (radius < 0)
        throw ArgumentError("negative radius");
    const int L = static_cast<int>(seed.size());
    int N = 0;
    for (int x : seed)
        N += x;
    std::vector<std::vector<int>> out;
    std::vector<int> cur(L);
    auto rec = [&](auto &&self, int j, int left) -> void {
        if (j == L - 1) {
            if (std::abs(left - seed[j]) <= radius) {
                cur[j] = left;
                out.push_back(cur);
            }
            return;
        }
        for (int v = std::min(left, seed[j] + radius); v >= std::max(0, seed[j] - radius); --v) {
            cur[j] = v;
            self(self, j + 1, left - v);
        }
    };
    if (L > 0)
        rec(rec, 0, N);
    return out;
}

namespace {
void check_monomial(const Monomial &f, std::size_t S) {
    if (f.plain.size() + f.conjugated.size() > 4)
        throw ArgumentError("monomials above degree 4 are not supported");
    for (auto i : f.plain)
        if (i >= S)
            throw DimensionError("monomial index out of range");
    for (auto i : f.conjugated)
        if (i >= S)
            throw DimensionError("monomial index out of range");
}
} // namespace

cplx gaussian_average(const std::vector<Monomial> &F, const CovarianceMatrix &cov) {
    const std::size_t S = cov.size();
    cplx total = 0;
    for (const auto &f : F) {
        check_monomial(f, S);
        // circular Gaussian: only balanced monomials survive, and the average is the permanent
        if (f.plain.size() != f.conjugated.size())
            continue;
        std::vector<std::size_t> perm(f.conjugated.size());
        for (std::size_t k = 0; k < perm.size(); ++k)
            perm[k] = k;
        cplx per = 0;
        do {
            cplx term = 1;
            for (std::size_t k = 0; k < perm.size(); ++k)
                term *= cov.at(f.plain[k], f.conjugated[perm[k]]);
            per += term;
        } while (std::next_permutation(perm.begin(), perm.end()));
        total += f.coeff * per;
    }
    return total;
}

McAverage gaussian_average_mc(const std::vector<Monomial> &F, const CovarianceMatrix &cov, std::size_t n_samples,
                              std::uint64_t seed) {
    const std::size_t S = cov.size();
    for (const auto &f : F)
        check_monomial(f, S);
    if (n_samples < 2)
        throw ArgumentError("need at least two samples");
    Eigen::MatrixXcd R(S, S);
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < S; ++j)
            R(i, j) = 0.5 * (cov.at(i, j) + std::conj(cov.at(j, i)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
    // factor R = B B^H, negative eigenvalues (semiclassical input) are clipped
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXcd B = es.eigenvectors() * lam.asDiagonal();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    Eigen::VectorXcd x(S), a(S);
    cplx s = 0;
    double s2 = 0;
    for (std::size_t k = 0; k < n_samples; ++k) {
        for (std::size_t i = 0; i < S; ++i)
            x(i) = {g(rng), g(rng)};
        a = B * x;
        cplx v = 0;
        for (const auto &f : F) {
            cplx t = f.coeff;
            for (auto i : f.plain)
                t *= a(i);
            for (auto i : f.conjugated)
                t *= std::conj(a(i));
            v += t;
        }
        s += v;
        s2 += std::norm(v);
    }
    double n = static_cast<double>(n_samples);
    McAverage out;
    out.mean = s / n;
    out.stderr_ = std::sqrt(std::max(0.0, s2 / n - std::norm(out.mean)) / (n - 1));
    return out;
}

double pearson(const std::vector<double> &a, const std::vector<double> &b) {
    if (a.size() != b.size() || a.size() < 2)
        throw DimensionError("pearson needs two equal samples of size >= 2");
    double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0 && sbb > 0))
        throw NumericError("pearson of a constant sample");
    return sab / std::sqrt(saa * sbb);
}

} // namespace fockchaos
