#include "fockchaos/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fockchaos/parallel.hpp"
#include "fockchaos/quantum.hpp"

namespace fockchaos {

namespace {
constexpr double pi = std::numbers::pi;

std::vector<double> counting_gaussian(const std::vector<double> &e, double sigma_spacings) {
    const std::size_t n = e.size();
    // local mean spacing from a symmetric stencil of +-k levels
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(4 * sigma_spacings)), (n - 1) / 2);
    std::vector<double> sig(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= k ? i - k : 0, hi = std::min(n - 1, lo + 2 * k);
        lo = hi >= 2 * k ? hi - 2 * k : 0;
        double s = (e[hi] - e[lo]) / static_cast<double>(hi - lo);
        sig[i] = sigma_spacings * std::max(s, 1e-300);
    }
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        double c = 0;
        for (std::size_t i = 0; i < n; ++i)
            c += 0.5 * std::erfc(-(e[j] - e[i]) / (std::sqrt(2.0) * sig[i]));
        x[j] = c;
    }
    return x;
}

std::vector<double> counting_polynomial(const std::vector<double> &e, int degree) {
    const std::size_t n = e.size();
    const double a = e.front(), b = e.back();
    const double mid = 0.5 * (a + b), half = std::max(0.5 * (b - a), 1e-300);
    // Chebyshev basis on the scaled energy keeps the fit well conditioned
    Eigen::MatrixXd A(n, degree + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = (e[i] - mid) / half;
        A(i, 0) = 1;
        if (degree >= 1)
            A(i, 1) = u;
        for (int d = 2; d <= degree; ++d)
            A(i, d) = 2 * u * A(i, d - 1) - A(i, d - 2);
        y(i) = static_cast<double>(i) + 0.5;
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    Eigen::VectorXd x = A * c;
    return {x.data(), x.data() + n};
}
} // namespace

UnfoldedSpectrum unfold(std::vector<double> eigs, const UnfoldOptions &opt) {
    if (eigs.size() < 200)
        throw ArgumentError("unfolding needs at least 200 levels");
    if (!(opt.trim >= 0 && opt.trim < 0.5))
        throw ArgumentError("trim fraction must lie in [0, 0.5)");
    for (double v : eigs)
        if (!std::isfinite(v))
            throw NumericError("non-finite eigenvalue");
    std::sort(eigs.begin(), eigs.end());
    UnfoldedSpectrum out;
    out.raw = eigs;
    std::vector<double> x;
    char buf[128];
    if (opt.method == UnfoldMethod::gaussian_counting) {
        if (!(opt.sigma_spacings > 0))
            throw ArgumentError("broadening must be positive");
        x = counting_gaussian(eigs, opt.sigma_spacings);
        std::snprintf(buf, sizeof buf, "gaussian counting, sigma=%g spacings, trim=%g", opt.sigma_spacings, opt.trim);
    } else {
        if (opt.degree < 1 || opt.degree > 30)
            throw ArgumentError("polynomial degree must lie in [1, 30]");
        x = counting_polynomial(eigs, opt.degree);
        std::snprintf(buf, sizeof buf, "polynomial staircase fit, degree=%d, trim=%g", opt.degree, opt.trim);
    }
    out.recipe = buf;
    const std::size_t n = x.size();
    const std::size_t cut = static_cast<std::size_t>(std::floor(opt.trim * static_cast<double>(n)));
    out.x.assign(x.begin() + static_cast<long>(cut), x.end() - static_cast<long>(cut));
    if (out.x.size() < 2)
        throw ArgumentError("nothing left after trimming");
    out.bulk_mean_spacing = (out.x.back() - out.x.front()) / static_cast<double>(out.x.size() - 1);
    return out;
}

std::vector<double> spacings(const std::vector<double> &x) {
    std::vector<double> s;
    for (std::size_t i = 1; i < x.size(); ++i)
        s.push_back(x[i] - x[i - 1]);
    return s;
}

double mean_gap_ratio(std::vector<double> eigs, double bulk) {
    if (eigs.size() < 3)
        throw ArgumentError("gap ratio needs at least three levels");
    if (!(bulk > 0 && bulk <= 1))
        throw ArgumentError("bulk fraction must lie in (0, 1]");
    std::sort(eigs.begin(), eigs.end());
    const std::size_t n = eigs.size();
    const std::size_t skip = static_cast<std::size_t>(0.5 * (1 - bulk) * static_cast<double>(n));
    double sum = 0;
    std::size_t cnt = 0;
    for (std::size_t i = std::max<std::size_t>(skip, 1); i + 1 < n - skip; ++i) {
        double a = eigs[i] - eigs[i - 1], b = eigs[i + 1] - eigs[i];
        double hi = std::max(a, b);
        if (hi > 0) {
            sum += std::min(a, b) / hi;
            ++cnt;
        }
    }
    if (cnt == 0)
        throw NumericError("degenerate spectrum");
    return sum / static_cast<double>(cnt);
}

double poisson_spacing_cdf(double s) { return s <= 0 ? 0.0 : 1.0 - std::exp(-s); }
double wigner_surmise_cdf(double s) { return s <= 0 ? 0.0 : 1.0 - std::exp(-pi * s * s / 4); }

KsResult ks_test(std::vector<double> sample, const std::function<double(double)> &cdf) {
    if (sample.empty())
        throw ArgumentError("empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    // asymptotic Kolmogorov distribution with the Stephens small-sample correction
    double sq = std::sqrt(n);
    double lam = (sq + 0.12 + 0.11 / sq) * d;
    double p = 0;
    if (lam < 1e-3) {
        p = 1;
    } else {
        for (int j = 1; j <= 200; ++j) {
            double term = 2 * ((j & 1) ? 1 : -1) * std::exp(-2.0 * j * j * lam * lam);
            p += term;
            if (std::abs(term) < 1e-16)
                break;
        }
    }
    return {d, std::clamp(p, 0.0, 1.0)};
}

std::vector<double> form_factor(const std::vector<UnfoldedSpectrum> &ensemble, const std::vector<double> &tau,
                                const FormFactorOptions &opt) {
    if (ensemble.size() < opt.min_realizations)
        throw ArgumentError("form factor needs more realizations for averaging");
    for (double t : tau)
        if (!(t > 0 && t <= 4))
            throw ArgumentError("tau must lie in (0, 4]");
    // the moving average must sample finer than the transform resolution 1 / levels to use every level
    std::size_t levels = 0;
    for (const auto &u : ensemble)
        levels = std::max(levels, u.x.size());
    int ns = opt.smoothing_points > 0 ? opt.smoothing_points
                                      : 1 + 2 * static_cast<int>(std::ceil(opt.smoothing * static_cast<double>(levels)));
    if (opt.smoothing <= 0)
        ns = 1;
    std::vector<double> sub; // offsets of the moving average
    for (int k = 0; k < ns; ++k)
        sub.push_back(ns == 1 ? 0.0 : opt.smoothing * (static_cast<double>(k) / (ns - 1) - 0.5));

    const std::size_t R = ensemble.size();
    const double step = ns == 1 ? 0.0 : opt.smoothing / (ns - 1);
    std::vector<double> out(tau.size(), 0.0);
    std::vector<cplx> mean(static_cast<std::size_t>(ns));
    std::vector<double> mean_abs2(static_cast<std::size_t>(ns));
    std::vector<cplx> s(static_cast<std::size_t>(ns));
    for (std::size_t it = 0; it < tau.size(); ++it) {
        std::fill(mean.begin(), mean.end(), cplx(0));
        std::fill(mean_abs2.begin(), mean_abs2.end(), 0.0);
        double norm = 0;
        const double t0 = tau[it] + sub.front();
        for (const auto &u : ensemble) {
            const auto &x = u.x;
            const double xc = 0.5 * (x.front() + x.back());
            const double w = opt.taper * static_cast<double>(x.size());
            std::fill(s.begin(), s.end(), cplx(0));
            for (double v : x) {
                double g = std::exp(-(v - xc) * (v - xc) / (2 * w * w));
                // walk across the smoothing window by repeated multiplication
                cplx e = std::polar(g, 2 * pi * v * t0);
                const cplx r = std::polar(1.0, 2 * pi * v * step);
                for (int k = 0; k < ns; ++k) {
                    s[static_cast<std::size_t>(k)] += e;
                    e *= r;
                }
                norm += g * g;
            }
            for (int k = 0; k < ns; ++k) {
                mean[static_cast<std::size_t>(k)] += s[static_cast<std::size_t>(k)];
                mean_abs2[static_cast<std::size_t>(k)] += std::norm(s[static_cast<std::size_t>(k)]);
            }
        }
        double acc = 0;
        const double nr = static_cast<double>(R);
        for (int k = 0; k < ns; ++k)
            acc += mean_abs2[static_cast<std::size_t>(k)] / nr - std::norm(mean[static_cast<std::size_t>(k)] / nr);
        out[it] = acc / ns / (norm / nr);
    }
    return out;
}

double goe_form_factor(double tau) {
    if (!(tau > 0))
        throw ArgumentError("tau must be positive");
    if (tau <= 1)
        return 2 * tau - tau * std::log1p(2 * tau);
    return 2 - tau * std::log((2 * tau + 1) / (2 * tau - 1));
}

double diagonal_ramp(double tau, SymmetryClass c) {
    if (!(tau > 0))
        throw ArgumentError("tau must be positive");
    switch (c) {
    case SymmetryClass::orthogonal: return 2 * tau;
    case SymmetryClass::unitary: return tau;
    }
    throw ArgumentError("unknown symmetry class");
}

RampFit fit_ramp(const std::vector<double> &tau, const std::vector<double> &K, double lo, double hi) {
    if (tau.size() != K.size())
        throw DimensionError("tau and K differ in length");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < tau.size(); ++i)
        if (tau[i] >= lo && tau[i] <= hi)
            idx.push_back(i);
    if (idx.size() < 3)
        throw ArgumentError("ramp fit needs three points in range");
    Eigen::MatrixXd A(idx.size(), 2);
    Eigen::VectorXd y(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        A(r, 0) = tau[idx[r]];
        A(r, 1) = tau[idx[r]] * tau[idx[r]];
        y(r) = K[idx[r]];
    }
    Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
    return {c(0), c(1)};
}

std::vector<std::vector<double>> disorder_spectra(const LatticeParams &base, int N, double W, std::size_t realizations,
                                                  std::uint64_t seed) {
    base.validate();
    if (W < 0)
        throw ArgumentError("disorder strength must be non-negative");
    auto basis = build_basis(base.L, N);
    // draw every realization up front so the result does not depend on the thread count
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-W, W);
    std::vector<LatticeParams> ps(realizations, base);
    for (auto &p : ps) {
        p.eps.assign(static_cast<std::size_t>(p.L), 0.0);
        for (int j = 0; j < p.L; ++j)
            p.eps[static_cast<std::size_t>(j)] = base.eps_at(j) + u(rng);
    }
    std::vector<std::vector<double>> out(realizations);
    parallel_for(realizations, [&](std::size_t r) {
        out[r] = diagonalize(assemble_hamiltonian(basis, ps[r]), false).values;
    });
    return out;
}

} // namespace fockchaos
