#include "fockchaos/twa.hpp"

#include <cmath>
#include <random>

#include "fockchaos/parallel.hpp"

namespace fockchaos {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

CVec draw_sample(const CVec &b, std::uint64_t seed, std::size_t s) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(s))));
    std::normal_distribution<double> g(0.0, 0.5);
    CVec z(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
        double re = g(rng);
        double im = g(rng);
        z[j] = b[j] + cplx(re, im);
    }
    return z;
}

constexpr std::size_t chunk = 64;

// Sum and sum of squares of f(sample, k) over the ensemble, reduced in a fixed order.
template <class Eval>
TwaSeries ensemble_mean(std::size_t n_samples, const std::vector<double> &t_grid, Eval &&eval) {
    const std::size_t nt = t_grid.size();
    const std::size_t nchunks = (n_samples + chunk - 1) / chunk;
    std::vector<std::vector<double>> s1(nchunks), s2(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        s1[c].assign(nt, 0.0);
        s2[c].assign(nt, 0.0);
        std::vector<double> vals(nt);
        for (std::size_t s = c * chunk; s < std::min(n_samples, (c + 1) * chunk); ++s) {
            eval(s, vals);
            for (std::size_t k = 0; k < nt; ++k) {
                s1[c][k] += vals[k];
                s2[c][k] += vals[k] * vals[k];
            }
        }
    });
    TwaSeries out;
    out.t = t_grid;
    out.mean.assign(nt, 0.0);
    out.stderr_.assign(nt, 0.0);
    std::vector<double> sq(nt, 0.0);
    for (std::size_t c = 0; c < nchunks; ++c)
        for (std::size_t k = 0; k < nt; ++k) {
            out.mean[k] += s1[c][k];
            sq[k] += s2[c][k];
        }
    const double n = static_cast<double>(n_samples);
    for (std::size_t k = 0; k < nt; ++k) {
        out.mean[k] /= n;
        double var = n > 1 ? (sq[k] / n - out.mean[k] * out.mean[k]) * n / (n - 1) : 0.0;
        out.stderr_[k] = std::sqrt(std::max(0.0, var) / n);
    }
    return out;
}

// Flow of one sample sampled on t_grid (which may start after 0).
std::vector<CVec> sample_path(const CVec &psi0, const LatticeParams &fp, const std::vector<double> &t_grid,
                              const FlowOptions &opt) {
    if (t_grid.front() == 0.0)
        return gpe_flow(psi0, fp, t_grid, opt).psi;
    std::vector<double> g;
    g.reserve(t_grid.size() + 1);
    g.push_back(0.0);
    g.insert(g.end(), t_grid.begin(), t_grid.end());
    auto psi = gpe_flow(psi0, fp, g, opt).psi;
    psi.erase(psi.begin());
    return psi;
}

void check_grid(const std::vector<double> &t) {
    if (t.empty() || t.front() < 0)
        throw ArgumentError("TWA time grid must be non-empty and start at t >= 0");
}

} // namespace

WignerEnsemble sample_wigner(const CVec &center, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1)
        throw ArgumentError("sample_wigner: need at least one sample");
    WignerEnsemble e;
    e.L = static_cast<int>(center.size());
    e.seed = seed;
    e.center = center;
    e.samples.resize(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s)
        e.samples[s] = draw_sample(center, seed, s);
    return e;
}

namespace symbols {
Symbol occupation(int site) {
    return [site](const CVec &f) { return std::norm(f.at(static_cast<std::size_t>(site))) - 0.5; };
}
Symbol total_number() {
    return [](const CVec &f) { return particle_number(f) - 0.5 * static_cast<double>(f.size()); };
}
Symbol energy(const LatticeParams &p) {
    return [p](const CVec &f) { return classical_hamiltonian(f, p); };
}
Symbol quadrature_re(int site) {
    return [site](const CVec &f) { return f.at(static_cast<std::size_t>(site)).real(); };
}
Symbol quadrature_im(int site) {
    return [site](const CVec &f) { return f.at(static_cast<std::size_t>(site)).imag(); };
}
} // namespace symbols

LatticeParams weyl_flow_params(const LatticeParams &p) {
    LatticeParams q = p;
    q.eps.assign(static_cast<std::size_t>(p.L), 0.0);
    for (int j = 0; j < p.L; ++j)
        q.eps[j] = p.eps_at(j) - p.U;
    return q;
}

TwaSeries twa_expectation(const Symbol &A, const WignerEnsemble &ens, const LatticeParams &p,
                          const std::vector<double> &t_grid, const TwaOptions &opt) {
    check_grid(t_grid);
    if (ens.L != p.L)
        throw DimensionError("ensemble and params disagree on L");
    const LatticeParams fp = opt.weyl_hamiltonian ? weyl_flow_params(p) : p;
    return ensemble_mean(ens.samples.size(), t_grid, [&](std::size_t s, std::vector<double> &vals) {
        std::vector<CVec> path;
        try {
            path = sample_path(ens.samples[s], fp, t_grid, opt.flow);
        } catch (const NumericError &e) {
            throw NumericError("TWA sample " + std::to_string(s) + ": " + e.what());
        }
        for (std::size_t k = 0; k < path.size(); ++k)
            vals[k] = A(path[k]);
    });
}

TwaSeries twa_return(const CVec &center, const LatticeParams &p, const std::vector<double> &t_grid,
                     std::size_t n_samples, std::uint64_t seed, const TwaOptions &opt) {
    check_grid(t_grid);
    if (static_cast<int>(center.size()) != p.L)
        throw DimensionError("center length differs from L");
    if (n_samples < 1)
        throw ArgumentError("twa_return: need at least one sample");
    const LatticeParams fp = opt.weyl_hamiltonian ? weyl_flow_params(p) : p;
    const double norm = std::pow(2.0, p.L);
    return ensemble_mean(n_samples, t_grid, [&](std::size_t s, std::vector<double> &vals) {
        std::vector<CVec> path;
        try {
            path = sample_path(draw_sample(center, seed, s), fp, t_grid, opt.flow);
        } catch (const NumericError &e) {
            throw NumericError("TWA sample " + std::to_string(s) + ": " + e.what());
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            double d = 0;
            for (int j = 0; j < p.L; ++j)
                d += std::norm(path[k][j] - center[j]);
            vals[k] = d > 40 ? 0.0 : norm * std::exp(-2.0 * d);
        }
    });
}

} // namespace fockchaos
