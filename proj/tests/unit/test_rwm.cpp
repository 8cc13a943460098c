#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fockchaos/rwm.hpp"
#include "oracles.hpp"

using namespace fockchaos;

namespace {
LatticeParams chain(int L, double J, double U, double phi = 0) {
    LatticeParams p;
    p.L = L;
    p.J = J;
    p.U = U;
    p.phi = phi;
    return p;
}

std::vector<std::vector<int>> every_state(const FockBasis &b) {
    std::vector<std::vector<int>> s;
    for (std::size_t k = 0; k < b.size(); ++k)
        s.push_back(b.occupations(k));
    return s;
}

// brute force: Simpson over a fine tau grid, std::cyl_bessel_j, explicit winding sum
cplx kernel_oracle(const std::vector<int> &n, const std::vector<int> &m, const LatticeParams &p,
                   const SpectralWindow &w, int qmax) {
    const int L = p.L;
    std::vector<double> I(L);
    double ed = 0;
    for (int j = 0; j < L; ++j) {
        I[j] = 0.5 * (n[j] + m[j]);
        ed += 0.5 * p.U * I[j] * (I[j] - 1);
    }
    std::vector<int> d(L);
    int acc = 0;
    for (int j = 0; j < L; ++j) {
        acc += n[j] - m[j];
        d[j] = acc;
    }
    auto J = [](int k, double x) {
        double s = (x < 0 && (std::abs(k) & 1)) ? -1 : 1;
        double v = std::cyl_bessel_j(std::abs(k), std::abs(x));
        return (k < 0 && (std::abs(k) & 1)) ? -s * v : s * v;
    };
    const int M = 8000;
    const double T = 9.0 / w.eta, h = 2 * T / M;
    cplx total = 0;
    for (int i = 0; i <= M; ++i) {
        double tau = -T + i * h;
        double wgt = (i == 0 || i == M) ? 1 : (i % 2 ? 4 : 2);
        cplx f = 0;
        for (int Q = -qmax; Q <= qmax; ++Q) {
            cplx prod = 1;
            for (int a = 0; a < L; ++a) {
                int k = Q - d[a];
                double z = 2 * p.J * std::sqrt(I[a] * I[(a + 1) % L]);
                prod *= std::pow(cplx(0, 1), k) * std::polar(1.0, -p.phi * k) * J(k, z * tau);
            }
            f += prod;
        }
        total += wgt * w.fourier(tau) * std::polar(1.0, tau * (w.E - ed)) * f;
    }
    return total * h / 3.0 / (2 * std::numbers::pi);
}
} // namespace

TEST_CASE("window Fourier pair") {
    SpectralWindow w{0.0, 0.7};
    const int M = 4000;
    const double T = 12 / w.eta, h = 2 * T / M;
    for (double x : {0.0, 0.3, 1.1, 2.5}) {
        cplx s = 0;
        for (int i = 0; i <= M; ++i) {
            double tau = -T + i * h;
            s += (i == 0 || i == M ? 0.5 : 1.0) * w.fourier(tau) * std::polar(1.0, tau * x);
        }
        s *= h / (2 * std::numbers::pi);
        CHECK(std::abs(s - w.shape(x)) < 1e-10);
    }
    CHECK(w.weight(0.0) == 1.0);
}

TEST_CASE("Bessel table against the standard library") {
    double worst = 0;
    for (double x : {1e-3, 0.1, 1.0, 4.7, 20.0, 61.3, 150.0}) {
        auto t = bessel_j_table(200, x);
        for (int k = 0; k <= 200; ++k)
            worst = std::max(worst, std::abs(t[k] - std::cyl_bessel_j(k, x)));
    }
    CHECK(worst < 1e-13);
    CHECK(bessel_j(3, -2.0) == doctest::Approx(-std::cyl_bessel_j(3, 2.0)).epsilon(1e-13));
    CHECK(bessel_j(-3, 2.0) == doctest::Approx(-std::cyl_bessel_j(3, 2.0)).epsilon(1e-13));
    CHECK(bessel_j(-4, -2.0) == doctest::Approx(std::cyl_bessel_j(4, 2.0)).epsilon(1e-13));
    auto z = bessel_j_table(4, 0.0);
    CHECK(z[0] == 1.0);
    CHECK(z[3] == 0.0);
}

TEST_CASE("exact covariance has unit trace and equals the windowed density operator") {
    auto b = build_basis(3, 3);
    auto p = chain(3, 1.0, 2.0 / 3);
    auto H = assemble_hamiltonian(b, p);
    auto sp = diagonalize(H, true);
    SpectralWindow w{0.5, 0.8};
    ExactCovarianceInfo info;
    auto cov = exact_covariance(sp, b, w, every_state(b), &info);
    const std::size_t n = b.size();
    cplx tr = 0;
    for (std::size_t i = 0; i < n; ++i)
        tr += cov.at(i, i);
    CHECK(std::abs(tr - 1.0) < 1e-12);
    CHECK(info.warning); // 10 states only

    // oracle: W(H - E) = (1/2pi) int Wt(tau) exp(-i tau (H - E)), trapezoid with dense exponentials
    auto D = oracle::dense_bose_hubbard(b, p);
    oracle::Mat acc(n * n, 0.0);
    const int M = 400;
    const double T = 9 / w.eta, h = 2 * T / M;
    for (int k = 0; k <= M; ++k) {
        double tau = -T + k * h;
        auto E = oracle::expm_minus_i(D, n, tau);
        cplx f = (k == 0 || k == M ? 0.5 : 1.0) * w.fourier(tau) * std::polar(1.0, tau * w.E);
        for (std::size_t i = 0; i < n * n; ++i)
            acc[i] += f * E[i];
    }
    cplx atr = 0;
    for (std::size_t i = 0; i < n; ++i)
        atr += acc[i * n + i];
    double err = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            err = std::max(err, std::abs(cov.at(i, j) - acc[i * n + j] / atr));
            CHECK(std::abs(cov.at(i, j) - std::conj(cov.at(j, i))) < 1e-12);
        }
    CHECK(err < 1e-10);

    Eigen::MatrixXcd R(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            R(i, j) = cov.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(R);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);

    auto C = normalized_correlator(cov);
    CHECK_FALSE(C.exceeds_one);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(C.C[i * n + i] == cplx(1.0));
}

TEST_CASE("narrow window isolates one eigenstate") {
    auto b = build_basis(3, 2);
    auto p = chain(3, 1.0, 0.4);
    auto sp = diagonalize(assemble_hamiltonian(b, p), true);
    // ground state is non-degenerate; a narrow window on it gives the projector
    SpectralWindow w{sp.values[0], 0.01};
    auto cov = exact_covariance(sp, b, w, every_state(b));
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            CHECK(std::abs(cov.at(i, j) - sp.vec(i, 0) * std::conj(sp.vec(j, 0))) < 1e-12);
    CHECK_THROWS_AS(exact_covariance(diagonalize(assemble_hamiltonian(b, p), false), b, w, every_state(b)),
                    ArgumentError);
}

TEST_CASE("classical density of states") {
    auto p = chain(3, 1.0, 0.5);
    SpectralWindow wide{0.0, 1e4};
    auto r = classical_dos(p, 6, wide, 20000, 3);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-5));

    // J=0, two sites: x = |psi_0|^2 is uniform on [0, N]
    auto q = chain(2, 0.0, 0.8);
    q.eps = {0.3, -0.2};
    const int N = 5;
    SpectralWindow w{3.0, 0.6};
    auto mc = classical_dos(q, N, w, 200000, 7);
    const int M = 20000;
    double s = 0;
    for (int i = 0; i <= M; ++i) {
        double x = N * static_cast<double>(i) / M, y = N - x;
        double e = 0.4 * (x * (x - 1) + y * (y - 1)) + 0.3 * x - 0.2 * y;
        s += (i == 0 || i == M ? 0.5 : 1.0) * w.weight(e);
    }
    double oracle_value = s / M;
    CHECK(std::abs(mc.value - oracle_value) < 3 * mc.stderr_);

    // wider window holds more of a unimodal shell
    auto a = classical_dos(p, 6, SpectralWindow{0.0, 0.5}, 20000, 5).value;
    auto c = classical_dos(p, 6, SpectralWindow{0.0, 1.0}, 20000, 5).value;
    CHECK(c > a);
    CHECK_THROWS_AS(classical_dos(p, 6, wide, 100, 1), ArgumentError);
}

TEST_CASE("semiclassical covariance: J=0 limit") {
    auto p = chain(4, 0.0, 0.7);
    p.eps = {0.1, 0.0, -0.3, 0.2};
    SpectralWindow w{2.0, 0.9};
    const double rho = 3.5;
    std::vector<int> n{3, 1, 0, 2};
    double ed = 0;
    for (int j = 0; j < 4; ++j)
        ed += 0.35 * n[j] * (n[j] - 1) + p.eps[j] * n[j];
    cplx v = semiclassical_covariance(n, n, p, w, rho);
    CHECK(std::abs(v - w.weight(ed) / rho) < 1e-10);
    CHECK(std::abs(semiclassical_covariance(n, {2, 2, 0, 2}, p, w, rho)) < 1e-14);
    CHECK(semiclassical_covariance(n, {2, 2, 0, 1}, p, w, rho) == cplx(0)); // other sector

    // continuity as J -> 0
    p.J = 1e-5;
    CHECK(std::abs(semiclassical_covariance(n, n, p, w, rho) - w.weight(ed) / rho) < 1e-6);
}

TEST_CASE("semiclassical covariance: Hermiticity, convergence and brute-force quadrature") {
    auto p = chain(4, 1.0, 0.25, 0.35);
    SpectralWindow w{1.0, 1.0};
    std::vector<std::vector<int>> pairs[] = {{{2, 2, 2, 2}, {2, 2, 2, 2}},
                                             {{3, 2, 1, 2}, {2, 2, 2, 2}},
                                             {{1, 3, 2, 2}, {2, 1, 3, 2}},
                                             {{4, 0, 2, 2}, {2, 2, 3, 1}}};
    for (auto &pr : pairs) {
        auto a = semiclassical_kernel(pr[0], pr[1], p, w);
        auto b = semiclassical_kernel(pr[1], pr[0], p, w);
        REQUIRE(a.converged);
        CHECK(std::abs(a.value - std::conj(b.value)) < 1e-10);
        auto ref = kernel_oracle(pr[0], pr[1], p, w, a.q_used + 6);
        CHECK(std::abs(a.value - ref) < 1e-8 * std::max(1e-3, std::abs(ref)));
        // q_max + 2 changes nothing at the accepted truncation
        SemiclassicalOptions o;
        o.q_max = a.q_used + 2;
        auto c = semiclassical_kernel(pr[0], pr[1], p, w, o);
        CHECK(std::abs(c.value - a.value) <= 1e-8 * std::max(std::abs(a.value), 1e-12));
    }
    SemiclassicalOptions tiny;
    tiny.q_max = 0;
    tiny.q_cap = 2;
    tiny.rel_tol = 1e-15;
    CHECK_FALSE(semiclassical_kernel({4, 0, 2, 2}, {2, 2, 3, 1}, p, w, tiny).converged);
    CHECK_THROWS_AS(semiclassical_covariance({4, 0, 2, 2}, {2, 2, 3, 1}, p, w, 1.0, tiny), NumericError);
}

TEST_CASE("interaction enters only through its value on the midpoint occupations") {
    auto p = chain(3, 0.8, 0.4);
    SpectralWindow w{0.5, 0.7};
    std::vector<int> n{3, 1, 2}, m{2, 2, 2};
    // cubic instead of quadratic, shifted so both agree on this pair's midpoint (2.5, 1.5, 2)
    auto cubic = [](const std::vector<double> &I) {
        double s = 0;
        for (double x : I)
            s += 0.05 * x * x * x;
        return s;
    };
    const double shift = 0.2 * (2.5 * 1.5 + 1.5 * 0.5 + 2.0 * 1.0) - cubic({2.5, 1.5, 2.0});
    std::function<double(const std::vector<double> &)> other = [&](const std::vector<double> &I) {
        return cubic(I) + shift;
    };
    auto a = semiclassical_kernel(n, m, p, w);
    auto b = semiclassical_kernel(n, m, p, w, {}, &other);
    CHECK(std::abs(a.value - b.value) < 1e-14);
}

TEST_CASE("open chain has no winding sum") {
    auto p = chain(3, 1.0, 0.3);
    p.geometry = Geometry::open_chain;
    SpectralWindow w{0.0, 1.0};
    auto v = semiclassical_kernel({2, 1, 1}, {1, 2, 1}, p, w);
    CHECK(v.q_used == 0);
    // single-bond dimer: R = (1/2pi) int Wt e^{i tau c} i^k J_k(z tau) with k = -(n0 - m0)
    auto q = chain(2, 1.0, 0.0);
    auto d = semiclassical_kernel({3, 1}, {1, 3}, q, w);
    double z = 2 * std::sqrt(4.0);
    const int M = 6000;
    const double T = 9, h = 2 * T / M;
    cplx s = 0;
    for (int i = 0; i <= M; ++i) {
        double tau = -T + i * h;
        s += (i == 0 || i == M ? 0.5 : 1.0) * w.fourier(tau) * std::cyl_bessel_j(2, std::abs(z * tau)) * -1.0;
    }
    s *= h / (2 * std::numbers::pi);
    CHECK(std::abs(d.value - s) < 1e-10);
}

TEST_CASE("occupation ball") {
    auto ball = occupation_ball({3, 2, 2, 3, 2}, 2);
    CHECK(ball.size() == 381);
    auto b = build_basis(5, 12);
    std::size_t count = 0;
    for (std::size_t k = 0; k < b.size(); ++k) {
        auto s = b.occupations(k);
        bool in = true;
        int seed[] = {3, 2, 2, 3, 2};
        for (int j = 0; j < 5; ++j)
            in = in && std::abs(s[j] - seed[j]) <= 2;
        count += in;
    }
    CHECK(count == ball.size());
}

TEST_CASE("Gaussian functional averages") {
    auto b = build_basis(3, 3);
    auto p = chain(3, 1.0, 0.5, 0.2);
    auto sp = diagonalize(assemble_hamiltonian(b, p), true);
    auto states = every_state(b);
    auto cov = exact_covariance(sp, b, SpectralWindow{1.0, 1.5}, states);

    CHECK(std::abs(gaussian_average({Monomial{1.0, {2}, {5}}}, cov) - cov.at(2, 5)) < 1e-15);
    CHECK(std::abs(gaussian_average({Monomial{1.0, {4, 4}, {4, 4}}}, cov) - 2.0 * cov.at(4, 4) * cov.at(4, 4)) <
          1e-15);
    CHECK(gaussian_average({Monomial{1.0, {1, 2}, {3}}}, cov) == cplx(0));
    CHECK_THROWS_AS(gaussian_average({Monomial{1.0, {1, 2, 3}, {1, 2}}}, cov), ArgumentError);

    std::vector<Monomial> F{Monomial{cplx(0.5, -1.0), {0, 3}, {3, 7}}, Monomial{2.0, {1}, {6}},
                            Monomial{1.0, {9, 9}, {2, 9}}};
    auto wick = gaussian_average(F, cov);
    auto mc = gaussian_average_mc(F, cov, 100000, 17);
    CHECK(std::abs(mc.mean.real() - wick.real()) < 3 * mc.stderr_ + 1e-12);
    CHECK(std::abs(mc.mean.imag() - wick.imag()) < 3 * mc.stderr_ + 1e-12);
}

TEST_CASE("pearson") {
    CHECK(pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson({1, 1}, {1, 2}), NumericError);
}
