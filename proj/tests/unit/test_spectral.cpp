#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fockchaos/parallel.hpp"
#include "fockchaos/spectral.hpp"

using namespace fockchaos;

namespace {
std::vector<double> goe_sample(int n, std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = g(rng) * (i == j ? std::sqrt(2.0) : 1.0);
            A(i, j) = A(j, i) = v;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

std::vector<double> poisson_sample(int n, std::mt19937_64 &rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> x(n);
    double c = 0;
    for (auto &v : x)
        v = c += e(rng);
    return x;
}

std::vector<double> grid(double a, double b, double h) {
    std::vector<double> t;
    for (double x = a; x <= b + 1e-12; x += h)
        t.push_back(x);
    return t;
}
} // namespace

TEST_CASE("GOE closed form") {
    CHECK(std::abs(goe_form_factor(1.0) - (2 - std::log(3.0))) < 1e-12);
    CHECK(goe_form_factor(0.1) == doctest::Approx(0.2 - 0.1 * std::log(1.2)).epsilon(1e-14));
    CHECK(goe_form_factor(0.1) == doctest::Approx(0.18177).epsilon(1e-4));
    CHECK(std::abs(goe_form_factor(1 - 1e-12) - goe_form_factor(1 + 1e-12)) < 1e-10);
    CHECK(goe_form_factor(1e6) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(goe_form_factor(0.0), ArgumentError);
    CHECK_THROWS_AS(goe_form_factor(-1.0), ArgumentError);
}

TEST_CASE("diagonal ramp") {
    CHECK(diagonal_ramp(0.3, SymmetryClass::orthogonal) == doctest::Approx(0.6));
    CHECK(diagonal_ramp(1.0, SymmetryClass::unitary) == doctest::Approx(1.0));
    double prev = 1e9;
    for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
        double rel = std::abs(goe_form_factor(t) - diagonal_ramp(t, SymmetryClass::orthogonal)) / t;
        CHECK(rel < prev);
        prev = rel;
    }
    CHECK(prev < 1e-3);
    CHECK_THROWS_AS(diagonal_ramp(0.0, SymmetryClass::orthogonal), ArgumentError);
}

TEST_CASE("ramp fit recovers a quadratic") {
    auto t = grid(0.0, 0.5, 0.01);
    std::vector<double> K;
    for (double x : t)
        K.push_back(1.7 * x - 0.4 * x * x);
    auto f = fit_ramp(t, K);
    CHECK(f.slope == doctest::Approx(1.7).epsilon(1e-10));
    CHECK(f.curvature == doctest::Approx(-0.4).epsilon(1e-9));
}

TEST_CASE("unfolding a uniform ladder is affine") {
    std::vector<double> e;
    for (int i = 0; i < 400; ++i)
        e.push_back(3.0 + 0.25 * i);
    for (auto m : {UnfoldMethod::gaussian_counting, UnfoldMethod::polynomial}) {
        UnfoldOptions o;
        o.method = m;
        o.trim = 0.1;
        auto u = unfold(e, o);
        for (double s : spacings(u.x))
            CHECK(s == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(!u.recipe.empty());
    }
    CHECK_THROWS_AS(unfold(std::vector<double>(50, 1.0)), ArgumentError);
}

TEST_CASE("spacing statistics of synthetic ensembles") {
    // KS at the 1% level rejects 1 in 100 perfect samples, so count passes over 20 independent draws
    std::mt19937_64 rng(2024);
    int poisson_pass = 0, goe_pass = 0, cross_reject = 0;
    UnfoldedSpectrum p, g;
    for (int r = 0; r < 20; ++r) {
        p = unfold(poisson_sample(2000, rng));
        g = unfold(goe_sample(1000, rng));
        CHECK(p.bulk_mean_spacing == doctest::Approx(1.0).epsilon(0.02));
        CHECK(g.bulk_mean_spacing == doctest::Approx(1.0).epsilon(0.02));
        poisson_pass += ks_test(spacings(p.x), poisson_spacing_cdf).p_value > 0.01;
        goe_pass += ks_test(spacings(g.x), wigner_surmise_cdf).p_value > 0.01;
        cross_reject += ks_test(spacings(p.x), wigner_surmise_cdf).p_value < 1e-6 &&
                        ks_test(spacings(g.x), poisson_spacing_cdf).p_value < 1e-6;
    }
    CHECK(mean_gap_ratio(p.raw) == doctest::Approx(0.386).epsilon(0.06));
    CHECK(mean_gap_ratio(g.raw) == doctest::Approx(0.531).epsilon(0.04));
    CHECK(poisson_pass >= 18);
    CHECK(goe_pass >= 18);
    CHECK(cross_reject == 20);

    // unfolding again changes nothing beyond an affine map
    UnfoldOptions o;
    o.trim = 0;
    auto again = unfold(g.x, o);
    double a = again.x.front() - g.x.front();
    double worst = 0;
    for (std::size_t i = 0; i < g.x.size(); ++i)
        worst = std::max(worst, std::abs(again.x[i] - g.x[i] - a));
    CHECK(worst / static_cast<double>(g.x.size()) < 0.01);

    // polynomial route on the same spectrum agrees in the bulk mean spacing
    UnfoldOptions poly;
    poly.method = UnfoldMethod::polynomial;
    poly.degree = 12;
    auto gp = unfold(g.raw, poly);
    CHECK(gp.bulk_mean_spacing == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("KS test against a uniform sample") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(5000);
    for (auto &x : s)
        x = u(rng);
    auto uni = [](double x) { return std::clamp(x, 0.0, 1.0); };
    CHECK(ks_test(s, uni).p_value > 0.01);
    auto skew = [](double x) { return std::clamp(x * x, 0.0, 1.0); };
    CHECK(ks_test(s, skew).p_value < 1e-10);
}

TEST_CASE("form factor of synthetic Poisson and GOE ensembles") {
    std::mt19937_64 rng(99);
    auto tau = grid(0.2, 2.0, 0.05);
    std::vector<UnfoldedSpectrum> poi, goe;
    for (int r = 0; r < 50; ++r) {
        poi.push_back(unfold(poisson_sample(1000, rng)));
        goe.push_back(unfold(goe_sample(1000, rng)));
    }
    auto Kp = form_factor(poi, tau);
    auto Kg = form_factor(goe, tau);
    double dp = 0, dg = 0;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        dp = std::max(dp, std::abs(Kp[i] - 1.0));
        dg = std::max(dg, std::abs(Kg[i] - goe_form_factor(tau[i])));
    }
    CHECK(dp < 0.15);
    CHECK(dg < 0.1);

    // rigid ladder: K vanishes away from integer tau
    std::vector<UnfoldedSpectrum> ladders;
    for (int r = 0; r < 10; ++r) {
        std::vector<double> e;
        for (int i = 0; i < 300; ++i)
            e.push_back(i + 0.1 * r);
        ladders.push_back(unfold(e));
    }
    auto Kl = form_factor(ladders, {0.1, 0.3, 0.5});
    for (double k : Kl)
        CHECK(std::abs(k) < 1e-2);

    std::vector<UnfoldedSpectrum> few(poi.begin(), poi.begin() + 5);
    CHECK_THROWS_AS(form_factor(few, tau), ArgumentError);
    CHECK_THROWS_AS(form_factor(poi, {0.0}), ArgumentError);
}

TEST_CASE("disorder ensemble is reproducible and thread independent") {
    LatticeParams p;
    p.L = 4;
    p.U = 0.5;
    set_thread_count(1);
    auto a = disorder_spectra(p, 4, 0.3, 4, 11);
    set_thread_count(3);
    auto b = disorder_spectra(p, 4, 0.3, 4, 11);
    set_thread_count(0);
    CHECK(a == b);
    CHECK(a[0] != a[1]);
    CHECK(a[0].size() == 35);
}
