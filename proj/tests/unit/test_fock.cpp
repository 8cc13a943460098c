#include <doctest.h>

#include <random>
#include <numeric>
#include <set>

#include "fockchaos/fock.hpp"
#include "oracles.hpp"

using namespace fockchaos;

namespace {
std::uint64_t binom_recursive(int n, int k) {
    if (k == 0 || k == n)
        return 1;
    return binom_recursive(n - 1, k - 1) + binom_recursive(n - 1, k);
}

CVec random_vec(std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    CVec v(n);
    for (auto &x : v)
        x = {g(rng), g(rng)};
    return v;
}
} // namespace

TEST_CASE("two sites two particles in descending order") {
    auto b = build_basis(2, 2);
    REQUIRE(b.size() == 3);
    CHECK(b.occupations(0) == std::vector<int>{2, 0});
    CHECK(b.occupations(1) == std::vector<int>{1, 1});
    CHECK(b.occupations(2) == std::vector<int>{0, 2});
}

TEST_CASE("sector sizes") {
    CHECK(build_basis(4, 40).size() == 12341);
    CHECK(build_basis(5, 25).size() == 23751);
    CHECK(sector_dimension(4, 40) == binom_recursive(43, 3));
}

TEST_CASE("dimension matches recursive enumeration on the small grid") {
    for (int L = 1; L <= 6; ++L)
        for (int N = 0; N <= 12; ++N) {
            auto b = build_basis(L, N);
            auto ref = oracle::all_states(L, N);
            REQUIRE(b.size() == ref.size());
            std::set<std::vector<int>> seen;
            for (std::size_t k = 0; k < b.size(); ++k) {
                auto s = b.occupations(k);
                CHECK(b.index(s) == k);
                seen.insert(s);
                if (k > 0)
                    CHECK(b.occupations(k - 1) > s); // strictly descending
            }
            CHECK(seen == std::set<std::vector<int>>(ref.begin(), ref.end()));
        }
}

TEST_CASE("capacity guard") {
    CHECK_THROWS_AS(build_basis(6, 100, 1000), CapacityError);
    CHECK_THROWS_AS(build_basis(2, 300), CapacityError);
}

TEST_CASE("single bond matrix elements") {
    auto b = build_basis(2, 2);
    LatticeParams p;
    p.L = 2;
    p.J = 0.7;
    p.U = 1.3;
    auto H = assemble_hamiltonian(b, p);
    std::size_t i11 = b.index(std::vector<int>{1, 1});
    std::size_t i20 = b.index(std::vector<int>{2, 0});
    std::size_t i02 = b.index(std::vector<int>{0, 2});
    CHECK(H.entry(i11, i20).real() == doctest::Approx(-0.7 * std::sqrt(2.0)));
    CHECK(H.entry(i11, i02).real() == doctest::Approx(-0.7 * std::sqrt(2.0)));
    CHECK(H.entry(i20, i20).real() == doctest::Approx(1.3));
    CHECK(H.entry(i20, i02) == cplx(0));
    CHECK(H.real);
}

TEST_CASE("hopping entry carries the Peierls phase") {
    auto b = build_basis(3, 3);
    LatticeParams p;
    p.L = 3;
    p.J = 1.0;
    p.phi = 0.4;
    auto H = assemble_hamiltonian(b, p);
    // row |2,1,0>, column |1,2,0>: -J e^{i phi} sqrt(n_0 (n_1 + 1)) with n = row occupations
    auto r = b.index(std::vector<int>{2, 1, 0});
    auto c = b.index(std::vector<int>{1, 2, 0});
    cplx want = -std::polar(1.0, 0.4) * std::sqrt(2.0 * 2.0);
    CHECK(std::abs(H.entry(r, c) - want) < 1e-15);
    CHECK_FALSE(H.real);
}

TEST_CASE("sparse assembly agrees with the second-quantized dense oracle") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int L = 2; L <= 5; ++L)
        for (int N = 0; N <= 8; ++N)
            for (auto geo : {Geometry::ring, Geometry::open_chain}) {
                if (sector_dimension(L, N) > 500)
                    continue;
                auto b = build_basis(L, N);
                LatticeParams p;
                p.L = L;
                p.J = u(rng);
                p.U = u(rng);
                p.phi = u(rng);
                p.geometry = geo;
                p.eps = {};
                for (int j = 0; j < L; ++j)
                    p.eps.push_back(u(rng));
                auto H = assemble_hamiltonian(b, p);
                auto D = to_dense(H);
                auto R = oracle::dense_bose_hubbard(b, p);
                double err = 0;
                for (std::size_t i = 0; i < D.size(); ++i)
                    err = std::max(err, std::abs(D[i] - R[i]));
                CHECK(err < 1e-14);
                // row bound and exact Hermiticity
                for (std::size_t r = 0; r < H.dim; ++r) {
                    CHECK(H.row_ptr[r + 1] - H.row_ptr[r] <= static_cast<std::size_t>(2 * L + 1));
                    for (std::size_t k = H.row_ptr[r]; k < H.row_ptr[r + 1]; ++k)
                        CHECK(H.val[k] == std::conj(H.entry(H.col[k], r)));
                }
            }
}

TEST_CASE("phi to -phi is complex conjugation") {
    auto b = build_basis(4, 4);
    LatticeParams p;
    p.L = 4;
    p.U = 0.3;
    p.phi = 0.9;
    auto Hp = assemble_hamiltonian(b, p);
    p.phi = -0.9;
    auto Hm = assemble_hamiltonian(b, p);
    REQUIRE(Hp.nnz() == Hm.nnz());
    for (std::size_t k = 0; k < Hp.nnz(); ++k)
        CHECK(Hp.val[k] == std::conj(Hm.val[k]));
}

TEST_CASE("three-site ring ground state with two free bosons") {
    auto b = build_basis(3, 2);
    LatticeParams p;
    p.L = 3;
    auto D = to_dense(assemble_hamiltonian(b, p));
    // power-free check: smallest eigenvalue of the 6x6 real matrix by Jacobi sweeps
    const int n = 6;
    std::vector<double> A(n * n);
    for (int i = 0; i < n * n; ++i)
        A[i] = D[i].real();
    for (int sweep = 0; sweep < 50; ++sweep)
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double aij = A[i * n + j];
                if (std::abs(aij) < 1e-300)
                    continue;
                double th = 0.5 * std::atan2(2 * aij, A[j * n + j] - A[i * n + i]);
                double c = std::cos(th), s = std::sin(th);
                for (int k = 0; k < n; ++k) {
                    double aki = A[k * n + i], akj = A[k * n + j];
                    A[k * n + i] = c * aki - s * akj;
                    A[k * n + j] = s * aki + c * akj;
                }
                for (int k = 0; k < n; ++k) {
                    double aik = A[i * n + k], ajk = A[j * n + k];
                    A[i * n + k] = c * aik - s * ajk;
                    A[j * n + k] = s * aik + c * ajk;
                }
            }
    double emin = 1e9;
    for (int i = 0; i < n; ++i)
        emin = std::min(emin, A[i * n + i]);
    CHECK(emin == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("occupation operator") {
    auto b = build_basis(2, 2);
    auto n0 = occupation_operator(b, 0);
    CHECK(n0.entry(b.index(std::vector<int>{2, 0}), b.index(std::vector<int>{2, 0})).real() == 2.0);
    CVec u(3, 1.0 / std::sqrt(3.0));
    auto v = apply_operator(n0, u);
    CHECK(std::real(std::inner_product(u.begin(), u.end(), v.begin(), cplx(0), std::plus<>(),
                                       [](cplx a, cplx c) { return std::conj(a) * c; })) ==
          doctest::Approx(1.0));
    CHECK_THROWS_AS(occupation_operator(b, 2), ArgumentError);

    auto b2 = build_basis(4, 5);
    double tr = 0;
    for (int j = 0; j < 4; ++j) {
        auto nj = occupation_operator(b2, j);
        for (auto x : nj.val)
            tr += x.real();
    }
    CHECK(tr == doctest::Approx(5.0 * static_cast<double>(b2.size())));
}

TEST_CASE("apply kernels") {
    std::mt19937_64 rng(11);
    auto b = build_basis(4, 4);
    LatticeParams p;
    p.L = 4;
    p.J = 0;
    p.U = 0;
    p.eps = {0.25, 0.25, 0.25, 0.25};
    auto H = assemble_hamiltonian(b, p);
    auto v = random_vec(b.size(), rng);
    auto w = apply_operator(H, v);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(std::abs(w[i] - 1.0 * v[i]) < 1e-14);

    auto b2 = build_basis(2, 2);
    LatticeParams q;
    q.L = 2;
    q.J = 0.8;
    q.U = 1.1;
    q.phi = 0.3;
    auto H2 = assemble_hamiltonian(b2, q);
    auto D = to_dense(H2);
    auto D2 = oracle::matmul(D, D, 3);
    auto x = random_vec(3, rng);
    auto y = apply_operator(H2, apply_operator(H2, x));
    auto z = oracle::matvec(D2, x);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(y[i] - z[i]) < 1e-14);

    // <u, Hv> = conj <v, Hu>
    auto b3 = build_basis(5, 6);
    LatticeParams r;
    r.L = 5;
    r.U = 0.7;
    r.phi = 1.1;
    auto H3 = assemble_hamiltonian(b3, r);
    auto u = random_vec(b3.size(), rng), s = random_vec(b3.size(), rng);
    auto Hs = apply_operator(H3, s), Hu = apply_operator(H3, u);
    cplx a = 0, c = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        a += std::conj(u[i]) * Hs[i];
        c += std::conj(s[i]) * Hu[i];
    }
    CHECK(std::abs(a - std::conj(c)) < 1e-13 * std::abs(a));
    CHECK_THROWS_AS(apply_operator(H3, CVec(3)), DimensionError);
}

TEST_CASE("sector is closed under H") {
    // embed two sectors side by side; H acting on a vector supported in one sector
    // cannot leak into the other because assembly indexes only in-sector states
    auto b = build_basis(3, 4);
    LatticeParams p;
    p.L = 3;
    p.U = 0.5;
    auto H = assemble_hamiltonian(b, p);
    for (std::size_t r = 0; r < H.dim; ++r)
        for (std::size_t k = H.row_ptr[r]; k < H.row_ptr[r + 1]; ++k) {
            auto s = b.occupations(H.col[k]);
            int tot = 0;
            for (int x : s)
                tot += x;
            CHECK(tot == 4);
        }
}

TEST_CASE("mismatched L is rejected") {
    auto b = build_basis(3, 2);
    LatticeParams p;
    p.L = 4;
    CHECK_THROWS_AS(assemble_hamiltonian(b, p), DimensionError);
}
