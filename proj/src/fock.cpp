#include "fockchaos/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fockchaos {

std::vector<std::pair<int, int>> LatticeParams::bonds() const {
    std::vector<std::pair<int, int>> b;
    for (int j = 0; j + 1 < L; ++j)
        b.emplace_back(j, j + 1);
    // L = 2 ring would close onto the same pair twice
    if (geometry == Geometry::ring && L > 2)
        b.emplace_back(L - 1, 0);
    return b;
}

void LatticeParams::validate() const {
    if (L < 1)
        throw ArgumentError("L must be >= 1, got " + std::to_string(L));
    if (!eps.empty() && static_cast<int>(eps.size()) != L)
        throw DimensionError("eps has " + std::to_string(eps.size()) + " entries, expected " +
                             std::to_string(L));
    auto bad = [](double x) { return !std::isfinite(x); };
    if (bad(J) || bad(U) || bad(phi) || std::any_of(eps.begin(), eps.end(), bad))
        throw ArgumentError("non-finite lattice parameter");
}

std::uint64_t binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (r > std::numeric_limits<std::uint64_t>::max())
            throw CapacityError("binomial overflow");
    }
    return static_cast<std::uint64_t>(r);
}

std::uint64_t sector_dimension(int L, int N) {
    if (L < 1 || N < 0)
        return 0;
    return binomial(N + L - 1, L - 1);
}

FockBasis::FockBasis(int L, int N, std::size_t cap) : L_(L), N_(N) {
    if (L < 1)
        throw ArgumentError("L must be >= 1");
    if (N < 0)
        throw ArgumentError("N must be >= 0");
    if (N > 255)
        throw CapacityError("occupations above 255 are not representable (N=" + std::to_string(N) + ")");
    std::uint64_t d = sector_dimension(L, N);
    if (d > cap)
        throw CapacityError("sector dimension " + std::to_string(d) + " exceeds cap " + std::to_string(cap));
    dim_ = static_cast<std::size_t>(d);

    table_.assign(static_cast<std::size_t>(N + 1) * (L + 1), 0);
    for (int m = 0; m <= N; ++m)
        for (int s = 1; s <= L; ++s)
            table_[static_cast<std::size_t>(m) * (L + 1) + s] = binomial(m + s - 1, s - 1);

    // descending lexicographic: start at (N,0,...,0), step to the next smaller vector
    occ_.resize(dim_ * static_cast<std::size_t>(L));
    std::vector<int> n(L, 0);
    n[0] = N;
    for (std::size_t k = 0; k < dim_; ++k) {
        for (int j = 0; j < L; ++j)
            occ_[k * L + j] = static_cast<std::uint8_t>(n[j]);
        if (k + 1 == dim_)
            break;
        // rightmost site j < L-1 with n_j > 0: move one boson right and gather the tail
        int j = L - 2;
        while (n[j] == 0)
            --j;
        int tail = n[L - 1];
        n[L - 1] = 0;
        --n[j];
        n[j + 1] = tail + 1;
    }
}

std::vector<int> FockBasis::occupations(std::size_t k) const {
    auto s = state(k);
    return {s.begin(), s.end()};
}

std::size_t FockBasis::index(std::span<const std::uint8_t> n) const {
    if (static_cast<int>(n.size()) != L_)
        throw DimensionError("occupation vector has wrong length");
    std::size_t r = 0;
    int rem = N_;
    for (int j = 0; j + 1 < L_; ++j) {
        int nj = n[j];
        if (nj > rem)
            throw ArgumentError("occupation vector not in sector");
        // states sharing the prefix but with a larger n_j come first
        if (rem - nj > 0)
            r += ways(rem - nj - 1, L_ - j);
        rem -= nj;
    }
    if (n[L_ - 1] != rem)
        throw ArgumentError("occupation vector not in sector");
    return r;
}

std::size_t FockBasis::index(const std::vector<int> &n) const {
    if (static_cast<int>(n.size()) != L_)
        throw DimensionError("occupation vector has wrong length");
    std::vector<std::uint8_t> b(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] < 0 || n[i] > 255)
            throw ArgumentError("occupation out of range");
        b[i] = static_cast<std::uint8_t>(n[i]);
    }
    return index(std::span<const std::uint8_t>(b));
}

bool FockBasis::contains(const std::vector<int> &n) const {
    if (static_cast<int>(n.size()) != L_)
        return false;
    int s = 0;
    for (int x : n) {
        if (x < 0)
            return false;
        s += x;
    }
    return s == N_;
}

FockBasis build_basis(int L, int N, std::size_t cap) { return FockBasis(L, N, cap); }

cplx SparseOperator::entry(std::size_t r, std::size_t c) const {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        if (col[k] == c)
            return val[k];
    return 0.0;
}

std::vector<double> SparseOperator::diagonal_values() const {
    std::vector<double> d(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r)
        d[r] = entry(r, r).real();
    return d;
}

double SparseOperator::norm_bound() const {
    double m = 0;
    for (std::size_t r = 0; r < dim; ++r) {
        double s = 0;
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            s += std::abs(val[k]);
        m = std::max(m, s);
    }
    return m;
}

double diagonal_energy(std::span<const std::uint8_t> n, const LatticeParams &p) {
    double e = 0;
    for (int j = 0; j < p.L; ++j) {
        double x = n[j];
        e += 0.5 * p.U * x * (x - 1) + p.eps_at(j) * x;
    }
    return e;
}

double diagonal_energy(const std::vector<int> &n, const LatticeParams &p) {
    double e = 0;
    for (int j = 0; j < p.L; ++j) {
        double x = n[j];
        e += 0.5 * p.U * x * (x - 1) + p.eps_at(j) * x;
    }
    return e;
}

SparseOperator assemble_hamiltonian(const FockBasis &basis, const LatticeParams &p) {
    p.validate();
    if (basis.sites() != p.L)
        throw DimensionError("basis has L=" + std::to_string(basis.sites()) + " but params have L=" +
                             std::to_string(p.L));
    if (basis.size() > std::numeric_limits<std::uint32_t>::max())
        throw CapacityError("sector too large for 32-bit column indices");

    const int L = p.L;
    const auto bonds = p.bonds();
    const cplx fwd = -p.J * std::polar(1.0, p.phi); // coefficient of b+_a b_b
    const cplx bwd = std::conj(fwd);

    SparseOperator H;
    H.dim = basis.size();
    H.real = (p.phi == 0.0) || p.J == 0.0;
    H.row_ptr.reserve(H.dim + 1);
    H.row_ptr.push_back(0);
    H.col.reserve(H.dim * (2 * bonds.size() + 1));
    H.val.reserve(H.dim * (2 * bonds.size() + 1));

    std::vector<std::uint8_t> m(L);
    std::vector<std::pair<std::uint32_t, cplx>> row;
    for (std::size_t r = 0; r < H.dim; ++r) {
        auto n = basis.state(r);
        row.clear();
        row.emplace_back(static_cast<std::uint32_t>(r), diagonal_energy(n, p));
        // Column r of H, H|r> = sum_t H[t,r] |t>, then row r = conj(column r).
        for (auto [a, b] : bonds) {
            if (n[b] > 0 && p.J != 0.0) { // b+_a b_b
                std::copy(n.begin(), n.end(), m.begin());
                ++m[a];
                --m[b];
                double amp = std::sqrt(static_cast<double>((n[a] + 1) * n[b]));
                row.emplace_back(static_cast<std::uint32_t>(basis.index(m)), std::conj(fwd * amp));
            }
            if (n[a] > 0 && p.J != 0.0) { // b+_b b_a
                std::copy(n.begin(), n.end(), m.begin());
                --m[a];
                ++m[b];
                double amp = std::sqrt(static_cast<double>((n[b] + 1) * n[a]));
                row.emplace_back(static_cast<std::uint32_t>(basis.index(m)), std::conj(bwd * amp));
            }
        }
        std::sort(row.begin(), row.end(), [](auto &x, auto &y) { return x.first < y.first; });
        // merge duplicates (cannot happen for simple bonds, kept for safety on tiny rings)
        std::size_t start = H.col.size();
        for (auto &[c, v] : row) {
            if (H.col.size() > start && H.col.back() == c)
                H.val.back() += v;
            else {
                H.col.push_back(c);
                H.val.push_back(v);
            }
        }
        H.row_ptr.push_back(H.col.size());
    }
    return H;
}

SparseOperator number_weighted_diagonal(const FockBasis &basis, std::span<const double> weights) {
    if (static_cast<int>(weights.size()) != basis.sites())
        throw DimensionError("weights length differs from L");
    SparseOperator D;
    D.dim = basis.size();
    D.diagonal = true;
    D.row_ptr.resize(D.dim + 1);
    D.col.resize(D.dim);
    D.val.resize(D.dim);
    for (std::size_t r = 0; r < D.dim; ++r) {
        auto n = basis.state(r);
        double s = 0;
        for (int j = 0; j < basis.sites(); ++j)
            s += weights[j] * n[j];
        D.row_ptr[r] = r;
        D.col[r] = static_cast<std::uint32_t>(r);
        D.val[r] = s;
    }
    D.row_ptr[D.dim] = D.dim;
    return D;
}

SparseOperator occupation_operator(const FockBasis &basis, int site) {
    if (site < 0 || site >= basis.sites())
        throw ArgumentError("site " + std::to_string(site) + " out of range [0," +
                            std::to_string(basis.sites()) + ")");
    std::vector<double> w(basis.sites(), 0.0);
    w[site] = 1.0;
    return number_weighted_diagonal(basis, w);
}

void apply_operator(const SparseOperator &op, std::span<const cplx> v, std::span<cplx> out) {
    if (v.size() != op.dim || out.size() != op.dim)
        throw DimensionError("apply: vector length " + std::to_string(v.size()) + " vs operator dim " +
                             std::to_string(op.dim));
    if (op.diagonal) {
        for (std::size_t r = 0; r < op.dim; ++r)
            out[r] = op.val[r] * v[r];
        return;
    }
    const auto *rp = op.row_ptr.data();
    const auto *cl = op.col.data();
    const auto *vl = op.val.data();
    if (op.real) {
        for (std::size_t r = 0; r < op.dim; ++r) {
            double re = 0, im = 0;
            for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
                double a = vl[k].real();
                re += a * v[cl[k]].real();
                im += a * v[cl[k]].imag();
            }
            out[r] = {re, im};
        }
        return;
    }
    for (std::size_t r = 0; r < op.dim; ++r) {
        cplx s = 0;
        for (std::size_t k = rp[r]; k < rp[r + 1]; ++k)
            s += vl[k] * v[cl[k]];
        out[r] = s;
    }
}

CVec apply_operator(const SparseOperator &op, const CVec &v) {
    CVec out(op.dim);
    apply_operator(op, v, out);
    return out;
}

std::vector<cplx> to_dense(const SparseOperator &op) {
    std::vector<cplx> d(op.dim * op.dim, 0.0);
    for (std::size_t r = 0; r < op.dim; ++r)
        for (std::size_t k = op.row_ptr[r]; k < op.row_ptr[r + 1]; ++k)
            d[r * op.dim + op.col[k]] += op.val[k];
    return d;
}

} // namespace fockchaos
