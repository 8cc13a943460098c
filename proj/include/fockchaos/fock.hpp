#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fockchaos/errors.hpp"

namespace fockchaos {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

enum class Geometry { ring, open_chain };

struct LatticeParams {
    int L = 2;
    double J = 1.0;
    double U = 0.0;
    double phi = 0.0; // Peierls phase on every bond
    std::vector<double> eps; // empty means all zero
    Geometry geometry = Geometry::ring;

    double eps_at(int j) const { return eps.empty() ? 0.0 : eps[static_cast<std::size_t>(j)]; }
    // Directed bonds (a, b): the hopping term is e^{i phi} b+_a b_b + h.c.
    std::vector<std::pair<int, int>> bonds() const;
    void validate() const;
};

constexpr std::size_t default_basis_cap = 5000000;

// binomial(n, k) in 64-bit; throws CapacityError on overflow.
std::uint64_t binomial(int n, int k);
std::uint64_t sector_dimension(int L, int N);

class FockBasis {
public:
    FockBasis(int L, int N, std::size_t cap = default_basis_cap);

    int sites() const { return L_; }
    int particles() const { return N_; }
    std::size_t size() const { return dim_; }

    std::span<const std::uint8_t> state(std::size_t k) const {
        return {occ_.data() + k * static_cast<std::size_t>(L_), static_cast<std::size_t>(L_)};
    }
    std::vector<int> occupations(std::size_t k) const;

    // Position in the descending-lexicographic order; throws for out-of-sector vectors.
    std::size_t index(std::span<const std::uint8_t> n) const;
    std::size_t index(const std::vector<int> &n) const;
    bool contains(const std::vector<int> &n) const;

private:
    int L_, N_;
    std::size_t dim_;
    std::vector<std::uint8_t> occ_;
    std::vector<std::uint64_t> table_; // C(m + s - 1, s - 1) at [m * (L+1) + s]
    std::uint64_t ways(int m, int sites) const { return table_[static_cast<std::size_t>(m) * (L_ + 1) + sites]; }
};

FockBasis build_basis(int L, int N, std::size_t cap = default_basis_cap);

// Compressed-row sparse operator acting inside one sector.
struct SparseOperator {
    std::size_t dim = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<cplx> val;
    bool diagonal = false;
    bool real = true; // all stored values have zero imaginary part

    std::size_t nnz() const { return val.size(); }
    cplx entry(std::size_t r, std::size_t c) const;
    // Diagonal part as a dense vector (real part).
    std::vector<double> diagonal_values() const;
    double norm_bound() const; // max absolute row sum
};

SparseOperator assemble_hamiltonian(const FockBasis &basis, const LatticeParams &p);
SparseOperator occupation_operator(const FockBasis &basis, int site);
SparseOperator number_weighted_diagonal(const FockBasis &basis, std::span<const double> weights);

void apply_operator(const SparseOperator &op, std::span<const cplx> v, std::span<cplx> out);
CVec apply_operator(const SparseOperator &op, const CVec &v);

// Dense row-major copy, intended for oracles and small sectors.
std::vector<cplx> to_dense(const SparseOperator &op);

// Diagonal energy (U/2) sum n(n-1) + sum eps n of a Fock state.
double diagonal_energy(std::span<const std::uint8_t> n, const LatticeParams &p);
double diagonal_energy(const std::vector<int> &n, const LatticeParams &p);

} // namespace fockchaos
