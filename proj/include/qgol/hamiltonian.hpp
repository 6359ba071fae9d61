// hamiltonian.hpp
// The F12-rule Hamiltonian with open boundaries:
//
//   H = sum_{i=3}^{L-2} S_i (N_i^(2) + N_i^(3)),   S_i = b_i + b_i^dagger,
//
// where N_i^(2) / N_i^(3) project onto configurations with exactly two / three
// alive cells among sites i-2, i-1, i+1, i+2. All nonzero matrix elements are
// 1, so only the coupling structure is stored.

#pragma once

#include "lattice_state.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

namespace qgol {

namespace detail {

// Neighbourhood of bulk site i: sites i-2, i-1, i+1, i+2, i.e. bit offsets
// 0, 1, 3, 4 relative to site i-2.
inline constexpr BasisIndex neighbourhood_pattern = 0b11011;

constexpr int alive_neighbors_unchecked(BasisIndex bits, int site) noexcept
{
    return std::popcount((bits >> (site - 3)) & neighbourhood_pattern);
}

constexpr bool rule_fires(int alive) noexcept { return alive == 2 || alive == 3; }

/// Bulk sites whose projectors fire on `bits`, as a bit mask in basis-index layout.
constexpr BasisIndex flip_mask(BasisIndex bits, int L) noexcept
{
    BasisIndex mask = 0;
    for (int i = 3; i <= L - 2; ++i)
        if (rule_fires(alive_neighbors_unchecked(bits, i)))
            mask |= site_bit(i);
    return mask;
}

} // namespace detail

inline void check_bulk_site(int L, int site)
{
    if (site < 3 || site > L - 2)
        throw std::out_of_range("site " + std::to_string(site) + " outside bulk range [3, L-2]");
}

/// Alive cells among the nearest and next-nearest neighbours of bulk site i.
inline int alive_neighbors(const SpinConfig& config, int site)
{
    check_bulk_site(config.size(), site);
    return detail::alive_neighbors_unchecked(config.bits(), site);
}

struct Coupling {
    BasisIndex row;
    BasisIndex col;
    friend bool operator==(const Coupling&, const Coupling&) = default;
    friend auto operator<=>(const Coupling&, const Coupling&) = default;
};

// Symmetric 0/1 operator. Row r couples to r ^ site_bit(i) for every bulk
// site i set in flip_masks[r]; because flipping i leaves i's neighbourhood
// untouched, the structure is symmetric by construction.
class SparseHamiltonian {
public:
    SparseHamiltonian(int L, std::vector<std::uint32_t> flip_masks)
        : L_(L), flip_masks_(std::move(flip_masks))
    {
        if (flip_masks_.size() != hilbert_dimension(L))
            throw dimension_mismatch("one flip mask per basis state required");
    }

    int size() const noexcept { return L_; }
    BasisIndex dimension() const noexcept { return flip_masks_.size(); }
    std::span<const std::uint32_t> flip_masks() const noexcept { return flip_masks_; }

    int row_degree(BasisIndex r) const { return std::popcount(flip_masks_[r]); }

    std::size_t coupling_count() const
    {
        std::size_t n = 0;
        for (std::uint32_t m : flip_masks_)
            n += static_cast<std::size_t>(std::popcount(m));
        return n;
    }

    /// Columns coupled to `row`, ascending.
    std::vector<BasisIndex> row(BasisIndex r) const
    {
        std::vector<BasisIndex> cols;
        for (std::uint32_t m = flip_masks_[r]; m != 0; m &= m - 1)
            cols.push_back(r ^ (BasisIndex{1} << std::countr_zero(m)));
        std::sort(cols.begin(), cols.end());
        return cols;
    }

    /// Full coupling list sorted by (row, col).
    std::vector<Coupling> couplings() const
    {
        std::vector<Coupling> out;
        out.reserve(coupling_count());
        for (BasisIndex r = 0; r < dimension(); ++r)
            for (BasisIndex c : row(r))
                out.push_back({r, c});
        return out;
    }

    int max_row_degree() const
    {
        int d = 0;
        for (std::uint32_t m : flip_masks_)
            d = std::max(d, std::popcount(m));
        return d;
    }

private:
    int L_;
    std::vector<std::uint32_t> flip_masks_;
};

/// Enumerates (configuration, bulk site) pairs: O(2^L L).
inline SparseHamiltonian build_hamiltonian(int L)
{
    check_lattice_size(L);
    const BasisIndex dim = hilbert_dimension(L);
    std::vector<std::uint32_t> masks(dim);
    for (BasisIndex x = 0; x < dim; ++x)
        masks[x] = static_cast<std::uint32_t>(detail::flip_mask(x, L));
    return SparseHamiltonian(L, std::move(masks));
}

/// y = H x. Gathers along each row, so rows are independent.
inline void apply_hamiltonian(const SparseHamiltonian& h, std::span<const cplx> x, std::span<cplx> y)
{
    if (x.size() != h.dimension() || y.size() != h.dimension())
        throw dimension_mismatch("hamiltonian and vector dimensions differ");
    const auto masks = h.flip_masks();
    for (BasisIndex r = 0; r < x.size(); ++r) {
        cplx acc{0.0, 0.0};
        for (std::uint32_t m = masks[r]; m != 0; m &= m - 1)
            acc += x[r ^ (BasisIndex{1} << std::countr_zero(m))];
        y[r] = acc;
    }
}

inline Amplitudes apply_hamiltonian(const SparseHamiltonian& h, std::span<const cplx> x)
{
    Amplitudes y(x.size());
    apply_hamiltonian(h, x, y);
    return y;
}

inline Amplitudes apply_hamiltonian(const SparseHamiltonian& h, const StateVector& state)
{
    return apply_hamiltonian(h, state.amplitudes());
}

/// Matrix-free y = H x, evaluating the neighbour projectors on the fly.
inline void apply_hamiltonian_matrix_free(int L, std::span<const cplx> x, std::span<cplx> y)
{
    if (x.size() != hilbert_dimension(L) || y.size() != x.size())
        throw dimension_mismatch("vector dimension is not 2^L");
    for (BasisIndex r = 0; r < x.size(); ++r) {
        cplx acc{0.0, 0.0};
        for (int i = 3; i <= L - 2; ++i)
            if (detail::rule_fires(detail::alive_neighbors_unchecked(r, i)))
                acc += x[r ^ site_bit(i)];
        y[r] = acc;
    }
}

/// <x|H|x>, real because H is real symmetric.
inline double expectation(const SparseHamiltonian& h, std::span<const cplx> x)
{
    const Amplitudes hx = apply_hamiltonian(h, x);
    return overlap(x, hx).real();
}

/// Dense copy of the coupling structure. Only meant for small test lattices.
inline Eigen::MatrixXd to_dense(const SparseHamiltonian& h)
{
    if (h.size() > 10)
        throw std::invalid_argument("dense assembly limited to L <= 10");
    const auto dim = static_cast<Eigen::Index>(h.dimension());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (const Coupling& c : h.couplings())
        m(static_cast<Eigen::Index>(c.row), static_cast<Eigen::Index>(c.col)) = 1.0;
    return m;
}

/// Coupling list as "row,col" CSV, for inspecting small lattices.
inline void write_couplings_csv(const SparseHamiltonian& h, std::ostream& os)
{
    os << "row,col\n";
    for (const Coupling& c : h.couplings())
        os << c.row << ',' << c.col << '\n';
}

} // namespace qgol
