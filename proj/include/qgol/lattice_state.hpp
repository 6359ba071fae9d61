// lattice_state.hpp
// Classical spin configurations and state vectors of the L-site chain.
//
// Basis convention: site j (1-based) is bit j-1 of the basis index, so a
// configuration b_1 ... b_L lives at index sum_j b_j 2^{j-1}. Every other
// header goes through fock_index / site_bit rather than re-deriving this.

#pragma once

#include <bit>
#include <complex>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qgol {

using cplx = std::complex<double>;
using Amplitudes = std::vector<cplx>;
using BasisIndex = std::uint64_t;

inline constexpr int min_lattice_size = 5;
inline constexpr int max_lattice_size = 30;

class dimension_mismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Bit mask selecting site `site` (1-based) in a basis index.
constexpr BasisIndex site_bit(int site) noexcept { return BasisIndex{1} << (site - 1); }

constexpr BasisIndex hilbert_dimension(int L) noexcept { return BasisIndex{1} << L; }

inline void check_lattice_size(int L)
{
    if (L < min_lattice_size)
        throw std::invalid_argument("lattice size " + std::to_string(L) + " below minimum of 5");
    if (L > max_lattice_size)
        throw std::invalid_argument("lattice size " + std::to_string(L) + " too large");
}

// Classical Fock label: L dead/alive cells, sites 1..L.
class SpinConfig {
public:
    SpinConfig(int L, BasisIndex bits) : L_(L), bits_(bits)
    {
        check_lattice_size(L);
        if (bits >= hilbert_dimension(L))
            throw std::invalid_argument("configuration bits exceed lattice size");
    }

    explicit SpinConfig(std::span<const int> cells) : L_(static_cast<int>(cells.size()))
    {
        check_lattice_size(L_);
        for (int j = 1; j <= L_; ++j) {
            const int b = cells[j - 1];
            if (b != 0 && b != 1)
                throw std::invalid_argument("cell values must be 0 or 1");
            if (b)
                bits_ |= site_bit(j);
        }
    }

    /// Parses "00101...", site 1 leftmost.
    static SpinConfig parse(std::string_view text)
    {
        std::vector<int> cells;
        cells.reserve(text.size());
        for (char ch : text) {
            if (ch != '0' && ch != '1')
                throw std::invalid_argument("bitstring may only contain '0' and '1': " + std::string(text));
            cells.push_back(ch - '0');
        }
        return SpinConfig(cells);
    }

    static SpinConfig all_dead(int L) { return SpinConfig(L, 0); }
    static SpinConfig all_alive(int L) { return SpinConfig(L, hilbert_dimension(L) - 1); }

    int size() const noexcept { return L_; }
    BasisIndex bits() const noexcept { return bits_; }

    bool alive(int site) const
    {
        if (site < 1 || site > L_)
            throw std::out_of_range("site " + std::to_string(site) + " outside lattice");
        return (bits_ & site_bit(site)) != 0;
    }

    SpinConfig flipped(int site) const
    {
        if (site < 1 || site > L_)
            throw std::out_of_range("site " + std::to_string(site) + " outside lattice");
        return SpinConfig(L_, bits_ ^ site_bit(site));
    }

    int alive_count() const noexcept { return std::popcount(bits_); }

    std::string to_string() const
    {
        std::string s(static_cast<std::size_t>(L_), '0');
        for (int j = 1; j <= L_; ++j)
            if (bits_ & site_bit(j))
                s[j - 1] = '1';
        return s;
    }

    friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

private:
    int L_;
    BasisIndex bits_ = 0;
};

inline BasisIndex fock_index(const SpinConfig& config) noexcept { return config.bits(); }

inline SpinConfig config_from_index(int L, BasisIndex index) { return SpinConfig(L, index); }

inline double norm(std::span<const cplx> amplitudes) noexcept
{
    double sum = 0.0;
    for (const cplx& a : amplitudes)
        sum += std::norm(a);
    return std::sqrt(sum);
}

/// <a|b>, conjugating the first argument.
inline cplx overlap(std::span<const cplx> a, std::span<const cplx> b)
{
    if (a.size() != b.size())
        throw dimension_mismatch("overlap of vectors with different dimensions");
    cplx sum{0.0, 0.0};
    for (std::size_t k = 0; k < a.size(); ++k)
        sum += std::conj(a[k]) * b[k];
    return sum;
}

// Normalized 2^L amplitude vector in the sigma_z product basis.
class StateVector {
public:
    static constexpr double default_norm_tolerance = 1e-9;

    StateVector(int L, Amplitudes amplitudes, double norm_tolerance = default_norm_tolerance)
        : L_(L), amplitudes_(std::move(amplitudes))
    {
        if (L < 1 || L > max_lattice_size)
            throw std::invalid_argument("lattice size out of range");
        if (amplitudes_.size() != hilbert_dimension(L))
            throw dimension_mismatch("state vector must have 2^L amplitudes");
        const double n = qgol::norm(amplitudes_);
        if (std::abs(n - 1.0) > norm_tolerance)
            throw std::invalid_argument("state vector is not normalized (norm " + std::to_string(n) + ")");
    }

    int size() const noexcept { return L_; }
    BasisIndex dimension() const noexcept { return amplitudes_.size(); }
    std::span<const cplx> amplitudes() const noexcept { return amplitudes_; }
    const cplx& operator[](BasisIndex k) const { return amplitudes_[k]; }
    double norm() const noexcept { return qgol::norm(amplitudes_); }

private:
    int L_;
    Amplitudes amplitudes_;
};

inline StateVector make_fock_state(const SpinConfig& config)
{
    Amplitudes amps(hilbert_dimension(config.size()));
    amps[fock_index(config)] = 1.0;
    return StateVector(config.size(), std::move(amps));
}

inline double norm(const StateVector& state) noexcept { return state.norm(); }

inline cplx overlap(const StateVector& a, const StateVector& b)
{
    return overlap(a.amplitudes(), b.amplitudes());
}

} // namespace qgol
