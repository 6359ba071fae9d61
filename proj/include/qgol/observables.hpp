// observables.hpp
// Local observables: site populations, their 0.5-threshold discretization,
// density, alive/dead cluster functions and the (improved) diversity.

#pragma once

#include "lattice_state.hpp"

#include <bit>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgol {

// <n_i> per site, index 0 is site 1.
struct PopulationProfile {
    std::vector<double> values;
    int size() const noexcept { return static_cast<int>(values.size()); }
    double operator[](int site) const { return values.at(static_cast<std::size_t>(site - 1)); }
};

// Entries are 0 or 1, index 0 is site 1.
class DiscretizedProfile {
public:
    DiscretizedProfile() = default;

    explicit DiscretizedProfile(std::vector<std::uint8_t> cells) : cells_(std::move(cells))
    {
        for (std::uint8_t c : cells_)
            if (c > 1)
                throw std::invalid_argument("discretized cells must be 0 or 1");
    }

    static DiscretizedProfile parse(std::string_view text)
    {
        std::vector<std::uint8_t> cells;
        for (char ch : text) {
            if (ch != '0' && ch != '1')
                throw std::invalid_argument("profile may only contain '0' and '1'");
            cells.push_back(static_cast<std::uint8_t>(ch - '0'));
        }
        return DiscretizedProfile(std::move(cells));
    }

    static DiscretizedProfile from_config(const SpinConfig& c)
    {
        std::vector<std::uint8_t> cells(static_cast<std::size_t>(c.size()));
        for (int j = 1; j <= c.size(); ++j)
            cells[j - 1] = c.alive(j) ? 1 : 0;
        return DiscretizedProfile(std::move(cells));
    }

    int size() const noexcept { return static_cast<int>(cells_.size()); }
    std::span<const std::uint8_t> cells() const noexcept { return cells_; }

    /// Sites outside [1, L] read as dead.
    bool alive(int site) const noexcept
    {
        return site >= 1 && site <= size() && cells_[static_cast<std::size_t>(site - 1)] != 0;
    }

    std::string to_string() const
    {
        std::string s;
        for (std::uint8_t c : cells_)
            s.push_back(c ? '1' : '0');
        return s;
    }

    friend bool operator==(const DiscretizedProfile&, const DiscretizedProfile&) = default;

private:
    std::vector<std::uint8_t> cells_;
};

/// <n_i> = <psi|n_i|psi> / <psi|psi>.
inline PopulationProfile local_population(std::span<const cplx> psi, int L)
{
    if (psi.size() != hilbert_dimension(L))
        throw dimension_mismatch("state dimension is not 2^L");
    std::vector<double> n(static_cast<std::size_t>(L), 0.0);
    double total = 0.0;
    for (BasisIndex x = 0; x < psi.size(); ++x) {
        const double p = std::norm(psi[x]);
        if (p == 0.0)
            continue;
        total += p;
        for (BasisIndex m = x; m != 0; m &= m - 1)
            n[static_cast<std::size_t>(std::countr_zero(m))] += p;
    }
    if (total <= 0.0)
        throw std::domain_error("population of a zero state");
    for (double& v : n)
        v /= total;
    return {std::move(n)};
}

inline PopulationProfile local_population(const StateVector& state)
{
    return local_population(state.amplitudes(), state.size());
}

/// D_i = 1 iff n_i > 0.5; exactly 0.5 counts as dead.
inline DiscretizedProfile discretize(const PopulationProfile& profile)
{
    std::vector<std::uint8_t> cells;
    cells.reserve(profile.values.size());
    for (double v : profile.values)
        cells.push_back(v > 0.5 ? 1 : 0);
    return DiscretizedProfile(std::move(cells));
}

inline double density(const DiscretizedProfile& d)
{
    if (d.size() == 0)
        return 0.0;
    int alive = 0;
    for (std::uint8_t c : d.cells())
        alive += c;
    return static_cast<double>(alive) / d.size();
}

namespace detail {

inline void check_cluster_size(const DiscretizedProfile& d, int length)
{
    if (length < 1 || length > d.size())
        throw std::out_of_range("cluster size " + std::to_string(length) + " outside [1, L]");
}

/// Histogram of maximal run lengths of `value`, index = length (0 unused).
/// With `count_boundary_runs` false, runs touching either chain end are
/// dropped: a dead run there is delimited by a virtual dead site, not an
/// alive one.
inline std::vector<int> run_histogram(const DiscretizedProfile& d, bool value, bool count_boundary_runs)
{
    const int L = d.size();
    std::vector<int> hist(static_cast<std::size_t>(L) + 1, 0);
    int i = 1;
    while (i <= L) {
        if (d.alive(i) != value) {
            ++i;
            continue;
        }
        int j = i;
        while (j <= L && d.alive(j) == value)
            ++j;
        const bool touches_boundary = i == 1 || j == L + 1;
        if (count_boundary_runs || !touches_boundary)
            ++hist[static_cast<std::size_t>(j - i)];
        i = j;
    }
    return hist;
}

} // namespace detail

/// Full alive-cluster histogram C(1..L); index 0 is unused.
inline std::vector<int> alive_cluster_histogram(const DiscretizedProfile& d)
{
    return detail::run_histogram(d, true, true);
}

/// Full dead-cluster histogram C-bar(1..L); index 0 is unused.
inline std::vector<int> dead_cluster_histogram(const DiscretizedProfile& d)
{
    return detail::run_histogram(d, false, false);
}

/// Number of maximal alive runs of exactly `length` cells. Sites 0 and L+1
/// count as dead, so runs touching the chain ends are included.
inline int alive_cluster_function(const DiscretizedProfile& d, int length)
{
    detail::check_cluster_size(d, length);
    return alive_cluster_histogram(d)[static_cast<std::size_t>(length)];
}

/// Number of maximal dead runs of exactly `length` cells bounded on both
/// sides by alive cells inside the lattice.
inline int dead_cluster_function(const DiscretizedProfile& d, int length)
{
    detail::check_cluster_size(d, length);
    return dead_cluster_histogram(d)[static_cast<std::size_t>(length)];
}

namespace detail {

inline int distinct_sizes(const std::vector<int>& hist)
{
    int n = 0;
    for (std::size_t l = 1; l < hist.size(); ++l)
        n += hist[l] > 0 ? 1 : 0;
    return n;
}

} // namespace detail

/// Number of distinct alive-cluster sizes present.
inline int diversity(const DiscretizedProfile& d)
{
    return detail::distinct_sizes(alive_cluster_histogram(d));
}

/// Average of the distinct alive and dead cluster-size counts.
inline double improved_diversity(const DiscretizedProfile& d)
{
    return 0.5 * (detail::distinct_sizes(alive_cluster_histogram(d)) +
                  detail::distinct_sizes(dead_cluster_histogram(d)));
}

} // namespace qgol
