// quantum_info.hpp
// Reduced density matrices, von Neumann entropies (base 2), bond entropy,
// the pairwise mutual-information matrix and Wootters concurrence.

#pragma once

#include "lattice_state.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgol {

inline constexpr double entropy_eigenvalue_floor = 1e-12;
inline constexpr double density_matrix_tolerance = 1e-10;
inline constexpr int max_reduced_sites = 12;

// Density matrix of an ordered site subset. The first listed site is the
// least significant bit of the reduced basis index.
class DensityMatrix {
public:
    DensityMatrix(std::vector<int> sites, Eigen::MatrixXcd entries)
        : sites_(std::move(sites)), entries_(std::move(entries))
    {
        const Eigen::Index dim = Eigen::Index{1} << sites_.size();
        if (entries_.rows() != dim || entries_.cols() != dim)
            throw dimension_mismatch("density matrix must be 2^k x 2^k for k sites");
    }

    std::span<const int> sites() const noexcept { return sites_; }
    const Eigen::MatrixXcd& matrix() const noexcept { return entries_; }
    Eigen::Index dimension() const noexcept { return entries_.rows(); }

    /// Throws unless Hermitian, unit trace and positive semidefinite within `tol`.
    void validate(double tol = density_matrix_tolerance) const
    {
        const double herm = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
        if (herm > tol)
            throw std::domain_error("density matrix is not Hermitian (deviation " + std::to_string(herm) + ")");
        const cplx tr = entries_.trace();
        if (std::abs(tr - 1.0) > tol)
            throw std::domain_error("density matrix trace " + std::to_string(tr.real()) + " differs from 1");
        const Eigen::VectorXd ev = eigenvalues();
        if (ev.size() > 0 && ev.minCoeff() < -tol)
            throw std::domain_error("density matrix has a negative eigenvalue " + std::to_string(ev.minCoeff()));
    }

    Eigen::VectorXd eigenvalues() const
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(entries_, Eigen::EigenvaluesOnly);
        return solver.eigenvalues();
    }

private:
    std::vector<int> sites_;
    Eigen::MatrixXcd entries_;
};

namespace detail {

inline void check_site_list(std::span<const int> sites, int L)
{
    if (sites.empty())
        throw std::invalid_argument("at least one site must be retained");
    if (static_cast<int>(sites.size()) > max_reduced_sites)
        throw std::invalid_argument("at most 12 sites may be retained");
    std::set<int> seen;
    for (int s : sites) {
        if (s < 1 || s > L)
            throw std::out_of_range("site " + std::to_string(s) + " outside lattice");
        if (!seen.insert(s).second)
            throw std::invalid_argument("duplicate site " + std::to_string(s));
    }
}

/// Entropy in bits of a probability vector, dropping entries below the floor.
inline double shannon_bits(std::span<const double> p)
{
    double s = 0.0;
    for (double v : p)
        if (v > entropy_eigenvalue_floor)
            s -= v * std::log2(v);
    return s;
}

} // namespace detail

/// Partial trace of |psi><psi| over every site not in `sites`. The result is
/// normalized by <psi|psi>, so slightly non-normalized integrator output
/// still yields a unit-trace matrix.
inline DensityMatrix reduced_density_matrix(std::span<const cplx> psi, int L, std::span<const int> sites)
{
    if (psi.size() != hilbert_dimension(L))
        throw dimension_mismatch("state dimension is not 2^L");
    detail::check_site_list(sites, L);

    const std::size_t k = sites.size();
    const std::size_t rdim = std::size_t{1} << k;
    std::vector<BasisIndex> offset(rdim, 0);
    BasisIndex kept = 0;
    for (std::size_t a = 0; a < rdim; ++a)
        for (std::size_t b = 0; b < k; ++b)
            if (a & (std::size_t{1} << b))
                offset[a] |= site_bit(sites[b]);
    for (int s : sites)
        kept |= site_bit(s);
    const BasisIndex rest_mask = (hilbert_dimension(L) - 1) & ~kept;

    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rdim), static_cast<Eigen::Index>(rdim));
    std::vector<cplx> block(rdim);
    BasisIndex rest = 0;
    do {
        for (std::size_t a = 0; a < rdim; ++a)
            block[a] = psi[rest | offset[a]];
        for (std::size_t a = 0; a < rdim; ++a) {
            if (block[a] == cplx{})
                continue;
            for (std::size_t b = 0; b < rdim; ++b)
                rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += block[a] * std::conj(block[b]);
        }
        rest = (rest - rest_mask) & rest_mask;
    } while (rest != 0);

    const double n2 = rho.trace().real();
    if (n2 <= 0.0)
        throw std::domain_error("cannot reduce a zero state");
    rho /= n2;
    return DensityMatrix(std::vector<int>(sites.begin(), sites.end()), std::move(rho));
}

inline DensityMatrix reduced_density_matrix(const StateVector& state, std::span<const int> sites)
{
    return reduced_density_matrix(state.amplitudes(), state.size(), sites);
}

inline DensityMatrix reduced_density_matrix(const StateVector& state, std::initializer_list<int> sites)
{
    return reduced_density_matrix(state.amplitudes(), state.size(), std::span<const int>(sites.begin(), sites.size()));
}

/// -Tr rho log2 rho.
inline double von_neumann_entropy(const DensityMatrix& rho)
{
    rho.validate();
    const Eigen::VectorXd ev = rho.eigenvalues();
    return detail::shannon_bits(std::span<const double>(ev.data(), static_cast<std::size_t>(ev.size())));
}

/// S_i for every site from the full 2x2 reduced matrices.
inline std::vector<double> single_site_entropies(std::span<const cplx> psi, int L)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(L));
    for (int i = 1; i <= L; ++i) {
        const std::array<int, 1> site{i};
        out.push_back(von_neumann_entropy(reduced_density_matrix(psi, L, site)));
    }
    return out;
}

inline std::vector<double> single_site_entropies(const StateVector& state)
{
    return single_site_entropies(state.amplitudes(), state.size());
}

inline double two_site_entropy(std::span<const cplx> psi, int L, int i, int j)
{
    if (i == j)
        throw std::invalid_argument("two-site entropy needs distinct sites");
    const std::array<int, 2> pair{std::min(i, j), std::max(i, j)};
    return von_neumann_entropy(reduced_density_matrix(psi, L, pair));
}

inline double two_site_entropy(const StateVector& state, int i, int j)
{
    return two_site_entropy(state.amplitudes(), state.size(), i, j);
}

// Pairwise mutual information I_ij = (S_i + S_j - S_ij) / 2, zero diagonal.
// Note the factor 1/2 relative to the usual information-theoretic definition.
class MIMatrix {
public:
    explicit MIMatrix(Eigen::MatrixXd values) : values_(std::move(values))
    {
        if (values_.rows() != values_.cols())
            throw dimension_mismatch("mutual-information matrix must be square");
        const Eigen::Index L = values_.rows();
        for (Eigen::Index i = 0; i < L; ++i) {
            if (values_(i, i) != 0.0)
                throw std::invalid_argument("mutual-information diagonal must be zero");
            for (Eigen::Index j = 0; j < L; ++j) {
                if (std::abs(values_(i, j) - values_(j, i)) > density_matrix_tolerance)
                    throw std::invalid_argument("mutual-information matrix must be symmetric");
                if (values_(i, j) < -density_matrix_tolerance)
                    throw std::invalid_argument("mutual-information entries must be non-negative");
                values_(i, j) = std::max(values_(i, j), 0.0);
            }
        }
    }

    int size() const noexcept { return static_cast<int>(values_.rows()); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    /// 1-based sites.
    double operator()(int i, int j) const { return values_(i - 1, j - 1); }

private:
    Eigen::MatrixXd values_;
};

inline MIMatrix mutual_information_matrix(std::span<const cplx> psi, int L)
{
    const std::vector<double> single = single_site_entropies(psi, L);
    Eigen::MatrixXd mi = Eigen::MatrixXd::Zero(L, L);
    for (int i = 1; i <= L; ++i) {
        for (int j = i + 1; j <= L; ++j) {
            const double value = 0.5 * (single[i - 1] + single[j - 1] - two_site_entropy(psi, L, i, j));
            mi(i - 1, j - 1) = mi(j - 1, i - 1) = std::max(value, 0.0);
        }
    }
    return MIMatrix(std::move(mi));
}

inline MIMatrix mutual_information_matrix(const StateVector& state)
{
    return mutual_information_matrix(state.amplitudes(), state.size());
}

/// Wootters concurrence max(0, l1 - l2 - l3 - l4), with l the descending
/// square roots of the eigenvalues of rho * (sy x sy) rho^* (sy x sy).
inline double concurrence(const DensityMatrix& rho)
{
    if (rho.dimension() != 4)
        throw dimension_mismatch("concurrence needs a two-site (4x4) density matrix");
    rho.validate();
    Eigen::Matrix4cd flip = Eigen::Matrix4cd::Zero();
    flip(0, 3) = flip(3, 0) = -1.0;
    flip(1, 2) = flip(2, 1) = 1.0;
    const Eigen::Matrix4cd r = rho.matrix();
    const Eigen::Matrix4cd tilde = flip * r.conjugate() * flip;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(r * tilde, false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("concurrence eigensolver failed");

    std::array<double, 4> lambda{};
    for (int k = 0; k < 4; ++k) {
        const double re = solver.eigenvalues()(k).real();
        if (re < -1e-8)
            throw std::domain_error("rho * rho-tilde has a negative eigenvalue " + std::to_string(re));
        lambda[static_cast<std::size_t>(k)] = std::sqrt(std::max(re, 0.0));
    }
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    return std::max(0.0, lambda[0] - lambda[1] - lambda[2] - lambda[3]);
}

/// Mean concurrence over all pairs (i, i + d), i = 1 .. L - d.
inline double average_concurrence(std::span<const cplx> psi, int L, int distance)
{
    if (distance < 1 || distance > L - 1)
        throw std::out_of_range("distance " + std::to_string(distance) + " outside [1, L-1]");
    double sum = 0.0;
    for (int i = 1; i + distance <= L; ++i) {
        const std::array<int, 2> pair{i, i + distance};
        sum += concurrence(reduced_density_matrix(psi, L, pair));
    }
    return sum / (L - distance);
}

inline double average_concurrence(const StateVector& state, int distance)
{
    return average_concurrence(state.amplitudes(), state.size(), distance);
}

/// Entanglement entropy of sites 1..bond against bond+1..L, from the Schmidt
/// spectrum of the 2^bond x 2^(L-bond) amplitude matrix.
inline double bond_entropy(std::span<const cplx> psi, int L, int bond)
{
    if (psi.size() != hilbert_dimension(L))
        throw dimension_mismatch("state dimension is not 2^L");
    if (bond < 1 || bond > L - 1)
        throw std::out_of_range("bond " + std::to_string(bond) + " outside [1, L-1]");
    // Sites 1..bond are the low bits, so column-major storage with 2^bond rows
    // puts the left block on rows and the right block on columns.
    const Eigen::Index rows = Eigen::Index{1} << bond;
    const Eigen::Index cols = Eigen::Index{1} << (L - bond);
    Eigen::Map<const Eigen::MatrixXcd> m(psi.data(), rows, cols);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m);
    const Eigen::VectorXd s2 = svd.singularValues().array().square();
    const double total = s2.sum();
    if (total <= 0.0)
        throw std::domain_error("cannot take the bond entropy of a zero state");
    std::vector<double> p(static_cast<std::size_t>(s2.size()));
    for (Eigen::Index k = 0; k < s2.size(); ++k)
        p[static_cast<std::size_t>(k)] = s2(k) / total;
    return detail::shannon_bits(p);
}

inline double bond_entropy(const StateVector& state, int bond)
{
    return bond_entropy(state.amplitudes(), state.size(), bond);
}

/// Bond entropies for bonds 1..L-1.
inline std::vector<double> bond_entropy_profile(std::span<const cplx> psi, int L)
{
    std::vector<double> out;
    for (int j = 1; j <= L - 1; ++j)
        out.push_back(bond_entropy(psi, L, j));
    return out;
}

} // namespace qgol
