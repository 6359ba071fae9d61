// circulant.hpp
// Ring model for a classical cycle psi_0 -> psi_1 -> ... -> psi_{n-1} -> psi_0:
// a particle hopping with amplitude J between neighbouring cycle members.
// The matrix is circulant with c_1 = c_{n-1} = J, so the Fourier vectors
// v_m(k) = exp(-2 pi i k m / n) / sqrt(n) diagonalize it with energies
// E_m = 2 J cos(2 pi m / n).

#pragma once

#include "dynamics.hpp"
#include "lattice_state.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace qgol {

struct CycleInfo {
    int offset = 0;  // steps before the first config that lies on the cycle
    int period = 0;
    friend bool operator==(const CycleInfo&, const CycleInfo&) = default;
};

/// Iterates the F12 rule from `config` until a configuration repeats. Returns
/// nothing if no repeat is seen within `max_steps` applications.
inline std::optional<CycleInfo> find_classical_cycle(const SpinConfig& config, int max_steps)
{
    if (max_steps < 1)
        throw std::invalid_argument("max_steps must be at least 1");
    std::unordered_map<BasisIndex, int> first_seen;
    SpinConfig current = config;
    first_seen.emplace(current.bits(), 0);
    for (int step = 1; step <= max_steps; ++step) {
        current = classical_f12_step(current);
        auto [it, inserted] = first_seen.emplace(current.bits(), step);
        if (!inserted)
            return CycleInfo{it->second, step - it->second};
    }
    return std::nullopt;
}

/// Hopping matrix of the n-site ring, (k, k+1 mod n) entries summed so that
/// n = 2 gives the doubled 2J link.
inline Eigen::MatrixXd ring_hamiltonian(int n, double J)
{
    if (n < 2)
        throw std::invalid_argument("ring period must be at least 2");
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const int next = (k + 1) % n;
        h(k, next) += J;
        h(next, k) += J;
    }
    return h;
}

class RingModel {
public:
    RingModel(int n, double J) : n_(n), J_(J)
    {
        if (n < 2)
            throw std::invalid_argument("ring period must be at least 2");
        energies_.resize(n);
        modes_.resize(n, n);
        const double norm = 1.0 / std::sqrt(static_cast<double>(n));
        for (int m = 0; m < n; ++m) {
            const double phase = 2.0 * std::numbers::pi * m / n;
            energies_(m) = 2.0 * J * std::cos(phase);
            for (int k = 0; k < n; ++k)
                modes_(k, m) = std::polar(norm, -phase * k);
        }
    }

    int period() const noexcept { return n_; }
    double hopping() const noexcept { return J_; }
    const Eigen::VectorXd& eigenvalues() const noexcept { return energies_; }
    /// Column m is eigenvector m; row k is the component on cycle member k.
    const Eigen::MatrixXcd& eigenvectors() const noexcept { return modes_; }

    /// max_m || H v_m - E_m v_m ||_2 against the explicit ring matrix.
    double max_residual() const
    {
        const Eigen::MatrixXcd h = ring_hamiltonian(n_, J_).cast<cplx>();
        double worst = 0.0;
        for (int m = 0; m < n_; ++m) {
            const Eigen::VectorXcd v = modes_.col(m);
            worst = std::max(worst, (h * v - energies_(m) * v).norm());
        }
        return worst;
    }

private:
    int n_;
    double J_;
    Eigen::VectorXd energies_;
    Eigen::MatrixXcd modes_;
};

inline RingModel ring_eigensystem(int n, double J = 1.0) { return RingModel(n, J); }

/// |<psi_k| exp(-i H t) |psi_k0>|^2 for every cycle member k.
inline std::vector<double> ring_evolution(const RingModel& model, int k0, double t)
{
    const int n = model.period();
    if (k0 < 0 || k0 >= n)
        throw std::out_of_range("initial cycle index outside [0, n)");
    const auto& v = model.eigenvectors();
    const auto& e = model.eigenvalues();
    std::vector<double> prob(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        cplx amp{0.0, 0.0};
        for (int m = 0; m < n; ++m)
            amp += v(k, m) * std::exp(cplx{0.0, -e(m) * t}) * std::conj(v(k0, m));
        prob[static_cast<std::size_t>(k)] = std::norm(amp);
    }
    return prob;
}

// ---------------------------------------------------------------------------
// Commensurability of energy gaps

struct RationalApprox {
    std::int64_t p = 0;
    std::int64_t q = 1;
    bool found = false;
};

/// Smallest-denominator continued-fraction convergent p/q with q <= q_max and
/// q^2 |x - p/q| <= tolerance, if any. Irrationals have convergents with
/// q^2 |x - p/q| < 1 at every scale, hence the q^2 weighting.
inline RationalApprox rational_approximation(double x, double tolerance, std::int64_t q_max)
{
    // Convergents h_k / k_k of the continued fraction of x.
    std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
    std::int64_t k_prev = 0, k = 1;
    double frac = x - std::floor(x);
    for (int iter = 0; iter < 64; ++iter) {
        const double kd = static_cast<double>(k);
        if (kd * kd * std::abs(x - static_cast<double>(h) / kd) <= tolerance)
            return {h, k, true};
        if (frac < 1e-300)
            break;
        const double inv = 1.0 / frac;
        const auto a = static_cast<std::int64_t>(std::floor(inv));
        frac = inv - std::floor(inv);
        const std::int64_t h_next = a * h + h_prev;
        const std::int64_t k_next = a * k + k_prev;
        if (k_next > q_max || k_next <= 0)
            break;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
    return {};
}

struct CommensurabilityReport {
    std::vector<double> energies;
    std::vector<double> gaps;                 // distinct nonzero |E_a - E_b|, ascending
    std::vector<std::vector<RationalApprox>> ratios;  // ratios[a][b] ~ gaps[a] / gaps[b]
    bool commensurate = true;
};

/// Tests whether every ratio of distinct nonzero level spacings of the n-ring
/// is (within `tolerance`) a rational with denominator at most `q_max`.
inline CommensurabilityReport commensurability_check(int n, double tolerance = 1e-9, std::int64_t q_max = 1'000'000,
                                                     double J = 1.0)
{
    const RingModel model(n, J);
    CommensurabilityReport report;
    const auto& e = model.eigenvalues();
    report.energies.assign(e.data(), e.data() + e.size());

    // Gaps are collected up to sign and deduplicated with a relative tolerance.
    const double scale = std::max(std::abs(J), 1e-300);
    std::vector<double> gaps;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            const double g = std::abs(e(a) - e(b));
            if (g <= 1e-9 * scale)
                continue;
            bool dup = false;
            for (double existing : gaps)
                dup = dup || std::abs(existing - g) <= 1e-9 * scale;
            if (!dup)
                gaps.push_back(g);
        }
    std::sort(gaps.begin(), gaps.end());
    report.gaps = gaps;

    report.ratios.assign(gaps.size(), std::vector<RationalApprox>(gaps.size()));
    for (std::size_t a = 0; a < gaps.size(); ++a)
        for (std::size_t b = 0; b < gaps.size(); ++b) {
            report.ratios[a][b] = rational_approximation(gaps[a] / gaps[b], tolerance, q_max);
            report.commensurate = report.commensurate && report.ratios[a][b].found;
        }
    return report;
}

} // namespace qgol
