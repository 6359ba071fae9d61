// dynamics.hpp
// Quantum evolution i d/dt |psi> = H |psi>, the classical F12 automaton, and
// the stroboscopic measure-and-rotate protocol that connects the two.

#pragma once

#include "hamiltonian.hpp"
#include "lattice_state.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace qgol {

/// Duration of one classical step on the quantum time axis (a full S_i swap).
inline constexpr double classical_step_time = std::numbers::pi / 2.0;

inline constexpr double default_dt = 0.01;

// ---------------------------------------------------------------------------
// Classical automaton

/// One synchronous F12 update: every bulk site with 2 or 3 alive neighbours flips.
inline SpinConfig classical_f12_step(const SpinConfig& config)
{
    return SpinConfig(config.size(), config.bits() ^ detail::flip_mask(config.bits(), config.size()));
}

struct ClassicalTrajectory {
    std::vector<SpinConfig> steps;

    std::size_t size() const noexcept { return steps.size(); }
    static double time_of_step(std::size_t k) noexcept { return static_cast<double>(k) * classical_step_time; }
};

inline ClassicalTrajectory classical_trajectory(const SpinConfig& config, int n_steps)
{
    if (n_steps < 0)
        throw std::invalid_argument("n_steps must be non-negative");
    ClassicalTrajectory out;
    out.steps.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.steps.push_back(config);
    for (int k = 0; k < n_steps; ++k)
        out.steps.push_back(classical_f12_step(out.steps.back()));
    return out;
}

// ---------------------------------------------------------------------------
// Quantum evolution

class integration_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TimeDirection { forward, backward };

struct EvolveOptions {
    double t_max = 0.0;
    double dt = default_dt;
    int sample_every = 1;
    TimeDirection direction = TimeDirection::forward;
    double max_norm_drift = 1e-4;
};

template <typename Record>
struct Trajectory {
    std::vector<double> times;
    std::vector<Record> records;
    double dt = default_dt;
    double final_norm_drift = 0.0;
    double max_norm_drift = 0.0;
    std::vector<std::string> warnings;
};

/// Largest dt * ||H|| bound considered safe for RK4 with this Hamiltonian.
inline constexpr double rk4_stability_limit = 0.5;

namespace detail {

inline void axpy(cplx a, std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out) noexcept
{
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = y[k] + a * x[k];
}

} // namespace detail

/// Classic fixed-step fourth-order Runge-Kutta for d psi/dt = -i H psi.
///
/// `observe(t, amplitudes)` is called at t = 0, every `sample_every` steps and
/// at the final step; its results form the trajectory records. The state is
/// never renormalized. If the norm drifts by more than `max_norm_drift` the
/// run aborts with integration_error.
template <typename Observer>
auto evolve_rk4(const SparseHamiltonian& h, const StateVector& initial, const EvolveOptions& opt, Observer&& observe)
    -> Trajectory<std::invoke_result_t<Observer&, double, std::span<const cplx>>>
{
    using Record = std::invoke_result_t<Observer&, double, std::span<const cplx>>;
    if (!(opt.dt > 0.0))
        throw std::invalid_argument("dt must be positive");
    if (!(opt.t_max >= 0.0))
        throw std::invalid_argument("t_max must be non-negative");
    if (opt.sample_every < 1)
        throw std::invalid_argument("sample_every must be at least 1");
    if (initial.dimension() != h.dimension())
        throw dimension_mismatch("initial state and hamiltonian dimensions differ");

    Trajectory<Record> traj;
    traj.dt = opt.dt;
    const int bound = std::max(h.size() - 4, 1);
    if (opt.dt * bound > rk4_stability_limit)
        traj.warnings.push_back("dt * (L - 4) = " + std::to_string(opt.dt * bound) +
                                " exceeds the RK4 stability guideline of 0.5");

    const auto n_steps = static_cast<std::int64_t>(std::llround(opt.t_max / opt.dt));
    const cplx rate = opt.direction == TimeDirection::forward ? cplx{0.0, -1.0} : cplx{0.0, 1.0};
    const double dt = opt.dt;

    const std::size_t dim = initial.dimension();
    Amplitudes psi(initial.amplitudes().begin(), initial.amplitudes().end());
    Amplitudes acc(dim), tmp(dim), k(dim);

    auto rhs = [&](std::span<const cplx> in, std::span<cplx> out) {
        apply_hamiltonian(h, in, out);
        for (cplx& v : out)
            v *= rate;
    };

    auto record = [&](std::int64_t step) {
        const double drift = std::abs(norm(psi) - 1.0);
        traj.max_norm_drift = std::max(traj.max_norm_drift, drift);
        if (drift > opt.max_norm_drift)
            throw integration_error("norm drift " + std::to_string(drift) + " at t = " +
                                    std::to_string(step * dt) + " exceeds tolerance; reduce dt");
        const double t = static_cast<double>(step) * dt;
        traj.times.push_back(t);
        traj.records.push_back(observe(t, std::span<const cplx>(psi)));
    };

    record(0);
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        rhs(psi, k);
        detail::axpy(dt / 6.0, k, psi, acc);
        detail::axpy(dt / 2.0, k, psi, tmp);

        rhs(tmp, k);
        detail::axpy(dt / 3.0, k, acc, acc);
        detail::axpy(dt / 2.0, k, psi, tmp);

        rhs(tmp, k);
        detail::axpy(dt / 3.0, k, acc, acc);
        detail::axpy(dt, k, psi, tmp);

        rhs(tmp, k);
        detail::axpy(dt / 6.0, k, acc, psi);

        if (step % opt.sample_every == 0 || step == n_steps)
            record(step);
    }
    traj.final_norm_drift = std::abs(norm(psi) - 1.0);
    return traj;
}

/// Observer that keeps the full state at every sample.
inline auto store_states(int L)
{
    return [L](double, std::span<const cplx> psi) {
        return StateVector(L, Amplitudes(psi.begin(), psi.end()), 1e-4);
    };
}

inline Trajectory<StateVector> evolve_rk4(const SparseHamiltonian& h, const StateVector& initial, const EvolveOptions& opt)
{
    return evolve_rk4(h, initial, opt, store_states(h.size()));
}

/// Final state only.
inline StateVector evolve_rk4_final(const SparseHamiltonian& h, const StateVector& initial, EvolveOptions opt)
{
    opt.sample_every = std::numeric_limits<int>::max();
    auto traj = evolve_rk4(h, initial, opt, store_states(h.size()));
    return traj.records.back();
}

// Exact propagator exp(-i H t) from a dense eigendecomposition. Small L only.
class DensePropagator {
public:
    static constexpr int max_size = 10;

    explicit DensePropagator(const SparseHamiltonian& h) : L_(h.size())
    {
        if (L_ > max_size)
            throw std::invalid_argument("dense propagation limited to L <= 10");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_dense(h));
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("eigendecomposition failed");
        energies_ = solver.eigenvalues();
        modes_ = solver.eigenvectors();
    }

    StateVector evolve(const StateVector& initial, double t) const
    {
        if (initial.size() != L_)
            throw dimension_mismatch("state and propagator lattice sizes differ");
        const auto dim = static_cast<Eigen::Index>(initial.dimension());
        Eigen::Map<const Eigen::VectorXcd> psi0(initial.amplitudes().data(), dim);
        Eigen::VectorXcd coeff = modes_.transpose().cast<cplx>() * psi0;
        for (Eigen::Index m = 0; m < dim; ++m)
            coeff(m) *= std::exp(cplx{0.0, -energies_(m) * t});
        Eigen::VectorXcd psi = modes_.cast<cplx>() * coeff;
        return StateVector(L_, Amplitudes(psi.data(), psi.data() + dim), 1e-8);
    }

    const Eigen::VectorXd& energies() const noexcept { return energies_; }

private:
    int L_;
    Eigen::VectorXd energies_;
    Eigen::MatrixXd modes_;
};

inline StateVector evolve_exact(const SparseHamiltonian& h, const StateVector& initial, double t)
{
    return DensePropagator(h).evolve(initial, t);
}

// ---------------------------------------------------------------------------
// Stroboscopic protocol

/// Applies exp(-i theta S_site) with S = b + b^dagger, i.e. a sigma_x rotation.
inline void rotate_site(std::span<cplx> psi, int site, double theta)
{
    const BasisIndex bit = site_bit(site);
    const double c = std::cos(theta);
    const cplx s{0.0, -std::sin(theta)};
    for (BasisIndex x = 0; x < psi.size(); ++x) {
        if (x & bit)
            continue;
        const cplx a0 = psi[x];
        const cplx a1 = psi[x | bit];
        psi[x] = c * a0 + s * a1;
        psi[x | bit] = s * a0 + c * a1;
    }
}

/// Reads off the Fock label of a state that is a single basis state up to phase.
inline SpinConfig measured_fock_config(int L, std::span<const cplx> psi, double tolerance = 1e-9)
{
    BasisIndex best = 0;
    double best_p = -1.0;
    for (BasisIndex x = 0; x < psi.size(); ++x) {
        const double p = std::norm(psi[x]);
        if (p > best_p) {
            best_p = p;
            best = x;
        }
    }
    if (std::abs(best_p - 1.0) > tolerance)
        throw std::logic_error("state is not a Fock state (max probability " + std::to_string(best_p) + ")");
    return SpinConfig(L, best);
}

/// Per step: measure the neighbour projectors on the current Fock state,
/// freeze the resulting flip set, then rotate each flagged site for a time
/// pi/2. The Hamiltonian only supplies the lattice; the projector values come
/// from the measured configuration.
inline ClassicalTrajectory stroboscopic_quantum(const SparseHamiltonian& h, const SpinConfig& config, int n_steps)
{
    if (n_steps < 0)
        throw std::invalid_argument("n_steps must be non-negative");
    if (config.size() != h.size())
        throw dimension_mismatch("configuration and hamiltonian lattice sizes differ");
    const int L = config.size();
    ClassicalTrajectory out;
    out.steps.push_back(config);
    StateVector start = make_fock_state(config);
    Amplitudes psi(start.amplitudes().begin(), start.amplitudes().end());
    for (int k = 0; k < n_steps; ++k) {
        const SpinConfig current = measured_fock_config(L, psi);
        std::vector<int> flagged;
        for (int i = 3; i <= L - 2; ++i)
            if (detail::rule_fires(alive_neighbors(current, i)))
                flagged.push_back(i);
        for (int i : flagged)
            rotate_site(psi, i, classical_step_time);
        out.steps.push_back(measured_fock_config(L, psi));
    }
    return out;
}

} // namespace qgol
