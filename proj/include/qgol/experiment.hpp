// experiment.hpp
// Experiment runner: run configuration, random Fock ensembles, equilibrium
// averages and the per-experiment CSV/manifest output.

#pragma once

#include "circulant.hpp"
#include "csv.hpp"
#include "dynamics.hpp"
#include "hamiltonian.hpp"
#include "manifest.hpp"
#include "network.hpp"
#include "observables.hpp"
#include "quantum_info.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qgol {

inline constexpr int max_run_lattice_size = 24;

class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TimeWindow {
    double begin = 0.0;
    double end = 0.0;
    bool contains(double t) const noexcept { return t >= begin - 1e-9 && t <= end + 1e-9; }
};

inline constexpr TimeWindow default_quantum_window{25.0, 30.0};
inline constexpr TimeWindow default_classical_window{83.0, 100.0};

// ---------------------------------------------------------------------------
// Sampling and averaging

/// Exactly round(rho0 * L) alive cells, placed uniformly among all L sites.
template <typename Rng>
SpinConfig sample_random_fock(int L, double rho0, Rng& rng)
{
    if (!(rho0 >= 0.0 && rho0 <= 1.0))
        throw config_error("initial density must lie in [0, 1]");
    check_lattice_size(L);
    const auto alive = static_cast<int>(std::lround(rho0 * L));
    std::vector<int> sites(static_cast<std::size_t>(L));
    std::iota(sites.begin(), sites.end(), 1);
    std::shuffle(sites.begin(), sites.end(), rng);
    BasisIndex bits = 0;
    for (int k = 0; k < alive; ++k)
        bits |= site_bit(sites[static_cast<std::size_t>(k)]);
    return SpinConfig(L, bits);
}

/// Independent generator for (master seed, stream, sample).
inline std::mt19937_64 sample_rng(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t sample)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sample)};
    return std::mt19937_64(seq);
}

/// Mean of the samples whose time lies in `window`.
inline double equilibrium_average(std::span<const double> times, std::span<const double> values, TimeWindow window)
{
    if (times.size() != values.size())
        throw dimension_mismatch("times and values differ in length");
    if (times.empty() || window.begin < times.front() - 1e-9 || window.end > times.back() + 1e-9)
        throw std::out_of_range("averaging window outside the series range");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < times.size(); ++k)
        if (window.contains(times[k])) {
            sum += values[k];
            ++n;
        }
    if (n == 0)
        throw std::out_of_range("averaging window contains no samples");
    return sum / static_cast<double>(n);
}

// Time-averaged discretized density, diversity and improved diversity.
struct EquilibriumScalars {
    double density = 0.0;
    double diversity = 0.0;
    double improved_diversity = 0.0;
};

struct LocalSummary {
    double density = 0.0;
    double diversity = 0.0;
    double improved_diversity = 0.0;
};

inline LocalSummary summarize(const DiscretizedProfile& d)
{
    return {qgol::density(d), static_cast<double>(qgol::diversity(d)), qgol::improved_diversity(d)};
}

namespace detail {

inline EquilibriumScalars average_window(const std::vector<double>& times, const std::vector<LocalSummary>& series,
                                         TimeWindow window)
{
    std::vector<double> rho, div, idiv;
    for (const auto& s : series) {
        rho.push_back(s.density);
        div.push_back(s.diversity);
        idiv.push_back(s.improved_diversity);
    }
    return {equilibrium_average(times, rho, window), equilibrium_average(times, div, window),
            equilibrium_average(times, idiv, window)};
}

} // namespace detail

/// Classical equilibrium scalars over steps k with k pi/2 inside `window`.
inline EquilibriumScalars classical_equilibrium(const SpinConfig& initial, TimeWindow window)
{
    const auto last = static_cast<int>(std::floor(window.end / classical_step_time + 1e-9));
    const ClassicalTrajectory traj = classical_trajectory(initial, last);
    std::vector<double> times;
    std::vector<LocalSummary> series;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        times.push_back(ClassicalTrajectory::time_of_step(k));
        series.push_back(summarize(DiscretizedProfile::from_config(traj.steps[k])));
    }
    return detail::average_window(times, series, {std::max(window.begin, 0.0), times.back()});
}

struct QuantumEquilibriumOptions {
    TimeWindow window = default_quantum_window;
    double dt = default_dt;
    int sample_every = 10;
};

/// Quantum equilibrium scalars from an RK4 run up to window.end.
inline EquilibriumScalars quantum_equilibrium(const SparseHamiltonian& h, const SpinConfig& initial,
                                              const QuantumEquilibriumOptions& opt = {})
{
    EvolveOptions eo;
    eo.t_max = opt.window.end;
    eo.dt = opt.dt;
    eo.sample_every = opt.sample_every;
    const int L = h.size();
    const auto traj = evolve_rk4(h, make_fock_state(initial), eo, [&](double t, std::span<const cplx> psi) {
        if (!opt.window.contains(t))
            return LocalSummary{};
        return summarize(discretize(local_population(psi, L)));
    });
    return detail::average_window(traj.times, traj.records, opt.window);
}

/// Classical equilibrium density, diversity and improved diversity averaged
/// over all 2^L initial configurations, grouped by initial alive count
/// (index = count, 0..L).
inline std::vector<EquilibriumScalars> classical_equilibrium_exhaustive(int L, TimeWindow window = default_classical_window)
{
    check_lattice_size(L);
    if (L > 20)
        throw config_error("exhaustive classical enumeration limited to L <= 20");
    std::vector<EquilibriumScalars> sum(static_cast<std::size_t>(L) + 1);
    std::vector<std::size_t> count(static_cast<std::size_t>(L) + 1, 0);
    for (BasisIndex x = 0; x < hilbert_dimension(L); ++x) {
        const SpinConfig c(L, x);
        const auto eq = classical_equilibrium(c, window);
        auto& s = sum[static_cast<std::size_t>(c.alive_count())];
        s.density += eq.density;
        s.diversity += eq.diversity;
        s.improved_diversity += eq.improved_diversity;
        ++count[static_cast<std::size_t>(c.alive_count())];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) {
        const auto n = static_cast<double>(count[k]);
        sum[k] = {sum[k].density / n, sum[k].diversity / n, sum[k].improved_diversity / n};
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Parallel helper

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
            });
    }
    if (failure)
        std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Ensembles

struct EnsembleResult {
    double rho0 = 0.0;
    std::vector<SpinConfig> initial_states;
    std::vector<EquilibriumScalars> quantum;
    std::vector<EquilibriumScalars> classical;
    EquilibriumScalars quantum_mean, quantum_stderr;
    EquilibriumScalars classical_mean, classical_stderr;
    TimeWindow quantum_window = default_quantum_window;
    TimeWindow classical_window = default_classical_window;
};

namespace detail {

inline std::pair<EquilibriumScalars, EquilibriumScalars> mean_and_stderr(const std::vector<EquilibriumScalars>& xs)
{
    EquilibriumScalars mean, err;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty())
        return {mean, err};
    for (const auto& x : xs) {
        mean.density += x.density / n;
        mean.diversity += x.diversity / n;
        mean.improved_diversity += x.improved_diversity / n;
    }
    if (xs.size() > 1) {
        for (const auto& x : xs) {
            err.density += (x.density - mean.density) * (x.density - mean.density);
            err.diversity += (x.diversity - mean.diversity) * (x.diversity - mean.diversity);
            err.improved_diversity +=
                (x.improved_diversity - mean.improved_diversity) * (x.improved_diversity - mean.improved_diversity);
        }
        const double scale = 1.0 / ((n - 1.0) * n);
        err = {std::sqrt(err.density * scale), std::sqrt(err.diversity * scale),
               std::sqrt(err.improved_diversity * scale)};
    }
    return {mean, err};
}

} // namespace detail

struct EnsembleOptions {
    int L = 16;
    double rho0 = 0.25;
    int samples = 32;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;  // distinguishes densities sharing one master seed
    QuantumEquilibriumOptions quantum;
    TimeWindow classical_window = default_classical_window;
    bool run_quantum = true;
    bool run_classical = true;
    unsigned workers = 1;
};

/// Random-Fock ensemble at one initial density. Each sample draws from its
/// own generator, so results do not depend on the number of workers.
inline EnsembleResult run_ensemble(const EnsembleOptions& opt, const SparseHamiltonian* h = nullptr)
{
    if (opt.samples < 1)
        throw config_error("ensemble needs at least one sample");
    EnsembleResult out;
    out.rho0 = opt.rho0;
    out.quantum_window = opt.quantum.window;
    out.classical_window = opt.classical_window;
    for (int s = 0; s < opt.samples; ++s) {
        auto rng = sample_rng(opt.seed, opt.stream, static_cast<std::uint64_t>(s));
        out.initial_states.push_back(sample_random_fock(opt.L, opt.rho0, rng));
    }
    const auto n = static_cast<std::size_t>(opt.samples);
    if (opt.run_classical) {
        out.classical.resize(n);
        for (std::size_t s = 0; s < n; ++s)
            out.classical[s] = classical_equilibrium(out.initial_states[s], opt.classical_window);
        std::tie(out.classical_mean, out.classical_stderr) = detail::mean_and_stderr(out.classical);
    }
    if (opt.run_quantum) {
        std::optional<SparseHamiltonian> own;
        if (!h) {
            own.emplace(build_hamiltonian(opt.L));
            h = &*own;
        }
        out.quantum.resize(n);
        parallel_for(n, opt.workers,
                     [&](std::size_t s) { out.quantum[s] = quantum_equilibrium(*h, out.initial_states[s], opt.quantum); });
        std::tie(out.quantum_mean, out.quantum_stderr) = detail::mean_and_stderr(out.quantum);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run configuration

enum class ExperimentKind { evolve, classical, strobe, ensemble, circulant };

inline std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::evolve: return "evolve";
    case ExperimentKind::classical: return "classical";
    case ExperimentKind::strobe: return "strobe";
    case ExperimentKind::ensemble: return "ensemble";
    case ExperimentKind::circulant: return "circulant";
    }
    return "unknown";
}

inline ExperimentKind parse_kind(const std::string& s)
{
    for (auto k : {ExperimentKind::evolve, ExperimentKind::classical, ExperimentKind::strobe, ExperimentKind::ensemble,
                   ExperimentKind::circulant})
        if (to_string(k) == s)
            return k;
    throw config_error("unknown experiment kind '" + s + "'");
}

struct MeasureSet {
    bool populations = false;
    bool discretized = false;
    bool clusters = false;
    bool diversity = false;
    bool entropies = false;
    bool bond = false;
    bool mi = false;
    bool network = false;
    bool concurrence = false;

    bool needs_quantum_info() const noexcept { return entropies || bond || mi || network || concurrence; }

    static MeasureSet parse(const std::string& list)
    {
        MeasureSet m;
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item.erase(0, item.find_first_not_of(" \t"));
            item.erase(item.find_last_not_of(" \t") + 1);
            if (item.empty())
                continue;
            if (item == "all") {
                m = {true, true, true, true, true, true, true, true, true};
            } else if (item == "populations") m.populations = true;
            else if (item == "discretized") m.discretized = true;
            else if (item == "clusters") m.clusters = true;
            else if (item == "diversity") m.diversity = true;
            else if (item == "entropies") m.entropies = true;
            else if (item == "bond") m.bond = true;
            else if (item == "mi") m.mi = true;
            else if (item == "network") m.network = true;
            else if (item == "concurrence") m.concurrence = true;
            else
                throw config_error("unknown measure '" + item + "'");
        }
        return m;
    }

    std::string to_string() const
    {
        std::vector<std::string> names;
        if (populations) names.push_back("populations");
        if (discretized) names.push_back("discretized");
        if (clusters) names.push_back("clusters");
        if (diversity) names.push_back("diversity");
        if (entropies) names.push_back("entropies");
        if (bond) names.push_back("bond");
        if (mi) names.push_back("mi");
        if (network) names.push_back("network");
        if (concurrence) names.push_back("concurrence");
        std::string s;
        for (std::size_t k = 0; k < names.size(); ++k)
            s += (k ? "," : "") + names[k];
        return s;
    }
};

inline const std::string default_measures = "populations,discretized,clusters,diversity";

struct RunConfig {
    ExperimentKind kind = ExperimentKind::evolve;
    int length = 0;
    std::string initial;             // bitstring, site 1 leftmost
    std::vector<double> densities;   // rho(0) values for ensembles
    double t_max = 30.0;
    double dt = default_dt;
    int sample_every = 10;
    int steps = 20;                  // classical / stroboscopic steps
    int samples = 32;
    std::optional<std::uint64_t> seed;
    MeasureSet measures = MeasureSet::parse(default_measures);
    std::vector<int> distances{1};   // concurrence distances
    std::vector<int> bonds;          // empty: every bond
    TimeWindow window = default_quantum_window;
    TimeWindow classical_window = default_classical_window;
    int period = 0;                  // ring size for circulant runs
    double hopping = 1.0;
    unsigned workers = 1;
    std::string out = "out";
    std::string command_line;

    /// Throws config_error on any violated invariant.
    void validate() const
    {
        if (!(dt > 0.0))
            throw config_error("dt must be positive");
        if (!(t_max >= 0.0))
            throw config_error("tmax must be non-negative");
        if (sample_every < 1)
            throw config_error("sample-every must be at least 1");
        if (steps < 0)
            throw config_error("steps must be non-negative");
        for (double r : densities)
            if (!(r >= 0.0 && r <= 1.0))
                throw config_error("densities must lie in [0, 1]");
        if (kind == ExperimentKind::circulant) {
            if (period == 0 && initial.empty())
                throw config_error("circulant runs need --period or --initial");
            if (period != 0 && period < 2)
                throw config_error("ring period must be at least 2");
            return;
        }
        if (length > max_run_lattice_size)
            throw config_error("lattice size " + std::to_string(length) + " exceeds the limit of 24");
        if (kind == ExperimentKind::ensemble) {
            if (length < min_lattice_size)
                throw config_error("ensemble runs need --length >= 5");
            if (densities.empty())
                throw config_error("ensemble runs need --density");
            if (!seed)
                throw config_error("random initial states need --seed");
            if (samples < 1)
                throw config_error("samples must be at least 1");
            if (window.end > t_max + 1e-9 || window.begin > window.end || window.begin < 0.0)
                throw config_error("averaging window must lie inside [0, tmax]");
            return;
        }
        if (initial.empty())
            throw config_error("--initial bitstring required");
        if (length != 0 && static_cast<int>(initial.size()) != length)
            throw config_error("initial bitstring has length " + std::to_string(initial.size()) + ", expected " +
                               std::to_string(length));
        if (static_cast<int>(initial.size()) > max_run_lattice_size)
            throw config_error("lattice size " + std::to_string(initial.size()) + " exceeds the limit of 24");
        try {
            SpinConfig::parse(initial);
        } catch (const std::invalid_argument& e) {
            throw config_error(e.what());
        }
    }

    int lattice_size() const { return length != 0 ? length : static_cast<int>(initial.size()); }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["kind"] = to_string(kind);
        j["length"] = lattice_size();
        j["initial"] = initial;
        j["densities"] = densities;
        j["tmax"] = t_max;
        j["dt"] = dt;
        j["sample_every"] = sample_every;
        j["steps"] = steps;
        j["samples"] = samples;
        j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
        j["measures"] = measures.to_string();
        j["distances"] = distances;
        j["bonds"] = bonds;
        j["window"] = {window.begin, window.end};
        j["classical_window"] = {classical_window.begin, classical_window.end};
        j["period"] = period;
        j["hopping"] = hopping;
        j["out"] = out;
        return j;
    }
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& value)
{
    std::istringstream is(value);
    T out{};
    if (!(is >> out) || !(is >> std::ws).eof())
        throw config_error("invalid value '" + value + "' for " + key);
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value)
{
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty())
            out.push_back(parse_scalar<T>(key, trim(item)));
    return out;
}

inline TimeWindow parse_window(const std::string& key, const std::string& value)
{
    const auto v = parse_list<double>(key, value);
    if (v.size() != 2 || v[0] > v[1])
        throw config_error(key + " must be 'begin,end' with begin <= end");
    return {v[0], v[1]};
}

} // namespace detail

/// Applies one "key = value" setting. Keys match the long CLI flag names.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value)
{
    using namespace detail;
    if (key == "kind") cfg.kind = parse_kind(value);
    else if (key == "length") cfg.length = parse_scalar<int>(key, value);
    else if (key == "initial") cfg.initial = value;
    else if (key == "density") cfg.densities = parse_list<double>(key, value);
    else if (key == "tmax") cfg.t_max = parse_scalar<double>(key, value);
    else if (key == "dt") cfg.dt = parse_scalar<double>(key, value);
    else if (key == "sample-every") cfg.sample_every = parse_scalar<int>(key, value);
    else if (key == "steps") cfg.steps = parse_scalar<int>(key, value);
    else if (key == "samples") cfg.samples = parse_scalar<int>(key, value);
    else if (key == "seed") cfg.seed = parse_scalar<std::uint64_t>(key, value);
    else if (key == "measures") cfg.measures = MeasureSet::parse(value);
    else if (key == "distances") cfg.distances = parse_list<int>(key, value);
    else if (key == "bonds") cfg.bonds = parse_list<int>(key, value);
    else if (key == "window") cfg.window = parse_window(key, value);
    else if (key == "classical-window") cfg.classical_window = parse_window(key, value);
    else if (key == "period") cfg.period = parse_scalar<int>(key, value);
    else if (key == "hopping") cfg.hopping = parse_scalar<double>(key, value);
    else if (key == "workers") cfg.workers = parse_scalar<unsigned>(key, value);
    else if (key == "out") cfg.out = value;
    else
        throw config_error("unknown configuration key '" + key + "'");
}

/// Key-value config text: one "key = value" per line, '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, std::istream& in)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config file " + path.string());
    apply_config_text(cfg, in);
}

// ---------------------------------------------------------------------------
// Runs

struct RunSummary {
    std::filesystem::path directory;
    std::vector<OutputFile> files;
    nlohmann::json summary;
};

namespace detail {

// Tables for the local observables shared by quantum and classical runs.
struct LocalTables {
    CsvTable populations, discretized, clusters, diversity;

    LocalTables(int L, std::vector<std::string> lead)
        : populations(indexed_columns(lead, "n_", L)),
          discretized(indexed_columns(lead, "D_", L)),
          clusters(indexed_columns(lead, "C_", L)),
          diversity([&] {
              auto h = lead;
              h.insert(h.end(), {"density", "diversity", "improved_diversity"});
              return h;
          }())
    {
    }

    void add(std::vector<double> lead, const PopulationProfile& pop, const MeasureSet& m)
    {
        const DiscretizedProfile d = discretize(pop);
        if (m.populations) {
            auto row = lead;
            row.insert(row.end(), pop.values.begin(), pop.values.end());
            populations.add_row(std::move(row));
        }
        if (m.discretized) {
            auto row = lead;
            for (auto c : d.cells())
                row.push_back(c);
            discretized.add_row(std::move(row));
        }
        if (m.clusters) {
            auto row = lead;
            const auto hist = alive_cluster_histogram(d);
            row.insert(row.end(), hist.begin() + 1, hist.end());
            clusters.add_row(std::move(row));
        }
        if (m.diversity) {
            auto row = lead;
            const auto s = summarize(d);
            row.insert(row.end(), {s.density, s.diversity, s.improved_diversity});
            diversity.add_row(std::move(row));
        }
    }

    void write(OutputWriter& out, const MeasureSet& m) const
    {
        if (m.populations) out.write_table("populations.csv", populations);
        if (m.discretized) out.write_table("discretized.csv", discretized);
        if (m.clusters) out.write_table("clusters.csv", clusters);
        if (m.diversity) out.write_table("diversity.csv", diversity);
    }
};

inline PopulationProfile config_population(const SpinConfig& c)
{
    std::vector<double> v;
    for (int j = 1; j <= c.size(); ++j)
        v.push_back(c.alive(j) ? 1.0 : 0.0);
    return {std::move(v)};
}

inline std::string config_table(const ClassicalTrajectory& traj)
{
    std::ostringstream os;
    os << "step,time,config\n";
    for (std::size_t k = 0; k < traj.size(); ++k)
        os << k << ',' << format_number(ClassicalTrajectory::time_of_step(k)) << ',' << traj.steps[k].to_string() << '\n';
    return os.str();
}

inline RunSummary run_evolve(const RunConfig& cfg, OutputWriter& out)
{
    const SpinConfig initial = SpinConfig::parse(cfg.initial);
    const int L = initial.size();
    const MeasureSet& m = cfg.measures;
    std::vector<int> bonds = cfg.bonds;
    if (bonds.empty())
        for (int j = 1; j < L; ++j)
            bonds.push_back(j);
    for (int j : bonds)
        if (j < 1 || j >= L)
            throw config_error("bond " + std::to_string(j) + " outside [1, L-1]");
    for (int d : cfg.distances)
        if (d < 1 || d >= L)
            throw config_error("concurrence distance " + std::to_string(d) + " outside [1, L-1]");

    LocalTables local(L, {"time"});
    CsvTable entropies(indexed_columns({"time"}, "S_", L));
    std::vector<std::string> bond_header{"time"};
    for (int j : bonds)
        bond_header.push_back("bond_" + std::to_string(j));
    CsvTable bond(bond_header);
    CsvTable mi({"time", "i", "j", "value"});
    CsvTable network({"time", "density", "disparity", "clustering"});
    std::vector<std::string> conc_header{"time"};
    for (int d : cfg.distances)
        conc_header.push_back("d_" + std::to_string(d));
    CsvTable conc(conc_header);
    CsvTable norm_table({"time", "norm_drift", "energy"});

    const SparseHamiltonian h = build_hamiltonian(L);
    EvolveOptions eo;
    eo.t_max = cfg.t_max;
    eo.dt = cfg.dt;
    eo.sample_every = cfg.sample_every;
    const auto traj = evolve_rk4(h, make_fock_state(initial), eo, [&](double t, std::span<const cplx> psi) {
        local.add({t}, local_population(psi, L), m);
        norm_table.add_row({t, norm(psi) - 1.0, expectation(h, psi)});
        if (m.entropies) {
            auto row = single_site_entropies(psi, L);
            row.insert(row.begin(), t);
            entropies.add_row(std::move(row));
        }
        if (m.bond) {
            std::vector<double> row{t};
            for (int j : bonds)
                row.push_back(bond_entropy(psi, L, j));
            bond.add_row(std::move(row));
        }
        if (m.mi || m.network) {
            const MIMatrix w = mutual_information_matrix(psi, L);
            if (m.mi)
                for (int i = 1; i <= L; ++i)
                    for (int j = i + 1; j <= L; ++j)
                        mi.add_row({t, double(i), double(j), w(i, j)});
            if (m.network)
                network.add_row({t, network_density(w), disparity(w), network_clustering(w)});
        }
        if (m.concurrence) {
            std::vector<double> row{t};
            for (int d : cfg.distances)
                row.push_back(average_concurrence(psi, L, d));
            conc.add_row(std::move(row));
        }
        return 0;
    });

    local.write(out, m);
    out.write_table("norm.csv", norm_table);
    if (m.entropies) out.write_table("entropies.csv", entropies);
    if (m.bond) out.write_table("bond_entropy.csv", bond);
    if (m.mi) out.write_table("mutual_information.csv", mi);
    if (m.network) out.write_table("network.csv", network);
    if (m.concurrence) out.write_table("concurrence.csv", conc);

    RunSummary s;
    s.summary = {{"samples", traj.times.size()},
                 {"max_norm_drift", traj.max_norm_drift},
                 {"final_norm_drift", traj.final_norm_drift},
                 {"warnings", traj.warnings}};
    return s;
}

inline RunSummary run_classical_like(const RunConfig& cfg, OutputWriter& out, bool stroboscopic)
{
    const SpinConfig initial = SpinConfig::parse(cfg.initial);
    const int L = initial.size();
    const ClassicalTrajectory traj = stroboscopic ? stroboscopic_quantum(build_hamiltonian(L), initial, cfg.steps)
                                                  : classical_trajectory(initial, cfg.steps);
    LocalTables local(L, {"step", "time"});
    for (std::size_t k = 0; k < traj.size(); ++k)
        local.add({double(k), ClassicalTrajectory::time_of_step(k)}, config_population(traj.steps[k]), cfg.measures);
    out.write("configs.csv", config_table(traj));
    local.write(out, cfg.measures);

    RunSummary s;
    s.summary = {{"steps", cfg.steps}, {"final", traj.steps.back().to_string()}};
    if (const auto cyc = find_classical_cycle(initial, std::max(cfg.steps, 1)))
        s.summary["cycle"] = {{"offset", cyc->offset}, {"period", cyc->period}};
    return s;
}

inline RunSummary run_ensemble_experiment(const RunConfig& cfg, OutputWriter& out)
{
    const int L = cfg.length;
    const SparseHamiltonian h = build_hamiltonian(L);
    CsvTable table({"rho0", "samples", "quantum_density", "quantum_density_se", "quantum_diversity",
                    "quantum_diversity_se", "quantum_improved_diversity", "quantum_improved_diversity_se",
                    "classical_density", "classical_density_se", "classical_diversity", "classical_diversity_se",
                    "classical_improved_diversity", "classical_improved_diversity_se"});
    std::ostringstream per_sample;
    per_sample << "rho0,sample,initial,quantum_density,quantum_diversity,quantum_improved_diversity,"
                  "classical_density,classical_diversity,classical_improved_diversity\n";
    nlohmann::json results = nlohmann::json::array();
    for (std::size_t di = 0; di < cfg.densities.size(); ++di) {
        EnsembleOptions eo;
        eo.L = L;
        eo.rho0 = cfg.densities[di];
        eo.samples = cfg.samples;
        eo.seed = *cfg.seed;
        eo.stream = di;
        eo.quantum.window = cfg.window;
        eo.quantum.dt = cfg.dt;
        eo.quantum.sample_every = cfg.sample_every;
        eo.classical_window = cfg.classical_window;
        eo.workers = cfg.workers;
        const EnsembleResult r = run_ensemble(eo, &h);
        table.add_row({r.rho0, double(cfg.samples), r.quantum_mean.density, r.quantum_stderr.density,
                       r.quantum_mean.diversity, r.quantum_stderr.diversity, r.quantum_mean.improved_diversity,
                       r.quantum_stderr.improved_diversity, r.classical_mean.density, r.classical_stderr.density,
                       r.classical_mean.diversity, r.classical_stderr.diversity, r.classical_mean.improved_diversity,
                       r.classical_stderr.improved_diversity});
        for (std::size_t s = 0; s < r.initial_states.size(); ++s)
            per_sample << format_number(r.rho0) << ',' << s << ',' << r.initial_states[s].to_string() << ','
                       << format_number(r.quantum[s].density) << ',' << format_number(r.quantum[s].diversity) << ','
                       << format_number(r.quantum[s].improved_diversity) << ','
                       << format_number(r.classical[s].density) << ',' << format_number(r.classical[s].diversity)
                       << ',' << format_number(r.classical[s].improved_diversity) << '\n';
        results.push_back({{"rho0", r.rho0},
                           {"quantum_density", r.quantum_mean.density},
                           {"classical_density", r.classical_mean.density}});
    }
    out.write_table("ensemble.csv", table);
    out.write("ensemble_samples.csv", per_sample.str());

    RunSummary s;
    s.summary = {{"results", results},
                 {"quantum_window", {cfg.window.begin, cfg.window.end}},
                 {"classical_window", {cfg.classical_window.begin, cfg.classical_window.end}}};
    return s;
}

inline RunSummary run_circulant(const RunConfig& cfg, OutputWriter& out)
{
    int n = cfg.period;
    nlohmann::json cycle_json;
    if (!cfg.initial.empty()) {
        const SpinConfig c = SpinConfig::parse(cfg.initial);
        const int max_steps = c.size() >= 24 ? (1 << 24) : (1 << c.size());
        const auto cyc = find_classical_cycle(c, max_steps);
        if (!cyc)
            throw std::runtime_error("no classical cycle found");
        cycle_json = {{"offset", cyc->offset}, {"period", cyc->period}};
        if (n == 0)
            n = cyc->period;
        if (n < 2)
            throw config_error("initial configuration reaches a fixed point; a ring needs period >= 2");
    }
    const RingModel model = ring_eigensystem(n, cfg.hopping);

    CsvTable eig({"m", "energy"});
    for (int m = 0; m < n; ++m)
        eig.add_row({double(m), model.eigenvalues()(m)});
    out.write_table("eigenvalues.csv", eig);

    const auto report = commensurability_check(n, 1e-9, 1'000'000, cfg.hopping);
    CsvTable gaps({"a", "b", "gap_a", "gap_b", "ratio", "p", "q", "rational"});
    for (std::size_t a = 0; a < report.gaps.size(); ++a)
        for (std::size_t b = 0; b < report.gaps.size(); ++b) {
            const auto& r = report.ratios[a][b];
            gaps.add_row({double(a), double(b), report.gaps[a], report.gaps[b], report.gaps[a] / report.gaps[b],
                          double(r.p), double(r.q), r.found ? 1.0 : 0.0});
        }
    out.write_table("gap_ratios.csv", gaps);

    CsvTable evo(indexed_columns({"time"}, "p_", n));
    const auto n_steps = static_cast<long long>(std::llround(cfg.t_max / cfg.dt));
    for (long long k = 0; k <= n_steps; k += cfg.sample_every) {
        const double t = static_cast<double>(k) * cfg.dt;
        auto row = ring_evolution(model, 0, t);
        row.insert(row.begin(), t);
        evo.add_row(std::move(row));
    }
    out.write_table("ring_evolution.csv", evo);

    RunSummary s;
    s.summary = {{"period", n},
                 {"hopping", cfg.hopping},
                 {"max_residual", model.max_residual()},
                 {"commensurate", report.commensurate}};
    if (!cycle_json.is_null())
        s.summary["cycle"] = cycle_json;
    return s;
}

} // namespace detail

/// Validates `cfg`, runs it and writes CSVs plus manifest.json into cfg.out.
inline RunSummary run(const RunConfig& cfg)
{
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    OutputWriter out(cfg.out);
    RunSummary s;
    switch (cfg.kind) {
    case ExperimentKind::evolve: s = detail::run_evolve(cfg, out); break;
    case ExperimentKind::classical: s = detail::run_classical_like(cfg, out, false); break;
    case ExperimentKind::strobe: s = detail::run_classical_like(cfg, out, true); break;
    case ExperimentKind::ensemble: s = detail::run_ensemble_experiment(cfg, out); break;
    case ExperimentKind::circulant: s = detail::run_circulant(cfg, out); break;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::json manifest;
    manifest["version"] = version_string;
    manifest["command"] = cfg.command_line;
    manifest["config"] = cfg.to_json();
    manifest["wall_time_seconds"] = wall;
    manifest["summary"] = s.summary;
    out.write_manifest(manifest);
    s.directory = out.directory();
    s.files = out.files();
    return s;
}

} // namespace qgol
