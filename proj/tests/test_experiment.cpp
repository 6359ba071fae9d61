#include "qgol/experiment.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace qgol;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir()
    {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("qgol_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string l;
    while (std::getline(is, l))
        out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(item);
    return out;
}

struct Exec {
    int status = 0;
    std::string out;
};

Exec run_cli(const std::string& args)
{
    const std::string cmd = std::string(QGOL_CLI_PATH) + " " + args + " 2>&1";
    Exec e;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe))
        e.out += buf;
    const int rc = ::pclose(pipe);
    e.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return e;
}

} // namespace

TEST(SampleRandomFock, Examples)
{
    std::mt19937_64 rng(1);
    EXPECT_EQ(sample_random_fock(16, 0.0, rng), SpinConfig::all_dead(16));
    EXPECT_EQ(sample_random_fock(16, 1.0, rng), SpinConfig::all_alive(16));
    for (int k = 0; k < 50; ++k) {
        const SpinConfig c = sample_random_fock(16, 0.25, rng);
        EXPECT_EQ(c.alive_count(), 4);
        EXPECT_EQ(density(discretize(local_population(make_fock_state(c)))), 0.25);
    }
    EXPECT_THROW(sample_random_fock(16, 1.5, rng), config_error);
    EXPECT_THROW(sample_random_fock(16, -0.1, rng), config_error);
}

TEST(SampleRandomFock, RoundsAliveCount)
{
    std::mt19937_64 rng(2);
    EXPECT_EQ(sample_random_fock(11, 0.5, rng).alive_count(), 6);  // 5.5 rounds away from zero
    EXPECT_EQ(sample_random_fock(10, 0.33, rng).alive_count(), 3);
}

TEST(SampleRandomFock, MarginalsWithinThreeSigma)
{
    const int L = 12, n = 20000;
    const double rho = 0.25;
    std::vector<int> hits(L + 1, 0);
    for (int s = 0; s < n; ++s) {
        auto rng = sample_rng(77, 0, static_cast<std::uint64_t>(s));
        const SpinConfig c = sample_random_fock(L, rho, rng);
        for (int j = 1; j <= L; ++j)
            hits[static_cast<std::size_t>(j)] += c.alive(j);
    }
    const double sigma = std::sqrt(n * rho * (1 - rho));
    for (int j = 1; j <= L; ++j)
        EXPECT_LE(std::abs(hits[static_cast<std::size_t>(j)] - n * rho), 3 * sigma) << j;
}

TEST(SampleRng, StreamsAreDistinctAndReproducible)
{
    auto a = sample_rng(5, 0, 0), b = sample_rng(5, 0, 0), c = sample_rng(5, 0, 1), d = sample_rng(5, 1, 0);
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
}

TEST(EquilibriumAverage, Examples)
{
    std::vector<double> t, v;
    for (int k = 0; k <= 3000; ++k) {
        t.push_back(k * 0.01);
        v.push_back(0.37);
    }
    EXPECT_NEAR(equilibrium_average(t, v, default_quantum_window), 0.37, 1e-12);
    for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = t[k];
    EXPECT_NEAR(equilibrium_average(t, v, {25.0, 30.0}), 27.5, 1e-9);
    EXPECT_THROW(equilibrium_average(t, v, {31.0, 32.0}), std::out_of_range);
    const std::vector<double> t2{0.0, 1.0, 2.0}, v2{1.0, 2.0, 3.0};
    EXPECT_THROW(equilibrium_average(t2, v2, {1.2, 1.8}), std::out_of_range);
    EXPECT_THROW(equilibrium_average(t2, std::vector<double>{1.0}, {0.0, 1.0}), dimension_mismatch);
}

TEST(ClassicalEquilibrium, DefaultWindowSteps)
{
    // Steps k with k pi/2 in [83, 100] are 53..63.
    const SpinConfig c = SpinConfig::parse("0000101101100000");
    const auto traj = classical_trajectory(c, 63);
    double rho = 0.0;
    for (int k = 53; k <= 63; ++k)
        rho += density(DiscretizedProfile::from_config(traj.steps[static_cast<std::size_t>(k)])) / 11.0;
    EXPECT_NEAR(classical_equilibrium(c, default_classical_window).density, rho, 1e-12);
}

TEST(ClassicalEquilibrium, ExhaustiveMatchesDirectAverage)
{
    const int L = 8;
    const TimeWindow w{10.0, 20.0};
    const auto by_count = classical_equilibrium_exhaustive(L, w);
    std::vector<double> sum(L + 1, 0.0), n(L + 1, 0.0);
    for (BasisIndex x = 0; x < hilbert_dimension(L); ++x) {
        const SpinConfig c(L, x);
        sum[static_cast<std::size_t>(c.alive_count())] += classical_equilibrium(c, w).density;
        n[static_cast<std::size_t>(c.alive_count())] += 1;
    }
    for (int k = 0; k <= L; ++k)
        EXPECT_NEAR(by_count[static_cast<std::size_t>(k)].density, sum[static_cast<std::size_t>(k)] / n[static_cast<std::size_t>(k)], 1e-12);
}

TEST(Ensemble, DeterministicAcrossRerunsAndWorkers)
{
    EnsembleOptions o;
    o.L = 16;
    o.rho0 = 0.25;
    o.samples = 32;
    o.seed = 2024;
    o.quantum.window = {0.5, 1.0};
    const auto a = run_ensemble(o);
    o.workers = 3;
    const auto b = run_ensemble(o);
    ASSERT_EQ(a.quantum.size(), 32u);
    ASSERT_EQ(a.classical.size(), 32u);
    for (std::size_t s = 0; s < 32; ++s) {
        EXPECT_EQ(a.initial_states[s], b.initial_states[s]);
        EXPECT_EQ(a.initial_states[s].alive_count(), 4);
        EXPECT_EQ(a.quantum[s].density, b.quantum[s].density);
        EXPECT_EQ(a.quantum[s].improved_diversity, b.quantum[s].improved_diversity);
        EXPECT_EQ(a.classical[s].diversity, b.classical[s].diversity);
    }
    EXPECT_EQ(a.quantum_mean.density, b.quantum_mean.density);
    EXPECT_EQ(a.quantum_stderr.density, b.quantum_stderr.density);
}

TEST(MeasureSet, Parse)
{
    const auto m = MeasureSet::parse("populations, mi ,concurrence");
    EXPECT_TRUE(m.populations);
    EXPECT_TRUE(m.mi);
    EXPECT_TRUE(m.concurrence);
    EXPECT_FALSE(m.bond);
    EXPECT_EQ(m.to_string(), "populations,mi,concurrence");
    EXPECT_TRUE(MeasureSet::parse("all").network);
    EXPECT_THROW(MeasureSet::parse("populations,entropy"), config_error);
}

TEST(RunConfig, KeyValueTextWithComments)
{
    RunConfig cfg;
    std::istringstream in("# blinker\n"
                          "kind = evolve\n"
                          "initial = 00001010000   # L = 11\n"
                          "\n"
                          "tmax=12.5\n"
                          "dt = 0.005\n"
                          "window = 1, 2\n"
                          "density = 0.25,0.5\n"
                          "seed = 9\n");
    apply_config_text(cfg, in);
    EXPECT_EQ(cfg.kind, ExperimentKind::evolve);
    EXPECT_EQ(cfg.initial, "00001010000");
    EXPECT_EQ(cfg.t_max, 12.5);
    EXPECT_EQ(cfg.dt, 0.005);
    EXPECT_EQ(cfg.window.begin, 1.0);
    EXPECT_EQ(cfg.window.end, 2.0);
    EXPECT_EQ(cfg.densities, (std::vector<double>{0.25, 0.5}));
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.lattice_size(), 11);
    EXPECT_NO_THROW(cfg.validate());

    std::istringstream bad_key("colour = red\n");
    EXPECT_THROW(apply_config_text(cfg, bad_key), config_error);
    std::istringstream no_eq("tmax 3\n");
    EXPECT_THROW(apply_config_text(cfg, no_eq), config_error);
    std::istringstream bad_value("dt = fast\n");
    EXPECT_THROW(apply_config_text(cfg, bad_value), config_error);
}

TEST(RunConfig, ValidationErrors)
{
    RunConfig cfg;
    cfg.initial = "00001010000";
    cfg.dt = 0.0;
    EXPECT_THROW(cfg.validate(), config_error);
    cfg.dt = 0.01;
    cfg.length = 12;
    EXPECT_THROW(cfg.validate(), config_error);  // bitstring length mismatch
    cfg.length = 0;
    cfg.initial = "0000101000a";
    EXPECT_THROW(cfg.validate(), config_error);
    cfg.initial = std::string(25, '0');
    EXPECT_THROW(cfg.validate(), config_error);  // L > 24

    RunConfig ens;
    ens.kind = ExperimentKind::ensemble;
    ens.length = 16;
    ens.densities = {0.25};
    EXPECT_THROW(ens.validate(), config_error);  // no seed
    ens.seed = 1;
    EXPECT_NO_THROW(ens.validate());
    ens.densities = {1.2};
    EXPECT_THROW(ens.validate(), config_error);
    ens.densities = {0.5};
    ens.length = 25;
    EXPECT_THROW(ens.validate(), config_error);
    ens.length = 16;
    ens.t_max = 20.0;
    EXPECT_THROW(ens.validate(), config_error);  // window outside [0, tmax]
}

TEST(Run, EvolveWritesPopulationsWithSiteColumns)
{
    TempDir dir;
    RunConfig cfg;
    cfg.initial = "00001010000";
    cfg.t_max = 30.0;
    cfg.sample_every = 100;
    cfg.out = dir.path().string();
    const auto s = run(cfg);
    const auto pop = lines(slurp(dir / "populations.csv"));
    ASSERT_EQ(pop.size(), 32u);
    const auto header = split(pop[0]);
    ASSERT_EQ(header.size(), 12u);
    EXPECT_EQ(header[0], "time");
    EXPECT_EQ(header[1], "n_1");
    EXPECT_EQ(header[11], "n_11");
    EXPECT_EQ(pop[1], "0,0,0,0,0,1,0,1,0,0,0,0");
    EXPECT_TRUE(fs::exists(dir / "diversity.csv"));
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_LE(s.summary["max_norm_drift"].get<double>(), 1e-6);
}

TEST(Run, EvolveAllMeasures)
{
    TempDir dir;
    RunConfig cfg;
    cfg.initial = "000101000";
    cfg.t_max = 1.0;
    cfg.sample_every = 50;
    cfg.measures = MeasureSet::parse("all");
    cfg.distances = {1, 2};
    cfg.bonds = {4, 5};
    cfg.out = dir.path().string();
    run(cfg);
    EXPECT_EQ(split(lines(slurp(dir / "entropies.csv"))[0]).size(), 10u);
    EXPECT_EQ(lines(slurp(dir / "bond_entropy.csv"))[0], "time,bond_4,bond_5");
    EXPECT_EQ(lines(slurp(dir / "concurrence.csv"))[0], "time,d_1,d_2");
    EXPECT_EQ(lines(slurp(dir / "network.csv"))[0], "time,density,disparity,clustering");
    const auto mi = lines(slurp(dir / "mutual_information.csv"));
    EXPECT_EQ(mi[0], "time,i,j,value");
    EXPECT_EQ(mi.size(), 1u + 3u * 36u);
    EXPECT_EQ(split(lines(slurp(dir / "clusters.csv"))[0]).size(), 10u);

    cfg.bonds = {9};
    EXPECT_THROW(run(cfg), config_error);
}

TEST(Run, ClassicalConfigTableReproducesLightCone)
{
    TempDir dir;
    RunConfig cfg;
    cfg.kind = ExperimentKind::classical;
    cfg.initial = "00001010000";
    cfg.steps = 20;
    cfg.out = dir.path().string();
    run(cfg);
    const auto rows = lines(slurp(dir / "configs.csv"));
    ASSERT_EQ(rows.size(), 22u);
    EXPECT_EQ(rows[0], "step,time,config");
    const auto traj = classical_trajectory(SpinConfig::parse("00001010000"), 20);
    for (std::size_t k = 0; k <= 20; ++k) {
        const auto f = split(rows[k + 1]);
        EXPECT_EQ(f[0], std::to_string(k));
        EXPECT_NEAR(std::stod(f[1]), k * classical_step_time, 1e-12);
        EXPECT_EQ(f[2], traj.steps[k].to_string());
    }
    EXPECT_EQ(lines(slurp(dir / "populations.csv")).size(), 22u);
    EXPECT_EQ(split(lines(slurp(dir / "populations.csv"))[0])[1], "time");
}

TEST(Run, StrobeMatchesClassicalOutput)
{
    TempDir a, b;
    RunConfig cfg;
    cfg.kind = ExperimentKind::classical;
    cfg.initial = "0011010110100";
    cfg.steps = 15;
    cfg.out = a.path().string();
    run(cfg);
    cfg.kind = ExperimentKind::strobe;
    cfg.out = b.path().string();
    run(cfg);
    EXPECT_EQ(slurp(a / "configs.csv"), slurp(b / "configs.csv"));
    EXPECT_EQ(slurp(a / "diversity.csv"), slurp(b / "diversity.csv"));
}

TEST(Run, EnsembleByteIdenticalAcrossWorkers)
{
    TempDir a, b;
    RunConfig cfg;
    cfg.kind = ExperimentKind::ensemble;
    cfg.length = 10;
    cfg.densities = {0.3, 0.6};
    cfg.samples = 5;
    cfg.seed = 42;
    cfg.t_max = 2.0;
    cfg.window = {1.0, 2.0};
    cfg.classical_window = {5.0, 20.0};
    cfg.out = a.path().string();
    run(cfg);
    cfg.workers = 4;
    cfg.out = b.path().string();
    run(cfg);
    for (const char* f : {"ensemble.csv", "ensemble_samples.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(lines(slurp(a / "ensemble.csv")).size(), 3u);
    EXPECT_EQ(lines(slurp(a / "ensemble_samples.csv")).size(), 11u);
}

TEST(Run, ManifestListsEveryFileWithHash)
{
    TempDir dir;
    RunConfig cfg;
    cfg.kind = ExperimentKind::classical;
    cfg.initial = "00001010000";
    cfg.steps = 4;
    cfg.out = dir.path().string();
    const auto s = run(cfg);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["version"], version_string);
    EXPECT_EQ(manifest["config"]["initial"], "00001010000");
    EXPECT_EQ(manifest["config"]["steps"], 4);
    EXPECT_TRUE(manifest.contains("wall_time_seconds"));
    std::set<std::string> listed;
    for (const auto& f : manifest["files"]) {
        const std::string name = f["name"];
        listed.insert(name);
        const std::string body = slurp(dir / name);
        EXPECT_EQ(f["sha256"], sha256_hex(body));
        EXPECT_EQ(f["bytes"], body.size());
    }
    for (const auto& entry : fs::directory_iterator(dir.path()))
        if (entry.path().filename() != "manifest.json")
            EXPECT_TRUE(listed.count(entry.path().filename().string())) << entry.path();
    EXPECT_EQ(listed.size(), s.files.size());
}

TEST(Run, CirculantFromPeriodAndFromInitial)
{
    TempDir dir;
    RunConfig cfg;
    cfg.kind = ExperimentKind::circulant;
    cfg.period = 5;
    cfg.t_max = 2.0;
    cfg.out = dir.path().string();
    const auto s = run(cfg);
    EXPECT_FALSE(s.summary["commensurate"].get<bool>());
    EXPECT_EQ(lines(slurp(dir / "eigenvalues.csv")).size(), 6u);
    EXPECT_EQ(split(lines(slurp(dir / "ring_evolution.csv"))[0]).size(), 6u);

    TempDir dir2;
    cfg.period = 0;
    cfg.initial = "0000000";
    cfg.out = dir2.path().string();
    EXPECT_THROW(run(cfg), config_error);  // fixed point, no ring
}

TEST(Run, Sha256KnownVector)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, UnwritableOutputDirectory)
{
    TempDir dir;
    fs::create_directories(dir.path());
    std::ofstream(dir / "blocker") << "x";
    RunConfig cfg;
    cfg.kind = ExperimentKind::classical;
    cfg.initial = "00001010000";
    cfg.out = (dir / "blocker" / "sub").string();
    EXPECT_THROW(run(cfg), std::runtime_error);
}

TEST(Cli, EvolveSucceedsAndPrintsRecord)
{
    TempDir dir;
    const auto e = run_cli("evolve --initial 00001010000 --tmax 1 --sample-every 10 --out " + dir.path().string());
    EXPECT_EQ(e.status, 0) << e.out;
    const auto rec = nlohmann::json::parse(e.out);
    EXPECT_EQ(rec["status"], "ok");
    EXPECT_TRUE(fs::exists(dir / "populations.csv"));
}

TEST(Cli, ConfigFileWithFlagOverride)
{
    TempDir dir;
    fs::create_directories(dir.path());
    std::ofstream(dir / "run.cfg") << "initial = 00001010000\nsteps = 3\nout = " << (dir / "a").string() << "\n";
    const auto e = run_cli("classical --config " + (dir / "run.cfg").string() + " --steps 5");
    EXPECT_EQ(e.status, 0) << e.out;
    EXPECT_EQ(lines(slurp(dir / "a" / "configs.csv")).size(), 7u);
}

TEST(Cli, ErrorsAreMachineReadable)
{
    for (const std::string args : {"evolve --initial 0000101 --length 11", "evolve --initial 0000000000000000000000000",
                                   "ensemble --length 16 --density 0.25", "classical --initial 00001010000 --out /dev/null/x",
                                   "evolve --initial 00001010000 --measures nonsense"}) {
        const auto err = run_cli(args);
        EXPECT_NE(err.status, 0) << args;
        const auto rec = nlohmann::json::parse(err.out);
        EXPECT_TRUE(rec.contains("error")) << args;
        EXPECT_TRUE(rec.contains("message")) << args;
    }
    EXPECT_NE(run_cli("bogus").status, 0);
}
