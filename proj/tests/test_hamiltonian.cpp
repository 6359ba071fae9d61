#include "qgol/hamiltonian.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace qgol;

TEST(AliveNeighbors, Examples)
{
    EXPECT_EQ(alive_neighbors(SpinConfig::parse("01010"), 3), 2);
    EXPECT_EQ(alive_neighbors(SpinConfig::parse("11011"), 3), 4);
    EXPECT_EQ(alive_neighbors(SpinConfig::all_dead(5), 3), 0);
}

TEST(AliveNeighbors, ExcludesSiteItself)
{
    EXPECT_EQ(alive_neighbors(SpinConfig::parse("00100"), 3), 0);
    EXPECT_EQ(alive_neighbors(SpinConfig::parse("11111"), 3), 4);
}

TEST(AliveNeighbors, BulkRangeOnly)
{
    const auto c = SpinConfig::all_dead(8);
    EXPECT_THROW(alive_neighbors(c, 2), std::out_of_range);
    EXPECT_THROW(alive_neighbors(c, 7), std::out_of_range);
    EXPECT_NO_THROW(alive_neighbors(c, 3));
    EXPECT_NO_THROW(alive_neighbors(c, 6));
}

TEST(AliveNeighbors, MatchesStringCount)
{
    for (BasisIndex x = 0; x < 512; ++x) {
        const SpinConfig c(9, x);
        const std::string s = c.to_string();
        for (int i = 3; i <= 7; ++i) {
            int n = 0;
            for (int d : {-2, -1, 1, 2})
                n += s[i - 1 + d] == '1';
            ASSERT_EQ(alive_neighbors(c, i), n);
        }
    }
}

TEST(BuildHamiltonian, Examples)
{
    const auto h = build_hamiltonian(5);
    EXPECT_EQ(h.row(fock_index(SpinConfig::parse("01010"))),
              std::vector<BasisIndex>{fock_index(SpinConfig::parse("01110"))});
    EXPECT_TRUE(h.row(fock_index(SpinConfig::parse("11011"))).empty());
    for (int L = 5; L <= 12; ++L)
        EXPECT_TRUE(build_hamiltonian(L).row(0).empty());
}

TEST(BuildHamiltonian, RejectsSmallLattice)
{
    EXPECT_THROW(build_hamiltonian(4), std::invalid_argument);
}

TEST(BuildHamiltonian, EqualsProjectorFormulaDense)
{
    for (int L = 5; L <= 7; ++L) {
        const Eigen::MatrixXd ref = oracle::dense_hamiltonian_from_projectors(L);
        const Eigen::MatrixXd got = to_dense(build_hamiltonian(L));
        ASSERT_EQ(ref.rows(), got.rows());
        EXPECT_EQ((ref - got).cwiseAbs().maxCoeff(), 0.0) << "L = " << L;
    }
}

TEST(BuildHamiltonian, SymmetricZeroDiagonalSingleBulkFlip)
{
    for (int L = 5; L <= 8; ++L) {
        const auto h = build_hamiltonian(L);
        const auto list = h.couplings();
        const std::set<Coupling> set(list.begin(), list.end());
        EXPECT_EQ(set.size(), list.size());
        for (const Coupling& c : list) {
            EXPECT_TRUE(set.count({c.col, c.row})) << c.row << "," << c.col;
            EXPECT_NE(c.row, c.col);
            const BasisIndex diff = c.row ^ c.col;
            ASSERT_EQ(std::popcount(diff), 1);
            const int site = std::countr_zero(diff) + 1;
            EXPECT_GE(site, 3);
            EXPECT_LE(site, L - 2);
        }
    }
}

TEST(BuildHamiltonian, ReflectionSymmetry)
{
    for (int L = 5; L <= 8; ++L) {
        const Eigen::MatrixXd h = to_dense(build_hamiltonian(L));
        const auto dim = h.rows();
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index x = 0; x < dim; ++x) {
            std::string s = oracle::bits_of(static_cast<std::size_t>(x), L);
            std::reverse(s.begin(), s.end());
            r(static_cast<Eigen::Index>(oracle::index_of(s)), x) = 1.0;
        }
        EXPECT_EQ((r * h * r.transpose() - h).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(BuildHamiltonian, BoundarySitesFrozen)
{
    for (int L = 5; L <= 10; ++L)
        for (const Coupling& c : build_hamiltonian(L).couplings()) {
            const BasisIndex diff = c.row ^ c.col;
            for (int s : {1, 2, L - 1, L})
                ASSERT_EQ(diff & site_bit(s), 0u);
        }
}

TEST(BuildHamiltonian, RowDegreeBound)
{
    for (int L = 5; L <= 12; ++L)
        EXPECT_LE(build_hamiltonian(L).max_row_degree(), L - 4);
}

TEST(ApplyHamiltonian, Examples)
{
    const auto h5 = build_hamiltonian(5);
    const auto y0 = apply_hamiltonian(h5, make_fock_state(SpinConfig::all_dead(5)));
    for (const cplx& v : y0)
        EXPECT_EQ(v, cplx(0.0));

    const auto y1 = apply_hamiltonian(h5, make_fock_state(SpinConfig::parse("01010")));
    for (BasisIndex k = 0; k < y1.size(); ++k)
        EXPECT_EQ(y1[k], cplx(k == fock_index(SpinConfig::parse("01110")) ? 1.0 : 0.0));

    const auto h11 = build_hamiltonian(11);
    const auto y2 = apply_hamiltonian(h11, make_fock_state(SpinConfig::parse("00001010000")));
    const BasisIndex target = fock_index(SpinConfig::parse("00001110000"));
    for (BasisIndex k = 0; k < y2.size(); ++k)
        ASSERT_EQ(y2[k], cplx(k == target ? 1.0 : 0.0));
}

TEST(ApplyHamiltonian, MatrixFreeAgreesWithCouplingList)
{
    std::mt19937_64 rng(3);
    for (int L : {5, 8, 11}) {
        const auto h = build_hamiltonian(L);
        const Eigen::VectorXcd x = oracle::random_state(L, rng);
        const std::span<const cplx> xs(x.data(), static_cast<std::size_t>(x.size()));
        Amplitudes a(xs.size()), b(xs.size());
        apply_hamiltonian(h, xs, a);
        apply_hamiltonian_matrix_free(L, xs, b);
        for (std::size_t k = 0; k < a.size(); ++k)
            ASSERT_LE(std::abs(a[k] - b[k]), 1e-14);
        if (L <= 8) {
            const Eigen::VectorXcd ref = oracle::dense_hamiltonian_from_projectors(L).cast<cplx>() * x;
            for (std::size_t k = 0; k < a.size(); ++k)
                ASSERT_LE(std::abs(a[k] - ref(static_cast<Eigen::Index>(k))), 1e-12);
        }
    }
}

TEST(ApplyHamiltonian, DimensionMismatch)
{
    const auto h = build_hamiltonian(5);
    Amplitudes x(16), y(32);
    EXPECT_THROW(apply_hamiltonian(h, x, y), dimension_mismatch);
}

TEST(Expectation, RealAndZeroOnFockStates)
{
    const auto h = build_hamiltonian(8);
    for (BasisIndex x = 0; x < 256; ++x)
        EXPECT_EQ(expectation(h, make_fock_state(SpinConfig(8, x)).amplitudes()), 0.0);
}

TEST(CouplingsCsv, HeaderAndRows)
{
    const auto h = build_hamiltonian(5);
    std::ostringstream os;
    write_couplings_csv(h, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "row,col");
    std::size_t rows = 0;
    while (std::getline(is, line))
        ++rows;
    EXPECT_EQ(rows, h.coupling_count());
}
