#include <hdiv/diagnostics.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace hdiv;

namespace {

Matrix random_matrix(Index n, Index p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) m(i, j) = normal(rng);
    return m;
}

} // namespace

TEST(PartialOrthogonality, MatchesElementwiseLoops)
{
    const Matrix d = random_matrix(25, 7, 1);
    Vector beta = Vector::Zero(7);
    beta[1] = 2.0;
    beta[4] = -0.5;
    const IndexSet s{1, 4};
    const auto po = check_partial_orthogonality(d, beta, s);

    double c0 = 0.0;
    for (Index j = 0; j < 7; ++j) {
        if (j == 1 || j == 4) continue;
        for (Index k : s) {
            double acc = 0.0;
            for (Index i = 0; i < 25; ++i) acc += d(i, j) * d(i, k);
            c0 = std::max(c0, std::abs(acc / 5.0));
        }
    }
    double xi = 1e300;
    for (Index k : s) {
        double acc = 0.0;
        for (Index i = 0; i < 25; ++i) acc += (2.0 * d(i, 1) - 0.5 * d(i, 4)) * d(i, k);
        xi = std::min(xi, std::abs(acc / 25.0));
    }
    EXPECT_NEAR(po.c0_hat, c0, 1e-12);
    EXPECT_NEAR(po.xi_min, xi, 1e-12);
}

TEST(PartialOrthogonality, OrthogonalDesignHasZeroC0)
{
    Matrix d = Matrix::Zero(8, 4);
    for (Index j = 0; j < 4; ++j) d(2 * j, j) = d(2 * j + 1, j) = 2.0;
    Vector beta = Vector::Zero(4);
    beta[0] = 1.0;
    const auto po = check_partial_orthogonality(d, beta, IndexSet{0});
    EXPECT_EQ(po.c0_hat, 0.0);
    EXPECT_NEAR(po.xi_min, 1.0, 1e-15);
}

TEST(PartialOrthogonality, EmptySupportRejected)
{
    EXPECT_THROW(check_partial_orthogonality(Matrix::Identity(3, 3), Vector::Zero(3), IndexSet{}), Error);
}

TEST(ZeroConsistency, Examples)
{
    Vector init(5);
    init << 0.8, 0.0, -0.05, 0.3, 0.02;
    const auto zc = check_zero_consistency(init, IndexSet{0, 3}, 2.0);
    EXPECT_DOUBLE_EQ(zc.min_relevant_init, 0.3);
    EXPECT_DOUBLE_EQ(zc.max_irrelevant_init, 0.05);
    EXPECT_TRUE(zc.holds);
    EXPECT_FALSE(check_zero_consistency(init, IndexSet{0, 1}, 2.0).holds);
    EXPECT_FALSE(check_zero_consistency(init, IndexSet{0, 3}, 4.0).holds);
    EXPECT_TRUE(check_zero_consistency(init, IndexSet{0, 3}, 4.0, 0.05).holds);
}

TEST(ZeroConsistency, TruthUnavailable)
{
    try {
        check_zero_consistency(Vector::Ones(3), std::nullopt, 1.0);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Data);
        EXPECT_NE(std::string(e.what()).find("truth unavailable"), std::string::npos);
    }
}

TEST(GramEigenBounds, MatchJacobiOracle)
{
    const Matrix d = random_matrix(40, 6, 2);
    const IndexSet s{0, 2, 5};
    const auto eb = gram_eigen_bounds(d, s);
    const auto full = oracle::jacobi_eigenvalues(oracle::naive_multiply(d.transpose(), d) / 40.0);
    Matrix ds(40, 3);
    for (Index r = 0; r < 3; ++r) ds.col(r) = d.col(s[static_cast<std::size_t>(r)]);
    const auto sel = oracle::jacobi_eigenvalues(oracle::naive_multiply(ds.transpose(), ds) / 40.0);
    ASSERT_TRUE(eb.min_full && eb.max_full);
    EXPECT_NEAR(*eb.min_full, full.front(), 1e-10);
    EXPECT_NEAR(*eb.max_full, full.back(), 1e-10);
    EXPECT_NEAR(eb.min_sel, sel.front(), 1e-10);
    EXPECT_NEAR(eb.max_sel, sel.back(), 1e-10);
    EXPECT_FALSE(eb.full_skipped);
}

TEST(GramEigenBounds, RankDeficientFullGramClampedAtZero)
{
    const Matrix d = random_matrix(5, 9, 3);
    const auto eb = gram_eigen_bounds(d, IndexSet{1});
    EXPECT_EQ(*eb.min_full, 0.0);
    EXPECT_NEAR(eb.min_sel, d.col(1).squaredNorm() / 5.0, 1e-12);
    EXPECT_EQ(eb.min_sel, eb.max_sel);
}

TEST(GramEigenBounds, FullGramSkippedAboveCap)
{
    const Matrix d = random_matrix(10, 6, 4);
    const auto eb = gram_eigen_bounds(d, IndexSet{0, 1}, 5);
    EXPECT_TRUE(eb.full_skipped);
    EXPECT_FALSE(eb.min_full.has_value());
    EXPECT_GT(eb.min_sel, 0.0);
}

TEST(Diagnose, WithAndWithoutTruth)
{
    const Matrix d = random_matrix(30, 5, 5);
    Vector beta = Vector::Zero(5);
    beta[0] = 1.5;
    beta[2] = -1.0;
    Vector init = beta;
    init[3] = 0.01;

    const DiagnosticsReport with = diagnose(d, beta, IndexSet{0, 2}, d, IndexSet{0, 2, 3}, init, IndexSet{0, 2}, false);
    EXPECT_FALSE(with.plug_in);
    EXPECT_EQ(with.zero_consistent, std::optional<bool>(true));
    EXPECT_DOUBLE_EQ(*with.max_irrelevant_init, 0.01);
    EXPECT_DOUBLE_EQ(with.c0_hat, check_partial_orthogonality(d, beta, IndexSet{0, 2}).c0_hat);

    const DiagnosticsReport plug = diagnose(d, beta, IndexSet{0, 2}, d, IndexSet{0, 2}, Vector(), std::nullopt, true);
    EXPECT_TRUE(plug.plug_in);
    EXPECT_FALSE(plug.zero_consistent.has_value());
    const std::string text = plug.to_text();
    EXPECT_NE(text.find("plug_in = true"), std::string::npos);
    EXPECT_NE(text.find("zero_consistent = na"), std::string::npos);
    EXPECT_NE(text.find("eig_min_sel = "), std::string::npos);
}

TEST(Diagnose, SkippedFullGramInText)
{
    DiagnosticsReport r;
    r.full_gram_skipped = true;
    const std::string text = r.to_text();
    EXPECT_NE(text.find("eig_min_full = skipped"), std::string::npos);
    EXPECT_NE(text.find("eig_max_full = skipped"), std::string::npos);
}
