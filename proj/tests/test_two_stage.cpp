#include <hdiv/two_stage.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace hdiv;

namespace {

SimConfig noiseless_config()
{
    SimConfig cfg;
    cfg.n = 80;
    cfg.p_x = 6;
    cfg.p_z = 8;
    cfg.k_x = 3;
    cfg.sigma_u = cfg.sigma_v = 1e-8;
    return cfg;
}

StageChoice fixed(PenaltyKind kind, double lambda, double gamma = 0.5)
{
    return StageChoice{kind, gamma, lambda, {}};
}

CvSpec seeded_cv(std::uint64_t seed)
{
    CvSpec cv;
    cv.seed = seed;
    return cv;
}

} // namespace

TEST(FirstStage, NoiselessUnpenalizedRecoversAlpha)
{
    const Dataset d = simulate(noiseless_config(), 1);
    for (PenaltyKind kind : {PenaltyKind::Bridge, PenaltyKind::Lasso}) {
        StageChoice choice = fixed(kind, 0.0, 0.1);
        choice.options.tol = 1e-12;
        choice.options.max_sweeps = 100000;
        const FirstStageFit fs = fit_first_stage(d.Z, d.X, choice, CvSpec{});
        EXPECT_LE((fs.alpha_hat - d.truth->alpha).cwiseAbs().maxCoeff(), 1e-6);
    }
    const FirstStageFit ols = fit_first_stage(d.Z, d.X, StageChoice{PenaltyKind::Ols, 0.5, {}, {}}, CvSpec{});
    EXPECT_LE((ols.alpha_hat - d.truth->alpha).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_TRUE(std::isnan(ols.lambdas[0]));
}

TEST(FirstStage, ZeroTargetGivesZeroColumn)
{
    SimConfig cfg = noiseless_config();
    cfg.sigma_u = cfg.sigma_v = std::sqrt(0.5);
    Dataset d = simulate(cfg, 2);
    d.X.col(4).setZero();
    const FirstStageFit fs = fit_first_stage(d.Z, d.X, MethodSpec::bridge(0.5).stage1, seeded_cv(2));
    EXPECT_TRUE(fs.alpha_hat.col(4).isZero(0.0));
    EXPECT_EQ(fs.lambdas[4], 0.0);
}

TEST(FirstStage, AdaptiveLassoRejected)
{
    const Dataset d = simulate(noiseless_config(), 3);
    EXPECT_THROW(fit_first_stage(d.Z, d.X, StageChoice{PenaltyKind::AdaptiveLasso, 0.5, {}, {}}, CvSpec{}), Error);
}

TEST(ConditionalMeans, Examples)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    Matrix z(12, 5);
    for (Index i = 0; i < 12; ++i)
        for (Index j = 0; j < 5; ++j) z(i, j) = normal(rng);
    EXPECT_TRUE(predict_conditional_means(z, Matrix::Zero(5, 3)).isZero(0.0));

    Matrix block = Matrix::Zero(5, 2);
    block(1, 0) = 1.0;
    block(3, 1) = 1.0;
    const Matrix d = predict_conditional_means(z, block);
    EXPECT_EQ(d.col(0), z.col(1));
    EXPECT_EQ(d.col(1), z.col(3));

    Matrix a(5, 4);
    for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 4; ++j) a(i, j) = normal(rng);
    EXPECT_LE((predict_conditional_means(z, a) - oracle::naive_multiply(z, a)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_THROW(predict_conditional_means(z, Matrix::Zero(4, 2)), Error);
}

TEST(SecondStage, NoiselessUnpenalizedRecoversBeta)
{
    const Dataset d = simulate(noiseless_config(), 5);
    const Matrix dhat = d.Z * d.truth->alpha;
    for (PenaltyKind kind : {PenaltyKind::Bridge, PenaltyKind::Lasso}) {
        StageChoice choice = fixed(kind, 0.0);
        choice.options.tol = 1e-12;
        choice.options.max_sweeps = 100000;
        const SecondStageFit fit = fit_second_stage(dhat, d.Y, choice, CvSpec{});
        EXPECT_LE((fit.fit.beta - d.truth->beta0).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(SecondStage, AdaptiveUsesLassoInitializer)
{
    SimConfig cfg;
    cfg.n = 100;
    const Dataset d = simulate(cfg, 6);
    const CvSpec cv = seeded_cv(6);
    const Matrix dhat = d.Z * d.truth->alpha;
    const SecondStageFit fit = fit_second_stage(dhat, d.Y, StageChoice{PenaltyKind::AdaptiveLasso, 0.5, {}, {}}, cv);
    ASSERT_EQ(fit.initial_beta.size(), cfg.p_x);
    // initializer is the CV-tuned LASSO on the same data
    const SecondStageFit lasso = fit_second_stage(dhat, d.Y, StageChoice{PenaltyKind::Lasso, 0.5, {}, {}}, cv);
    EXPECT_EQ(fit.initial_beta, lasso.fit.beta);
    for (Index j = 0; j < cfg.p_x; ++j) {
        if (fit.initial_beta[j] == 0.0) EXPECT_EQ(fit.fit.beta[j], 0.0);
    }
}

TEST(SigmaEps, Examples)
{
    const Matrix d = Matrix::Identity(2, 2);
    const Vector beta = Vector::Zero(2);
    EXPECT_EQ(estimate_sigma_eps(Vector::Zero(2), d, beta, 0), 0.0);
    Vector y(2);
    y << 1.0, -1.0;
    EXPECT_NEAR(estimate_sigma_eps(y, d, beta, 0), 1.0, 1e-15);
    try {
        estimate_sigma_eps(y, d, beta, 2);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate degrees of freedom"), std::string::npos);
    }
}

TEST(SigmaEps, MatchesPopulationVarianceAtLargeN)
{
    SimConfig cfg;
    cfg.n = 5000;
    const Dataset d = simulate(cfg, 7);
    const TwoStageFit fit = run_two_stage(d, MethodSpec::ols(), CvSpec{});

    // Var(v'beta + u) from the configuration, written out directly
    const Vector& b = d.truth->beta0;
    double var = cfg.sigma_u * cfg.sigma_u + cfg.sigma_v * cfg.sigma_v * b.squaredNorm();
    for (Index j = 0; j < cfg.k_x; ++j) {
        const double corr = j < (cfg.k_x + 1) / 2 ? cfg.sigma_uv_high : cfg.sigma_uv_low;
        var += 2.0 * b[j] * corr * cfg.sigma_u * cfg.sigma_v;
    }
    EXPECT_NEAR(fit.sigma_eps_hat * fit.sigma_eps_hat, var, 0.1 * var);
}

TEST(StandardErrors, IdentityGram)
{
    const Index n = 100;
    Matrix d = Matrix::Zero(n, 3);
    for (Index j = 0; j < 3; ++j)
        for (Index i = j; i < n; i += 3) d(i, j) = std::sqrt(3.0);
    const Vector se = standard_errors(d, 1.0, n);
    // (1/n) D'D: 34/100*3, 33/100*3, 33/100*3 on the diagonal; compare with the scalar formula
    for (Index j = 0; j < 3; ++j) EXPECT_NEAR(se[j], 1.0 / d.col(j).norm(), 1e-12);

    const Matrix exact = Matrix::Identity(n, 4) * std::sqrt(static_cast<double>(n));
    const Vector se2 = standard_errors(exact, 1.0, n);
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(se2[j], 0.1, 1e-12);
}

TEST(StandardErrors, SingleCoefficient)
{
    Matrix d(5, 1);
    d << 1, -2, 0.5, 3, 1;
    EXPECT_NEAR(standard_errors(d, 2.5, 5)[0], 2.5 / d.col(0).norm(), 1e-14);
}

TEST(StandardErrors, MatchesInverseGramOracle)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal;
    Matrix d(40, 4);
    for (Index i = 0; i < 40; ++i)
        for (Index j = 0; j < 4; ++j) d(i, j) = normal(rng) + (j == 1 ? 0.5 * d(i, 0) : 0.0);
    const Vector se = standard_errors(d, 1.7, 40);
    const Matrix inv = (d.transpose() * d / 40.0).inverse();
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(se[j], 1.7 * std::sqrt(inv(j, j) / 40.0), 1e-12);
}

TEST(StandardErrors, SingularGram)
{
    Matrix d(10, 2);
    d.col(0) = Vector::LinSpaced(10, 0.0, 1.0);
    d.col(1) = 2.0 * d.col(0);
    try {
        standard_errors(d, 1.0, 10);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("singular selected Gram matrix"), std::string::npos);
    }
}

TEST(Pipeline, NoiselessUnpenalizedRecoversTruth)
{
    const Dataset d = simulate(noiseless_config(), 9);
    MethodSpec m{fixed(PenaltyKind::Bridge, 0.0, 0.1), fixed(PenaltyKind::Bridge, 0.0)};
    const TwoStageFit fit = run_two_stage(d, m, CvSpec{});
    EXPECT_LE((fit.alpha_hat - d.truth->alpha).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LE((fit.beta_hat - d.truth->beta0).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Pipeline, DhatIsExactProduct)
{
    SimConfig cfg;
    cfg.n = 60;
    const Dataset d = simulate(cfg, 10);
    const TwoStageFit fit = run_two_stage(d, MethodSpec::bridge(0.5), seeded_cv(10));
    EXPECT_EQ(fit.d_hat, d.Z * fit.alpha_hat);
    EXPECT_EQ(fit.support_beta, nonzero_support(fit.beta_hat));
    EXPECT_EQ(static_cast<std::size_t>(fit.std_errors.size()), fit.support_beta.size());
    for (Index r = 0; r < fit.std_errors.size(); ++r) EXPECT_GT(fit.std_errors[r], 0.0);
    for (Index j = 0; j < cfg.p_x; ++j) {
        if (fit.beta_hat[j] == 0.0) EXPECT_TRUE(std::isnan(fit.std_error_of(j)));
    }
}

TEST(Pipeline, OlsSelectsEverything)
{
    SimConfig cfg;
    cfg.n = 60;
    const Dataset d = simulate(cfg, 11);
    const TwoStageFit fit = run_two_stage(d, MethodSpec::ols(), CvSpec{});
    EXPECT_EQ(fit.support_beta, full_support(cfg.p_x));
    EXPECT_EQ(fit.std_errors.size(), cfg.p_x);
}

TEST(Pipeline, RequiresStandardizedData)
{
    Dataset d = simulate(noiseless_config(), 12);
    d.standardized = false;
    EXPECT_THROW(run_two_stage(d, MethodSpec::ols(), CvSpec{}), Error);
}

TEST(Pipeline, OracleTwoStageLeastSquares)
{
    SimConfig cfg;
    cfg.n = 200;
    cfg.p_x = 8;
    cfg.p_z = 10;
    cfg.k_x = 3;
    const Dataset d = simulate(cfg, 13);
    const FirstStageFit fs = fit_first_stage(d.Z, d.X, StageChoice{PenaltyKind::Ols, 0.5, {}, {}}, CvSpec{});
    const Matrix dhat = predict_conditional_means(d.Z, fs.alpha_hat);
    const IndexSet& s = d.truth->support_beta;
    const SecondStageFit fit = fit_second_stage(dhat(Eigen::all, s), d.Y, fixed(PenaltyKind::Bridge, 0.0), CvSpec{});

    // textbook 2SLS on the true support: (X1' P X1)^{-1} X1' P Y with P = Z (Z'Z)^{-1} Z'
    const Matrix ztz_inv = (d.Z.transpose() * d.Z).inverse();
    const Matrix proj = oracle::naive_multiply(oracle::naive_multiply(d.Z, ztz_inv), d.Z.transpose());
    const Matrix x1 = d.X(Eigen::all, s);
    const Matrix lhs = oracle::naive_multiply(oracle::naive_multiply(x1.transpose(), proj), x1);
    const Matrix rhs = oracle::naive_multiply(oracle::naive_multiply(x1.transpose(), proj), d.Y);
    const Vector tsls = lhs.inverse() * rhs;
    EXPECT_LE((fit.fit.beta - tsls).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pipeline, SharedFirstStageGivesSameFit)
{
    SimConfig cfg;
    cfg.n = 60;
    const Dataset d = simulate(cfg, 14);
    const CvSpec cv = seeded_cv(14);
    const MethodSpec m = MethodSpec::bridge(0.2);
    const FirstStageFit fs = fit_first_stage(d.Z, d.X, m.stage1, cv);
    const TwoStageFit a = run_two_stage(d, m, cv, &fs);
    const TwoStageFit b = run_two_stage(d, m, cv);
    EXPECT_EQ(a.beta_hat, b.beta_hat);
    EXPECT_EQ(a.alpha_hat, b.alpha_hat);
}

TEST(MethodSpec, Labels)
{
    EXPECT_EQ(MethodSpec::ols().label(), "OLS");
    EXPECT_EQ(MethodSpec::lasso().label(), "LASSO");
    EXPECT_EQ(MethodSpec::bridge(0.2).label(), "BRIDGE(0.2)");
    EXPECT_EQ(MethodSpec::adaptive_lasso().label(), "ADALASSO");
    EXPECT_EQ(MethodSpec::adaptive_lasso().stage1.kind, PenaltyKind::Bridge);
    EXPECT_EQ(MethodSpec::bridge(0.5).stage1.gamma, 0.1);
}
