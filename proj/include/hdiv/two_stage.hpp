#pragma once
#include <hdiv/dgp.hpp>
#include <hdiv/solvers.hpp>
#include <hdiv/tuning.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>

namespace hdiv {

/// Penalty and tuning for one stage. fixed_lambda bypasses cross-validation.
struct StageChoice
{
    PenaltyKind kind = PenaltyKind::Bridge;
    double gamma = 0.5;
    std::optional<double> fixed_lambda;
    SolverOptions options;

    bool operator==(const StageChoice& o) const
    {
        return kind == o.kind && (kind != PenaltyKind::Bridge || gamma == o.gamma) && fixed_lambda == o.fixed_lambda &&
               options.tol == o.options.tol && options.max_sweeps == o.options.max_sweeps &&
               options.max_outer == o.options.max_outer;
    }
};

/// A full two-stage estimator: what runs in each stage.
struct MethodSpec
{
    StageChoice stage1;
    StageChoice stage2;

    static MethodSpec ols()
    {
        return {StageChoice{PenaltyKind::Ols, 0.5, {}, {}}, StageChoice{PenaltyKind::Ols, 0.5, {}, {}}};
    }
    static MethodSpec lasso()
    {
        return {StageChoice{PenaltyKind::Lasso, 0.5, {}, {}}, StageChoice{PenaltyKind::Lasso, 0.5, {}, {}}};
    }
    static MethodSpec bridge(double gamma2, double gamma1 = 0.1)
    {
        return {StageChoice{PenaltyKind::Bridge, gamma1, {}, {}}, StageChoice{PenaltyKind::Bridge, gamma2, {}, {}}};
    }
    static MethodSpec adaptive_lasso(double gamma1 = 0.1)
    {
        return {StageChoice{PenaltyKind::Bridge, gamma1, {}, {}},
                StageChoice{PenaltyKind::AdaptiveLasso, 0.5, {}, {}}};
    }

    /// Table label, e.g. "BRIDGE(0.2)".
    std::string label() const
    {
        std::string out = to_string(stage2.kind);
        if (stage2.kind == PenaltyKind::Bridge) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "(%g)", stage2.gamma);
            out += buf;
        }
        return out;
    }
};

struct FirstStageFit
{
    Matrix alpha_hat;          // p_z x p_x
    Vector lambdas;            // per equation; NaN for OLS
    int nonconverged = 0;      // equations whose final fit hit an iteration cap
    int cv_skipped_fits = 0;
};

/**
 * Regresses each column of X on Z separately. Penalized equations get their
 * own cross-validated lambda; fold Gram matrices of Z are shared.
 */
inline FirstStageFit fit_first_stage(const Matrix& Z, const Matrix& X, const StageChoice& choice, const CvSpec& cv)
{
    if (Z.rows() != X.rows()) throw Error(ErrorKind::Data, "Z and X row counts differ");
    FirstStageFit out;
    const Index p_x = X.cols();
    out.alpha_hat = Matrix::Zero(Z.cols(), p_x);
    out.lambdas = Vector::Constant(p_x, std::numeric_limits<double>::quiet_NaN());

    if (choice.kind == PenaltyKind::Ols) {
        out.alpha_hat = Eigen::CompleteOrthogonalDecomposition<Matrix>(Z).solve(X);
        return out;
    }
    if (choice.kind == PenaltyKind::AdaptiveLasso) {
        throw Error(ErrorKind::Config, "adaptive LASSO is a second-stage estimator only");
    }

    const SolverDescriptor solver{choice.kind, choice.gamma, Vector(), choice.options};
    std::optional<CvWorkspace> workspace;
    GramSystem fixed_sys;
    if (choice.fixed_lambda) {
        fixed_sys = GramSystem::from_data(Z, Vector::Zero(Z.rows()));
    } else {
        workspace.emplace(Z, cv);
    }

    for (Index j = 0; j < p_x; ++j) {
        const Vector xj = X.col(j);
        double lambda = 0.0;
        GramSystem sys;
        if (choice.fixed_lambda) {
            lambda = *choice.fixed_lambda;
            sys = GramSystem{fixed_sys.gram, Z.transpose() * xj, xj.squaredNorm()};
        } else {
            const CvResult res = workspace->select(xj, solver);
            lambda = res.lambda;
            out.cv_skipped_fits += res.skipped_fits;
            sys = workspace->full_system(xj);
        }
        FitResult fit = fit_at(sys, lambda, solver);
        if (!fit.converged) ++out.nonconverged;
        out.alpha_hat.col(j) = fit.beta;
        out.lambdas[j] = lambda;
    }
    return out;
}

inline Matrix predict_conditional_means(const Matrix& Z, const Matrix& alpha_hat)
{
    if (Z.cols() != alpha_hat.rows()) throw Error(ErrorKind::Data, "Z and alpha_hat are not conformable");
    return Z * alpha_hat;
}

struct SecondStageFit
{
    FitResult fit;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    std::optional<CvResult> cv;
    Vector initial_beta; // adaptive LASSO initializer
};

/**
 * Penalized regression of Y on d_hat. For adaptive LASSO the weights come
 * from the cross-validated LASSO fit on the same data.
 */
inline SecondStageFit fit_second_stage(const Matrix& d_hat, const Vector& Y, const StageChoice& choice,
                                       const CvSpec& cv)
{
    SecondStageFit out;
    if (choice.kind == PenaltyKind::Ols) {
        out.fit = ols_fit(d_hat, Y);
        return out;
    }

    std::optional<CvWorkspace> workspace;
    if (!choice.fixed_lambda) workspace.emplace(d_hat, cv);
    const GramSystem sys = workspace ? workspace->full_system(Y) : GramSystem::from_data(d_hat, Y);

    SolverDescriptor solver{choice.kind, choice.gamma, Vector(), choice.options};
    if (choice.kind == PenaltyKind::AdaptiveLasso) {
        const SolverDescriptor lasso{PenaltyKind::Lasso, 0.5, Vector(), choice.options};
        const double init_lambda = workspace ? workspace->select(Y, lasso).lambda : *choice.fixed_lambda;
        out.initial_beta = fit_at(sys, init_lambda, lasso).beta;
        solver.weights = adaptive_weights(out.initial_beta);
    }

    if (workspace) {
        out.cv = workspace->select(Y, solver);
        out.lambda = out.cv->lambda;
    } else {
        out.lambda = *choice.fixed_lambda;
    }
    if (choice.kind == PenaltyKind::Bridge && out.lambda == 0.0) {
        out.fit = bridge_fit(d_hat, Y, 0.0, choice.gamma, choice.options);
    } else {
        out.fit = fit_at(sys, out.lambda, solver);
    }
    return out;
}

/// sigma_eps^2 = RSS / (n - support_size).
inline double estimate_sigma_eps(const Vector& Y, const Matrix& d_hat, const Vector& beta_hat, Index support_size)
{
    const Index n = Y.size();
    if (support_size >= n) {
        throw Error(ErrorKind::Numeric, "degenerate degrees of freedom: support size " + std::to_string(support_size) +
                                            " >= n = " + std::to_string(n));
    }
    const double rss = (Y - d_hat * beta_hat).squaredNorm();
    return std::sqrt(rss / static_cast<double>(n - support_size));
}

/**
 * SE_j = sigma * sqrt([Sigma_1^{-1}]_jj / n) with Sigma_1 = D_1'D_1 / n, D_1
 * the estimated conditional means restricted to the selected support.
 */
inline Vector standard_errors(const Matrix& d_selected, double sigma_eps, Index n, double max_condition = 1e12)
{
    const Index k = d_selected.cols();
    if (k == 0) return Vector();
    const Matrix gram = d_selected.transpose() * d_selected / static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > max_condition) {
        throw Error(ErrorKind::Numeric, "singular selected Gram matrix");
    }
    const Matrix& V = eig.eigenvectors();
    const Vector inv_diag = (V.array().square().matrix() * ev.cwiseInverse());
    return (sigma_eps * (inv_diag / static_cast<double>(n)).cwiseSqrt());
}

struct TwoStageFit
{
    Matrix alpha_hat;
    Matrix d_hat;
    Vector beta_hat;
    IndexSet support_beta;
    double sigma_eps_hat = std::numeric_limits<double>::quiet_NaN();
    Vector std_errors;   // aligned with support_beta; empty when undefined
    Vector lambda_stage1;
    double lambda_stage2 = std::numeric_limits<double>::quiet_NaN();
    std::optional<CvResult> stage2_cv;
    Vector initial_beta;
    std::vector<std::string> report; // per-stage diagnostics, empty on a clean run

    /// Standard error of coefficient j, NaN when j is unselected or SEs are undefined.
    double std_error_of(Index j) const
    {
        for (std::size_t r = 0; r < support_beta.size(); ++r) {
            if (support_beta[r] == j && static_cast<Index>(r) < std_errors.size()) return std_errors[static_cast<Index>(r)];
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
};

/**
 * First stage, conditional means, second stage, error scale and standard
 * errors. A precomputed first stage for the same data and stage-1 choice may
 * be passed in to share it across methods.
 */
inline TwoStageFit run_two_stage(const Dataset& data, const MethodSpec& method, const CvSpec& cv,
                                 const FirstStageFit* first_stage = nullptr)
{
    if (!data.standardized) throw Error(ErrorKind::Data, "run_two_stage expects standardized data");
    TwoStageFit out;

    FirstStageFit local;
    if (first_stage == nullptr) {
        local = fit_first_stage(data.Z, data.X, method.stage1, cv);
        first_stage = &local;
    }
    if (first_stage->nonconverged > 0) {
        out.report.push_back("stage1: " + std::to_string(first_stage->nonconverged) + " equation(s) not converged");
    }
    out.alpha_hat = first_stage->alpha_hat;
    out.lambda_stage1 = first_stage->lambdas;
    out.d_hat = predict_conditional_means(data.Z, out.alpha_hat);

    SecondStageFit second = fit_second_stage(out.d_hat, data.Y, method.stage2, cv);
    if (!second.fit.converged) out.report.push_back("stage2: solver not converged");
    out.beta_hat = second.fit.beta;
    out.support_beta = method.stage2.kind == PenaltyKind::Ols ? full_support(out.beta_hat.size())
                                                              : nonzero_support(out.beta_hat);
    out.lambda_stage2 = second.lambda;
    out.stage2_cv = std::move(second.cv);
    out.initial_beta = std::move(second.initial_beta);

    try {
        const auto k = static_cast<Index>(out.support_beta.size());
        out.sigma_eps_hat = estimate_sigma_eps(data.Y, out.d_hat, out.beta_hat, k);
        out.std_errors = standard_errors(out.d_hat(Eigen::all, out.support_beta), out.sigma_eps_hat, data.n());
    } catch (const Error& e) {
        out.report.push_back(std::string("standard errors: ") + e.what());
    }
    return out;
}

} // namespace hdiv
