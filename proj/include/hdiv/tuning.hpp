#pragma once
#include <hdiv/solvers.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

namespace hdiv {

struct CvSpec
{
    int n_folds = 5;
    int grid_size = 50;
    double grid_min_ratio = 1e-3;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (n_folds < 2) throw Error(ErrorKind::Config, "n_folds must be >= 2");
        if (grid_size < 1) throw Error(ErrorKind::Config, "grid_size must be >= 1");
        if (!(grid_min_ratio > 0.0 && grid_min_ratio < 1.0)) {
            throw Error(ErrorKind::Config, "grid_min_ratio must lie in (0,1)");
        }
    }
};

struct Fold
{
    IndexSet train;
    IndexSet test;
};

/// Seeded random partition of 0..n-1 into n_folds test sets whose sizes differ by at most one.
inline std::vector<Fold> kfold_split(Index n, const CvSpec& spec)
{
    spec.validate();
    if (n < spec.n_folds) {
        throw Error(ErrorKind::Data, "too few observations: n = " + std::to_string(n) + " < " +
                                         std::to_string(spec.n_folds) + " folds");
    }
    IndexSet perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    const auto k = static_cast<std::size_t>(spec.n_folds);
    std::vector<int> assignment(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i) assignment[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % k);

    std::vector<Fold> folds(k);
    for (Index i = 0; i < n; ++i) {
        const auto f = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
        for (std::size_t g = 0; g < k; ++g) {
            (g == f ? folds[g].test : folds[g].train).push_back(i);
        }
    }
    return folds;
}

/// Largest lambda of interest: max_j |X_j'y| / w_j (w = 1 when empty). Zero-weight columns are skipped.
inline double lambda_max(const Vector& xty, const Vector& weights = Vector())
{
    double out = 0.0;
    for (Index j = 0; j < xty.size(); ++j) {
        const double w = weights.size() == 0 ? 1.0 : weights[j];
        if (w > 0.0 && std::isfinite(w)) out = std::max(out, std::abs(xty[j]) / w);
    }
    return out;
}

/// Descending geometric grid from lambda_max to grid_min_ratio * lambda_max; {0} when lambda_max = 0.
inline std::vector<double> lambda_grid_from_max(double lmax, const CvSpec& spec)
{
    spec.validate();
    if (!(lmax > 0.0)) return {0.0};
    std::vector<double> grid(static_cast<std::size_t>(spec.grid_size));
    if (spec.grid_size == 1) {
        grid[0] = lmax;
        return grid;
    }
    const double step = std::log(spec.grid_min_ratio) / static_cast<double>(spec.grid_size - 1);
    for (int i = 0; i < spec.grid_size; ++i) grid[static_cast<std::size_t>(i)] = lmax * std::exp(step * i);
    grid.back() = lmax * spec.grid_min_ratio;
    return grid;
}

inline std::vector<double> lambda_grid(const Matrix& X, const Vector& y, const CvSpec& spec,
                                       const Vector& weights = Vector())
{
    return lambda_grid_from_max(lambda_max(X.transpose() * y, weights), spec);
}

/// Which penalized solver cross-validation tunes.
struct SolverDescriptor
{
    PenaltyKind kind = PenaltyKind::Lasso;
    double gamma = 0.5;
    Vector weights; // AdaptiveLasso only
    SolverOptions options;
};

/// Fits solver along a descending lambda path with warm starts.
inline std::vector<FitResult> fit_path(const GramSystem& sys, const std::vector<double>& grid,
                                       const SolverDescriptor& solver)
{
    std::vector<FitResult> out;
    out.reserve(grid.size());
    Vector warm = Vector::Zero(sys.p());
    for (double lambda : grid) {
        switch (solver.kind) {
            case PenaltyKind::Lasso: {
                out.push_back(lasso_cd(sys, lambda, Vector(), solver.options, warm));
                warm = out.back().beta;
                break;
            }
            case PenaltyKind::AdaptiveLasso: {
                out.push_back(lasso_cd(sys, lambda, solver.weights, solver.options, warm));
                warm = out.back().beta;
                break;
            }
            case PenaltyKind::Bridge: {
                if (lambda == 0.0) {
                    out.push_back(bridge_fit(sys, 0.0, solver.gamma, solver.options));
                    break;
                }
                FitResult init = lasso_cd(sys, lambda, Vector(), solver.options, warm);
                warm = init.beta;
                out.push_back(bridge_from_initial(sys, lambda, solver.gamma, std::move(init.beta), solver.options));
                break;
            }
            case PenaltyKind::Ols:
                throw Error(ErrorKind::Config, "OLS has no tuning parameter to cross-validate");
        }
    }
    return out;
}

/// Single fit at one lambda, cold start. Matches what cv_select's final refit uses.
inline FitResult fit_at(const GramSystem& sys, double lambda, const SolverDescriptor& solver)
{
    switch (solver.kind) {
        case PenaltyKind::Lasso: return lasso_cd(sys, lambda, Vector(), solver.options);
        case PenaltyKind::AdaptiveLasso: return lasso_cd(sys, lambda, solver.weights, solver.options);
        case PenaltyKind::Bridge: return bridge_fit(sys, lambda, solver.gamma, solver.options);
        case PenaltyKind::Ols: break;
    }
    throw Error(ErrorKind::Config, "OLS has no tuning parameter");
}

struct CvPoint
{
    double lambda = 0.0;
    double cv_mse = 0.0;
    int n_folds_used = 0;
};

struct CvResult
{
    double lambda = 0.0;
    std::vector<CvPoint> curve;
    int skipped_fits = 0;
};

/**
 * Fold structure for one design matrix, reusable across responses. Training
 * Gram matrices are formed once per fold, which is what makes per-equation
 * first-stage tuning affordable.
 */
class CvWorkspace
{
public:
    CvWorkspace(const Matrix& X, const CvSpec& spec)
        : X_(X), spec_(spec), folds_(kfold_split(X.rows(), spec))
    {
        full_gram_ = GramSystem::from_data(X, Vector::Zero(X.rows())).gram;
        train_gram_.reserve(folds_.size());
        for (const auto& fold : folds_) {
            const Matrix xt = X_(fold.test, Eigen::all);
            Matrix g = full_gram_;
            g.selfadjointView<Eigen::Lower>().rankUpdate(xt.transpose(), -1.0);
            g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
            train_gram_.push_back(std::move(g));
        }
    }

    const std::vector<Fold>& folds() const { return folds_; }
    const Matrix& design() const { return X_; }
    const Matrix& full_gram() const { return full_gram_; }

    GramSystem full_system(const Vector& y) const
    {
        return GramSystem{full_gram_, X_.transpose() * y, y.squaredNorm()};
    }

    GramSystem train_system(std::size_t f, const Vector& y) const
    {
        const auto& fold = folds_[f];
        const Vector yt = y(fold.test);
        const Matrix xt = X_(fold.test, Eigen::all);
        return GramSystem{train_gram_[f], X_.transpose() * y - xt.transpose() * yt, y.squaredNorm() - yt.squaredNorm()};
    }

    /// Held-out mean squared prediction error of beta on fold f.
    double test_mse(std::size_t f, const Vector& y, const Vector& beta) const
    {
        const auto& fold = folds_[f];
        double sse = 0.0;
        for (Index i : fold.test) {
            double pred = 0.0;
            for (Index j = 0; j < beta.size(); ++j) {
                if (beta[j] != 0.0) pred += X_(i, j) * beta[j];
            }
            const double r = y[i] - pred;
            sse += r * r;
        }
        return sse / static_cast<double>(fold.test.size());
    }

    /**
     * lambda minimizing average held-out MSE; ties go to the larger lambda.
     * Non-converged fold fits are skipped; a lambda with more than half its
     * folds skipped is excluded.
     */
    CvResult select(const Vector& y, const SolverDescriptor& solver) const
    {
        const Vector xty = X_.transpose() * y;
        const Vector& w = solver.kind == PenaltyKind::AdaptiveLasso ? solver.weights : Vector();
        return select_on_grid(y, solver, lambda_grid_from_max(lambda_max(xty, w), spec_));
    }

    /// As select, on a caller-supplied grid (sorted descending).
    CvResult select_on_grid(const Vector& y, const SolverDescriptor& solver, const std::vector<double>& grid) const
    {
        if (grid.empty()) throw Error(ErrorKind::Config, "empty lambda grid");
        const std::size_t m = grid.size();
        std::vector<double> sum(m, 0.0);
        std::vector<int> used(m, 0);
        CvResult result;

        for (std::size_t f = 0; f < folds_.size(); ++f) {
            const GramSystem sys = train_system(f, y);
            const auto path = fit_path(sys, grid, solver);
            for (std::size_t g = 0; g < m; ++g) {
                if (!path[g].converged) {
                    ++result.skipped_fits;
                    continue;
                }
                sum[g] += test_mse(f, y, path[g].beta);
                ++used[g];
            }
        }

        const int k = static_cast<int>(folds_.size());
        double best = std::numeric_limits<double>::infinity();
        bool found = false;
        result.curve.reserve(m);
        for (std::size_t g = 0; g < m; ++g) {
            const double mse = used[g] > 0 ? sum[g] / used[g] : std::numeric_limits<double>::quiet_NaN();
            result.curve.push_back({grid[g], mse, used[g]});
            if (2 * used[g] < k) continue;
            if (mse < best) {
                best = mse;
                result.lambda = grid[g];
                found = true;
            }
        }
        if (!found) throw Error(ErrorKind::Numeric, "cross-validation failed: every lambda lost more than half its folds");
        return result;
    }

private:
    Matrix X_;
    CvSpec spec_;
    std::vector<Fold> folds_;
    Matrix full_gram_;
    std::vector<Matrix> train_gram_;
};

inline CvResult cv_select(const Matrix& X, const Vector& y, const SolverDescriptor& solver, const CvSpec& spec)
{
    return CvWorkspace(X, spec).select(y, solver);
}

} // namespace hdiv
