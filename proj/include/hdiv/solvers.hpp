#pragma once
#include <hdiv/types.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hdiv {

enum class PenaltyKind { Ols, Lasso, Bridge, AdaptiveLasso };

inline const char* to_string(PenaltyKind kind)
{
    switch (kind) {
        case PenaltyKind::Ols: return "OLS";
        case PenaltyKind::Lasso: return "LASSO";
        case PenaltyKind::Bridge: return "BRIDGE";
        case PenaltyKind::AdaptiveLasso: return "ADALASSO";
    }
    return "?";
}

/// Which estimator to run and its tuning state.
struct PenaltySpec
{
    PenaltyKind kind = PenaltyKind::Lasso;
    double lambda = 0.0;
    double gamma = 0.5;  // Bridge only
    Vector weights;      // AdaptiveLasso only

    void validate() const
    {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::Config, "lambda must be finite and >= 0");
        if (kind == PenaltyKind::Bridge && !(gamma > 0.0 && gamma < 1.0)) {
            throw Error(ErrorKind::Config, "bridge exponent gamma must lie in (0,1)");
        }
        if (kind == PenaltyKind::AdaptiveLasso) {
            if (!weights.allFinite() || (weights.array() < 0.0).any()) {
                throw Error(ErrorKind::Config, "adaptive lasso weights must be finite and >= 0");
            }
        }
    }
};

struct FitResult
{
    Vector beta;
    IndexSet support;
    double objective = 0.0;
    int outer_iterations = 0;
    bool converged = false;
    /// Bridge only: S_n(beta^(s), theta^(s)) after each outer step.
    std::vector<double> surrogate_trace;
};

struct SolverOptions
{
    double tol = 1e-6;
    int max_sweeps = 10000;  // coordinate-descent sweeps per lasso solve
    int max_outer = 200;     // bridge reweighting steps
};

/// Sufficient statistics of a least-squares problem: X'X, X'y, y'y.
struct GramSystem
{
    Matrix gram;
    Vector xty;
    double yty = 0.0;

    Index p() const { return xty.size(); }

    static GramSystem from_data(const Matrix& X, const Vector& y)
    {
        GramSystem g;
        g.gram = Matrix::Zero(X.cols(), X.cols());
        g.gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
        g.gram.triangularView<Eigen::StrictlyUpper>() = g.gram.transpose();
        g.xty = X.transpose() * y;
        g.yty = y.squaredNorm();
        return g;
    }

    /// 1/2 ||y - Xb||^2; the quadratic form only visits nonzero entries of b.
    double half_rss(const Vector& b) const
    {
        IndexSet nz;
        for (Index j = 0; j < b.size(); ++j) {
            if (b[j] != 0.0) nz.push_back(j);
        }
        double quad = 0.0;
        double lin = 0.0;
        for (Index j : nz) {
            lin += b[j] * xty[j];
            double row = 0.0;
            for (Index k : nz) row += gram(k, j) * b[k];
            quad += b[j] * row;
        }
        return std::max(0.0, 0.5 * (yty - 2.0 * lin + quad));
    }
};

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

namespace detail {

inline FitResult finish(Vector beta, double objective, int iterations, bool converged)
{
    FitResult fit;
    fit.support = nonzero_support(beta);
    fit.beta = std::move(beta);
    fit.objective = objective;
    fit.outer_iterations = iterations;
    fit.converged = converged;
    return fit;
}

inline double weighted_l1(const Vector& b, const Vector& abs_weights)
{
    double s = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
        if (b[j] != 0.0) s += abs_weights[j] * std::abs(b[j]);
    }
    return s;
}

/**
 * Cyclic coordinate descent for 1/2 RSS + sum_j t_j |b_j| on a Gram system.
 * t_j may be +inf (coordinate pinned at zero). Full sweeps alternate with
 * sweeps over the current nonzero set; convergence is declared only after a
 * full sweep whose largest coefficient change is below tol.
 */
inline FitResult weighted_l1_descent(const GramSystem& sys, const Vector& abs_weights, Vector beta,
                                     const SolverOptions& opt)
{
    const Index p = sys.p();
    Vector grad = sys.xty; // X'(y - X b), built from the nonzero columns only
    for (Index j = 0; j < p; ++j) {
        if (beta[j] != 0.0) grad.noalias() -= beta[j] * sys.gram.col(j);
    }
    int sweeps = 0;
    bool converged = false;

    auto update = [&](Index j) {
        const double gjj = sys.gram(j, j);
        const double old = beta[j];
        double next = 0.0;
        if (gjj > 0.0 && std::isfinite(abs_weights[j])) {
            next = soft_threshold(grad[j] + gjj * old, abs_weights[j]) / gjj;
        }
        const double delta = next - old;
        if (delta != 0.0) {
            beta[j] = next;
            grad.noalias() -= delta * sys.gram.col(j);
        }
        return std::abs(delta);
    };

    IndexSet active;
    while (sweeps < opt.max_sweeps) {
        double max_change = 0.0;
        for (Index j = 0; j < p; ++j) max_change = std::max(max_change, update(j));
        ++sweeps;
        if (max_change < opt.tol) {
            converged = true;
            break;
        }
        active = nonzero_support(beta);
        while (sweeps < opt.max_sweeps) {
            double inner = 0.0;
            for (Index j : active) inner = std::max(inner, update(j));
            ++sweeps;
            if (inner < opt.tol) break;
        }
    }
    // 1/2 RSS = 1/2 (y'y - b'X'y - b'grad), O(p) given the maintained gradient
    const double half_rss = std::max(0.0, 0.5 * (sys.yty - beta.dot(sys.xty) - beta.dot(grad)));
    const double objective = half_rss + weighted_l1(beta, abs_weights);
    return finish(std::move(beta), objective, sweeps, converged);
}

} // namespace detail

/// Least squares; minimum-norm solution when X is rank deficient. Support is all of 0..p-1.
inline FitResult ols_fit(const Matrix& X, const Vector& y)
{
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
    Vector beta = cod.solve(y);
    FitResult fit;
    fit.objective = 0.5 * (y - X * beta).squaredNorm();
    fit.support = full_support(X.cols());
    fit.beta = std::move(beta);
    fit.converged = true;
    return fit;
}

/**
 * Weighted LASSO on precomputed sufficient statistics.
 * Objective: 1/2 ||y - Xb||^2 + lambda * sum_j w_j |b_j| (w_j = 1 if weights empty).
 */
inline FitResult lasso_cd(const GramSystem& sys, double lambda, const Vector& weights = Vector(),
                          const SolverOptions& opt = {}, const Vector& warm_start = Vector())
{
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, "lambda must be >= 0");
    const Index p = sys.p();
    Vector t = weights.size() == 0 ? Vector::Constant(p, lambda) : Vector(lambda * weights);
    if (weights.size() != 0 && weights.size() != p) throw Error(ErrorKind::Config, "weights length must equal p");
    // lambda = 0 with an infinite weight still pins the coordinate
    for (Index j = 0; j < p && weights.size() != 0; ++j) {
        if (std::isinf(weights[j])) t[j] = std::numeric_limits<double>::infinity();
    }
    Vector start = warm_start.size() == p ? warm_start : Vector::Zero(p);
    return detail::weighted_l1_descent(sys, t, std::move(start), opt);
}

inline FitResult lasso_cd(const Matrix& X, const Vector& y, double lambda, const Vector& weights = Vector(),
                          const SolverOptions& opt = {})
{
    return lasso_cd(GramSystem::from_data(X, y), lambda, weights, opt);
}

/// lambda = tau^(1-gamma) gamma^(-gamma) (1-gamma)^(gamma-1): the exact value of min_theta S_n.
inline double tau_to_lambda(double tau, double gamma)
{
    return std::pow(tau, 1.0 - gamma) * std::pow(gamma, -gamma) * std::pow(1.0 - gamma, gamma - 1.0);
}

/// log tau; tau itself leaves double range for gamma near 1 (tau grows like lambda^(1/(1-gamma))).
inline double lambda_to_log_tau(double lambda, double gamma)
{
    if (!(lambda > 0.0)) throw Error(ErrorKind::Config, "lambda_to_tau needs lambda > 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "gamma must lie in (0,1)");
    return (std::log(lambda) + gamma * std::log(gamma) + (1.0 - gamma) * std::log(1.0 - gamma)) / (1.0 - gamma);
}

inline double lambda_to_tau(double lambda, double gamma)
{
    return std::exp(lambda_to_log_tau(lambda, gamma));
}

inline double log_tau_to_lambda(double log_tau, double gamma)
{
    return std::exp((1.0 - gamma) * log_tau - gamma * std::log(gamma) - (1.0 - gamma) * std::log(1.0 - gamma));
}

/// L_n(b) = 1/2 ||y - Xb||^2 + lambda sum |b_j|^gamma.
inline double bridge_objective(const GramSystem& sys, const Vector& b, double lambda, double gamma)
{
    double pen = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
        if (b[j] != 0.0) pen += std::pow(std::abs(b[j]), gamma);
    }
    return sys.half_rss(b) + lambda * pen;
}

/**
 * Auxiliary state of the bridge reweighting scheme:
 * S_n(b, theta) = Q_n(b) + sum_j theta_j^(1 - 1/gamma) |b_j| + tau sum_j theta_j.
 * tau and theta are held as logs; both leave double range when gamma is near 1.
 */
struct BridgeState
{
    double log_tau = 0.0;
    Vector log_theta; // -inf on frozen coordinates
    std::vector<bool> frozen;

    double tau() const { return std::exp(log_tau); }
    Vector theta() const { return log_theta.array().exp(); }

    /// theta_j = ((1-gamma)/(tau gamma))^gamma |b_j|^gamma, zero on frozen coordinates.
    void update_theta(const Vector& beta, double gamma)
    {
        const double log_scale = std::log((1.0 - gamma) / gamma) - log_tau;
        log_theta.resize(beta.size());
        for (Index j = 0; j < beta.size(); ++j) {
            log_theta[j] = frozen[static_cast<std::size_t>(j)] ? -std::numeric_limits<double>::infinity()
                                                               : gamma * (log_scale + std::log(std::abs(beta[j])));
        }
    }

    /// t_j = theta_j^(1 - 1/gamma); +inf where theta_j = 0.
    Vector l1_weights(double gamma) const
    {
        Vector t(log_theta.size());
        const double expo = 1.0 - 1.0 / gamma;
        for (Index j = 0; j < log_theta.size(); ++j) {
            t[j] = std::isinf(log_theta[j]) ? std::numeric_limits<double>::infinity() : std::exp(expo * log_theta[j]);
        }
        return t;
    }

    /// tau * sum_j theta_j
    double theta_penalty() const
    {
        double out = 0.0;
        for (Index j = 0; j < log_theta.size(); ++j) {
            if (!std::isinf(log_theta[j])) out += std::exp(log_tau + log_theta[j]);
        }
        return out;
    }

    double surrogate(const GramSystem& sys, const Vector& beta, double gamma) const
    {
        return sys.half_rss(beta) + detail::weighted_l1(beta, l1_weights(gamma)) + theta_penalty();
    }
};

namespace detail {

inline FitResult bridge_least_squares(const GramSystem& sys, const Matrix* X, const Vector* y)
{
    FitResult fit;
    if (X != nullptr && y != nullptr) {
        fit = ols_fit(*X, *y);
    } else {
        const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys.gram);
        fit.beta = cod.solve(sys.xty);
        fit.objective = sys.half_rss(fit.beta);
        fit.converged = true;
    }
    fit.support = nonzero_support(fit.beta);
    return fit;
}

} // namespace detail

/**
 * Reweighting iterations of the BRIDGE scheme from a given starting point
 * (normally the LASSO fit at the same lambda). Each step sets theta from the
 * previous beta and solves the weighted LASSO with weights
 * theta_j^(1-1/gamma). Coordinates that reach zero stay at zero.
 */
inline FitResult bridge_from_initial(const GramSystem& sys, double lambda, double gamma, Vector beta,
                                     const SolverOptions& opt = {})
{
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "bridge exponent gamma must lie in (0,1)");
    if (!(lambda > 0.0)) throw Error(ErrorKind::Config, "bridge reweighting needs lambda > 0");
    const Index p = sys.p();

    BridgeState state;
    state.log_tau = lambda_to_log_tau(lambda, gamma);
    state.frozen.assign(static_cast<std::size_t>(p), false);

    bool converged = false;
    std::vector<double> trace;
    int step = 0;
    while (step < opt.max_outer) {
        bool any_free = false;
        for (Index j = 0; j < p; ++j) {
            if (beta[j] == 0.0) state.frozen[static_cast<std::size_t>(j)] = true;
            any_free = any_free || !state.frozen[static_cast<std::size_t>(j)];
        }
        if (!any_free) {
            converged = true;
            break;
        }
        state.update_theta(beta, gamma);
        FitResult inner = detail::weighted_l1_descent(sys, state.l1_weights(gamma), beta, opt);
        const double change = (inner.beta - beta).cwiseAbs().maxCoeff();
        beta = std::move(inner.beta);
        trace.push_back(inner.objective + state.theta_penalty());
        ++step;
        if (change < opt.tol) {
            converged = inner.converged;
            break;
        }
    }

    FitResult fit = detail::finish(std::move(beta), 0.0, step, converged);
    fit.objective = bridge_objective(sys, fit.beta, lambda, gamma);
    fit.surrogate_trace = std::move(trace);
    return fit;
}

/**
 * BRIDGE estimate: LASSO start at the same lambda, then reweighting until the
 * largest coefficient change drops below tol. lambda = 0 returns the
 * (minimum-norm) least squares fit.
 *
 * objective is L_n at the returned beta; surrogate_trace holds S_n per step.
 */
inline FitResult bridge_fit(const GramSystem& sys, double lambda, double gamma, const SolverOptions& opt = {},
                            const Vector& lasso_warm_start = Vector(), const Matrix* X = nullptr,
                            const Vector* y = nullptr)
{
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "bridge exponent gamma must lie in (0,1)");
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, "lambda must be >= 0");
    if (lambda == 0.0) return detail::bridge_least_squares(sys, X, y);
    FitResult init = lasso_cd(sys, lambda, Vector(), opt, lasso_warm_start);
    return bridge_from_initial(sys, lambda, gamma, std::move(init.beta), opt);
}

inline FitResult bridge_fit(const Matrix& X, const Vector& y, double lambda, double gamma,
                            const SolverOptions& opt = {})
{
    return bridge_fit(GramSystem::from_data(X, y), lambda, gamma, opt, Vector(), &X, &y);
}

/// w_j = 1 / max(|initial_beta_j|, weight_floor).
inline Vector adaptive_weights(const Vector& initial_beta, double weight_floor = 1e-6)
{
    return initial_beta.cwiseAbs().cwiseMax(weight_floor).cwiseInverse();
}

inline FitResult adaptive_lasso_fit(const GramSystem& sys, double lambda, const Vector& initial_beta,
                                    double weight_floor = 1e-6, const SolverOptions& opt = {})
{
    if (initial_beta.size() != sys.p()) throw Error(ErrorKind::Config, "initial_beta length must equal p");
    return lasso_cd(sys, lambda, adaptive_weights(initial_beta, weight_floor), opt);
}

inline FitResult adaptive_lasso_fit(const Matrix& X, const Vector& y, double lambda, const Vector& initial_beta,
                                    double weight_floor = 1e-6, const SolverOptions& opt = {})
{
    return adaptive_lasso_fit(GramSystem::from_data(X, y), lambda, initial_beta, weight_floor, opt);
}

/// Dispatch on a PenaltySpec. Ols ignores lambda.
inline FitResult fit_penalized(const Matrix& X, const Vector& y, const PenaltySpec& pen, const SolverOptions& opt = {})
{
    pen.validate();
    switch (pen.kind) {
        case PenaltyKind::Ols: return ols_fit(X, y);
        case PenaltyKind::Lasso: return lasso_cd(X, y, pen.lambda, Vector(), opt);
        case PenaltyKind::Bridge: return bridge_fit(X, y, pen.lambda, pen.gamma, opt);
        case PenaltyKind::AdaptiveLasso: return lasso_cd(X, y, pen.lambda, pen.weights, opt);
    }
    throw Error(ErrorKind::Config, "unknown penalty kind");
}

} // namespace hdiv
