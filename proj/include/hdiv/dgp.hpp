#pragma once
#include <hdiv/types.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

namespace hdiv {

using Rng = std::mt19937_64;

/**
 * Parameterization of one simulated two-stage scenario.
 *
 * Defaults reproduce the small-sample design: 30 covariates, 30 instruments,
 * 6 relevant covariates each with a single relevant instrument, Toeplitz(0.7)
 * correlation among the relevant instruments and sigma_u = sigma_v = sqrt(0.5).
 *
 * sigma_uv_high / sigma_uv_low are correlations between u and v_j; the
 * covariance entry is r * sigma_u * sigma_v.
 */
struct SimConfig
{
    Index n = 120;
    Index p_x = 30;
    Index p_z = 30;
    Index k_x = 6;
    double rho = 0.7;
    double sigma_u = std::sqrt(0.5);
    double sigma_v = std::sqrt(0.5);
    double sigma_uv_high = 0.4;
    double sigma_uv_low = 0.15;
    double gamma1 = 0.1;
    double gamma2 = 0.5;
    double coef_low = 0.5;
    double coef_high = 5.0;
    double alpha_noise_sd = 0.01;
    int n_sims = 200;
    std::uint64_t base_seed = 20240101;

    void validate() const
    {
        auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "invalid SimConfig: " + msg); };
        if (n < 2) fail("n must be >= 2");
        if (p_x < 1 || p_z < 1) fail("p_x and p_z must be >= 1");
        if (k_x < 1 || k_x > p_x) fail("k_x must lie in [1, p_x]");
        if (!(std::abs(rho) < 1.0)) fail("|rho| must be < 1");
        if (!(gamma1 > 0.0 && gamma1 < 1.0) || !(gamma2 > 0.0 && gamma2 < 1.0)) fail("gamma1, gamma2 must lie in (0,1)");
        if (!(coef_low > 0.0 && coef_low <= coef_high)) fail("need 0 < coef_low <= coef_high");
        if (!(sigma_u > 0.0 && sigma_v > 0.0)) fail("sigma_u, sigma_v must be > 0");
        if (!(alpha_noise_sd >= 0.0)) fail("alpha_noise_sd must be >= 0");
        if (n_sims < 1) fail("n_sims must be >= 1");
    }
};

struct GroundTruth
{
    Matrix alpha;                       // p_z x p_x
    Vector beta0;                       // p_x
    IndexSet support_beta;
    std::vector<IndexSet> support_alpha; // one index set per column of alpha
};

struct Dataset
{
    Matrix Z; // n x p_z
    Matrix X; // n x p_x
    Vector Y; // n
    std::optional<GroundTruth> truth;
    bool standardized = false;

    Index n() const { return Y.size(); }
    Index p_x() const { return X.cols(); }
    Index p_z() const { return Z.cols(); }
};

namespace detail {

inline double draw_bounded_coefficient(double low, double high, Rng& rng)
{
    std::uniform_real_distribution<double> mag(low, high);
    std::bernoulli_distribution negative(0.5);
    const double m = mag(rng);
    return negative(rng) ? -m : m;
}

inline Matrix standard_normal(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(rows, cols);
    // row-major fill so that the stream maps to observations in order
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
    return out;
}

} // namespace detail

/**
 * Draws alpha and beta0. Relevant covariates are 0..k_x-1; covariate j is
 * instrumented by instrument j alone (j < p_z). Columns j >= p_z have no
 * relevant instrument.
 */
inline GroundTruth build_ground_truth(const SimConfig& cfg, Rng& rng)
{
    cfg.validate();
    if (cfg.k_x > cfg.p_z) {
        throw Error(ErrorKind::Config, "insufficient instruments: k_x = " + std::to_string(cfg.k_x) +
                                           " exceeds p_z = " + std::to_string(cfg.p_z));
    }
    GroundTruth truth;
    truth.alpha = Matrix::Zero(cfg.p_z, cfg.p_x);
    truth.beta0 = Vector::Zero(cfg.p_x);
    truth.support_alpha.resize(static_cast<std::size_t>(cfg.p_x));

    std::normal_distribution<double> noise(0.0, cfg.alpha_noise_sd);
    for (Index j = 0; j < std::min(cfg.p_x, cfg.p_z); ++j) {
        double a = detail::draw_bounded_coefficient(cfg.coef_low, cfg.coef_high, rng);
        if (cfg.alpha_noise_sd > 0.0) a += noise(rng);
        truth.alpha(j, j) = a;
        truth.support_alpha[static_cast<std::size_t>(j)] = {j};
    }
    for (Index j = 0; j < cfg.k_x; ++j) {
        truth.beta0[j] = detail::draw_bounded_coefficient(cfg.coef_low, cfg.coef_high, rng);
        truth.support_beta.push_back(j);
    }
    return truth;
}

/// Block-diagonal: Toeplitz rho^|j-k| on the leading k_x block, identity elsewhere.
inline Matrix build_instrument_covariance(const SimConfig& cfg)
{
    cfg.validate();
    Matrix sigma = Matrix::Identity(cfg.p_z, cfg.p_z);
    const Index k = std::min(cfg.k_x, cfg.p_z);
    for (Index j = 0; j < k; ++j)
        for (Index l = 0; l < k; ++l) sigma(j, l) = std::pow(cfg.rho, static_cast<double>(std::abs(j - l)));
    return sigma;
}

/**
 * Joint covariance of (u, v_1..v_px). The first ceil(k/2) relevant covariates
 * carry correlation sigma_uv_high with u, the remaining relevant ones
 * sigma_uv_low, irrelevant ones zero.
 */
inline Matrix build_error_covariance(const SimConfig& cfg, const GroundTruth& truth)
{
    cfg.validate();
    const Index p = cfg.p_x;
    Matrix sigma = Matrix::Zero(p + 1, p + 1);
    sigma(0, 0) = cfg.sigma_u * cfg.sigma_u;
    sigma.bottomRightCorner(p, p).diagonal().setConstant(cfg.sigma_v * cfg.sigma_v);

    const auto k = truth.support_beta.size();
    const auto n_high = (k + 1) / 2;
    for (std::size_t r = 0; r < k; ++r) {
        const Index j = truth.support_beta[r];
        const double corr = r < n_high ? cfg.sigma_uv_high : cfg.sigma_uv_low;
        sigma(0, 1 + j) = sigma(1 + j, 0) = corr * cfg.sigma_u * cfg.sigma_v;
    }
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::Numeric, "error covariance is not positive definite; check sigma_u, sigma_v, sigma_uv");
    }
    return sigma;
}

namespace detail {

// Columns that already meet the target (to rounding) are left bit-for-bit unchanged.
inline bool is_standard_column(const Eigen::Ref<const Vector>& col)
{
    const double nd = static_cast<double>(col.size());
    return std::abs(col.sum()) <= 1e-10 && std::abs(col.squaredNorm() / nd - 1.0) <= 1e-10;
}

inline void standardize_instruments(Matrix& Z)
{
    const double nd = static_cast<double>(Z.rows());
    for (Index h = 0; h < Z.cols(); ++h) {
        auto col = Z.col(h);
        if (is_standard_column(col)) continue;
        const double scale_ref = col.cwiseAbs().maxCoeff();
        col.array() -= col.mean();
        const double ms = col.squaredNorm() / nd;
        if (!(ms > 0.0) || std::sqrt(ms) <= 1e-14 * scale_ref) {
            throw Error(ErrorKind::Data, "degenerate instrument: column z" + std::to_string(h + 1) + " has zero variance");
        }
        col /= std::sqrt(ms);
    }
}

inline void center(Vector& y)
{
    if (std::abs(y.sum()) <= 1e-10) return;
    y.array() -= y.mean();
}

} // namespace detail

/**
 * Centers Y and centers/scales each Z column to (1/n) sum z^2 = 1; X is
 * untouched. Idempotent: already-standardized columns are not rewritten.
 */
inline Dataset standardize(Dataset data)
{
    if (data.n() < 2) throw Error(ErrorKind::Data, "standardize needs n >= 2");
    detail::standardize_instruments(data.Z);
    detail::center(data.Y);
    data.standardized = true;
    return data;
}

/**
 * One simulated sample. Z ~ N(0, Sigma_z) is standardized first, then
 * X = Z alpha + V and Y = X beta0 + u with (u, v) ~ N(0, Sigma_uv).
 */
inline Dataset sample_dataset(const SimConfig& cfg, const GroundTruth& truth, Rng& rng)
{
    const Matrix sigma_z = build_instrument_covariance(cfg);
    const Matrix sigma_uv = build_error_covariance(cfg, truth);

    const Eigen::LLT<Matrix> lz(sigma_z);
    const Eigen::LLT<Matrix> luv(sigma_uv);

    Dataset data;
    data.Z = detail::standard_normal(cfg.n, cfg.p_z, rng) * lz.matrixL().transpose();
    const Matrix errors = detail::standard_normal(cfg.n, cfg.p_x + 1, rng) * luv.matrixL().transpose();

    detail::standardize_instruments(data.Z);

    data.X = data.Z * truth.alpha + errors.rightCols(cfg.p_x);
    data.Y = data.X * truth.beta0 + errors.col(0);
    data = standardize(std::move(data));
    data.truth = truth;
    return data;
}

/// Convenience: truth and sample from a single seed.
inline Dataset simulate(const SimConfig& cfg, std::uint64_t seed)
{
    Rng rng(seed);
    GroundTruth truth = build_ground_truth(cfg, rng);
    return sample_dataset(cfg, truth, rng);
}

} // namespace hdiv
