#pragma once
#include <hdiv/types.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

namespace hdiv {

/**
 * Finite-sample measurements of the conditions behind selection and oracle
 * results. Nothing here is enforced; values are reported alongside fits.
 * plug_in marks a report computed from estimated quantities (D-hat, beta-hat)
 * rather than from the true conditional means and coefficients.
 */
struct DiagnosticsReport
{
    double c0_hat = 0.0;
    double xi_min = 0.0;
    std::optional<double> max_irrelevant_init;
    std::optional<double> min_relevant_init;
    std::optional<bool> zero_consistent;
    std::optional<double> eig_min_full;
    std::optional<double> eig_max_full;
    double eig_min_sel = 0.0;
    double eig_max_sel = 0.0;
    bool full_gram_skipped = false;
    bool plug_in = false;

    /// key = value lines; absent quantities are written as "na".
    std::string to_text() const
    {
        std::ostringstream os;
        auto num = [](std::optional<double> v) {
            if (!v) return std::string("na");
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.10g", *v);
            return std::string(buf);
        };
        os << "plug_in = " << (plug_in ? "true" : "false") << '\n';
        os << "c0_hat = " << num(c0_hat) << '\n';
        os << "xi_min = " << num(xi_min) << '\n';
        os << "max_irrelevant_init = " << num(max_irrelevant_init) << '\n';
        os << "min_relevant_init = " << num(min_relevant_init) << '\n';
        os << "zero_consistent = " << (zero_consistent ? (*zero_consistent ? "true" : "false") : "na") << '\n';
        os << "eig_min_full = " << (full_gram_skipped ? std::string("skipped") : num(eig_min_full)) << '\n';
        os << "eig_max_full = " << (full_gram_skipped ? std::string("skipped") : num(eig_max_full)) << '\n';
        os << "eig_min_sel = " << num(eig_min_sel) << '\n';
        os << "eig_max_sel = " << num(eig_max_sel) << '\n';
        return os.str();
    }
};

struct PartialOrthogonality
{
    double c0_hat = 0.0;
    double xi_min = 0.0;
};

/**
 * c0_hat = max_{j not in S, k in S} |n^{-1/2} sum_i d_ij d_ik|,
 * xi_min = min_{k in S} |n^{-1} sum_i (d_1i' beta_10) d_ik|.
 */
inline PartialOrthogonality check_partial_orthogonality(const Matrix& D, const Vector& beta0, const IndexSet& support)
{
    if (support.empty()) throw Error(ErrorKind::Data, "partial orthogonality needs a nonempty support");
    const double n = static_cast<double>(D.rows());
    std::vector<bool> in_support(static_cast<std::size_t>(D.cols()), false);
    for (Index k : support) in_support[static_cast<std::size_t>(k)] = true;

    PartialOrthogonality out;
    for (Index j = 0; j < D.cols(); ++j) {
        if (in_support[static_cast<std::size_t>(j)]) continue;
        for (Index k : support) {
            out.c0_hat = std::max(out.c0_hat, std::abs(D.col(j).dot(D.col(k))) / std::sqrt(n));
        }
    }

    Vector signal = Vector::Zero(D.rows()); // d_1i' beta_10
    for (Index k : support) signal += D.col(k) * beta0[k];
    out.xi_min = std::numeric_limits<double>::infinity();
    for (Index k : support) out.xi_min = std::min(out.xi_min, std::abs(signal.dot(D.col(k))) / n);
    return out;
}

struct ZeroConsistency
{
    double max_irrelevant_init = 0.0;
    double min_relevant_init = 0.0;
    bool holds = false;
};

/// Initializer quality against the true support: is min relevant |beta~| >= xi_b * b1?
inline ZeroConsistency check_zero_consistency(const Vector& initial_beta, const std::optional<IndexSet>& truth_support,
                                              double b1, double xi_b = 0.1)
{
    if (!truth_support) throw Error(ErrorKind::Data, "truth unavailable: zero-consistency needs the true support");
    std::vector<bool> relevant(static_cast<std::size_t>(initial_beta.size()), false);
    for (Index k : *truth_support) relevant[static_cast<std::size_t>(k)] = true;

    ZeroConsistency out;
    out.min_relevant_init = truth_support->empty() ? 0.0 : std::numeric_limits<double>::infinity();
    for (Index j = 0; j < initial_beta.size(); ++j) {
        const double a = std::abs(initial_beta[j]);
        if (relevant[static_cast<std::size_t>(j)]) {
            out.min_relevant_init = std::min(out.min_relevant_init, a);
        } else {
            out.max_irrelevant_init = std::max(out.max_irrelevant_init, a);
        }
    }
    out.holds = out.min_relevant_init >= xi_b * b1;
    return out;
}

struct GramEigenBounds
{
    std::optional<double> min_full;
    std::optional<double> max_full;
    double min_sel = 0.0;
    double max_sel = 0.0;
    bool full_skipped = false;
};

/// Extreme eigenvalues of (1/n) D'D and of its principal submatrix on support.
inline GramEigenBounds gram_eigen_bounds(const Matrix& D, const IndexSet& support, Index full_cap = 2000)
{
    const double n = static_cast<double>(D.rows());
    GramEigenBounds out;
    if (D.cols() <= full_cap) {
        const Matrix g = D.transpose() * D / n;
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
        out.min_full = std::max(0.0, eig.eigenvalues().minCoeff());
        out.max_full = eig.eigenvalues().maxCoeff();
    } else {
        out.full_skipped = true;
    }
    if (!support.empty()) {
        const Matrix ds = D(Eigen::all, support);
        const Matrix g = ds.transpose() * ds / n;
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
        out.min_sel = std::max(0.0, eig.eigenvalues().minCoeff());
        out.max_sel = eig.eigenvalues().maxCoeff();
    }
    return out;
}

/**
 * All diagnostics at once. With truth (simulation) the true conditional means
 * D and beta0 feed the orthogonality checks; otherwise D_hat and the fitted
 * beta are plugged in and the report is marked plug_in.
 */
inline DiagnosticsReport diagnose(const Matrix& D, const Vector& beta, const IndexSet& support,
                                  const Matrix& D_hat, const IndexSet& selected, const Vector& initial_beta,
                                  const std::optional<IndexSet>& truth_support, bool plug_in, double xi_b = 0.1)
{
    DiagnosticsReport r;
    r.plug_in = plug_in;
    if (!support.empty()) {
        const auto po = check_partial_orthogonality(D, beta, support);
        r.c0_hat = po.c0_hat;
        r.xi_min = po.xi_min;
    }
    if (truth_support && initial_beta.size() == beta.size()) {
        double b1 = 0.0;
        for (Index k : *truth_support) b1 = std::max(b1, std::abs(beta[k]));
        const auto zc = check_zero_consistency(initial_beta, truth_support, b1, xi_b);
        r.max_irrelevant_init = zc.max_irrelevant_init;
        r.min_relevant_init = zc.min_relevant_init;
        r.zero_consistent = zc.holds;
    }
    const auto eb = gram_eigen_bounds(D_hat, selected);
    r.eig_min_full = eb.min_full;
    r.eig_max_full = eb.max_full;
    r.full_gram_skipped = eb.full_skipped;
    r.eig_min_sel = eb.min_sel;
    r.eig_max_sel = eb.max_sel;
    return r;
}

} // namespace hdiv
