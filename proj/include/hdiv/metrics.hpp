#pragma once
#include <hdiv/dgp.hpp>
#include <hdiv/two_stage.hpp>
#include <algorithm>
#include <cmath>
#include <span>

namespace hdiv {

struct ReplicationScore
{
    double rmse = 0.0;
    Index n_selected = 0;
    bool contains_truth = false;
    bool equals_truth = false;
};

/// sqrt(mean_j (beta_hat_j - beta0_j)^2), over all p coefficients.
inline double coefficient_rmse(const Vector& beta_hat, const Vector& beta0)
{
    if (beta_hat.size() != beta0.size()) throw Error(ErrorKind::Data, "coefficient_rmse: length mismatch");
    if (beta0.size() == 0) return 0.0;
    return std::sqrt((beta_hat - beta0).squaredNorm() / static_cast<double>(beta0.size()));
}

inline ReplicationScore score_support(const Vector& beta_hat, const IndexSet& selected, const GroundTruth& truth)
{
    ReplicationScore s;
    s.rmse = coefficient_rmse(beta_hat, truth.beta0);
    s.n_selected = static_cast<Index>(selected.size());
    IndexSet sel = selected;
    IndexSet tru = truth.support_beta;
    std::sort(sel.begin(), sel.end());
    std::sort(tru.begin(), tru.end());
    s.contains_truth = std::includes(sel.begin(), sel.end(), tru.begin(), tru.end());
    s.equals_truth = sel == tru;
    return s;
}

inline ReplicationScore score_replication(const TwoStageFit& fit, const GroundTruth& truth)
{
    return score_support(fit.beta_hat, fit.support_beta, truth);
}

struct ScoreSummary
{
    double mean_rmse = 0.0;
    double median_rmse = 0.0;
    double mean_selected = 0.0;
    double p_contains = 0.0;
    double p_equals = 0.0;
    std::size_t count = 0;
};

/// Means, lower median of RMSE (element ceil(m/2) of the sorted list) and selection frequencies.
inline ScoreSummary aggregate(std::span<const ReplicationScore> scores)
{
    if (scores.empty()) throw Error(ErrorKind::Data, "empty score list");
    ScoreSummary s;
    const double m = static_cast<double>(scores.size());
    std::vector<double> rmse;
    rmse.reserve(scores.size());
    for (const auto& r : scores) {
        s.mean_rmse += r.rmse;
        s.mean_selected += static_cast<double>(r.n_selected);
        s.p_contains += r.contains_truth ? 1.0 : 0.0;
        s.p_equals += r.equals_truth ? 1.0 : 0.0;
        rmse.push_back(r.rmse);
    }
    s.mean_rmse /= m;
    s.mean_selected /= m;
    s.p_contains /= m;
    s.p_equals /= m;
    const std::size_t mid = (scores.size() + 1) / 2 - 1;
    std::nth_element(rmse.begin(), rmse.begin() + static_cast<std::ptrdiff_t>(mid), rmse.end());
    s.median_rmse = rmse[mid];
    s.count = scores.size();
    return s;
}

} // namespace hdiv
