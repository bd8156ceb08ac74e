#pragma once

// Yield scenarios over a location's weather history, their mean/covariance,
// and the productivity-index risk budget.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seedplan/data.hpp"
#include "seedplan/errors.hpp"
#include "seedplan/mtl.hpp"

namespace seedplan {

/// S(i, t): predicted yield of variety i under weather year t at one location.
struct YieldScenarioSet {
    std::string location_id;
    Eigen::MatrixXd S;
    std::vector<int> years;
    std::vector<std::string> varieties;
};

struct YieldDistribution {
    std::string location_id;
    std::vector<std::string> varieties;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double shrinkage = 0.0; // absolute ridge added to the diagonal

    Eigen::Index size() const noexcept { return mean.size(); }

    /// Sub-distribution over the given variety ids, in the given order.
    YieldDistribution restrict_to(const std::vector<std::string>& subset) const {
        std::vector<Eigen::Index> idx;
        for (const auto& v : subset) {
            Eigen::Index found = -1;
            for (std::size_t i = 0; i < varieties.size(); ++i)
                if (varieties[i] == v) found = static_cast<Eigen::Index>(i);
            if (found < 0) throw ParameterError("variety '" + v + "' is not in the distribution");
            idx.push_back(found);
        }
        YieldDistribution out;
        out.location_id = location_id;
        out.varieties = subset;
        out.shrinkage = shrinkage;
        const auto m = static_cast<Eigen::Index>(idx.size());
        out.mean.resize(m);
        out.covariance.resize(m, m);
        for (Eigen::Index a = 0; a < m; ++a) {
            out.mean[a] = mean[idx[static_cast<std::size_t>(a)]];
            for (Eigen::Index b = 0; b < m; ++b)
                out.covariance(a, b) = covariance(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        return out;
    }
};

struct RiskBudget {
    double r_min = 0.1;
    double r_max = 5.1;
    int pi_max = kPiMax;

    void validate() const {
        if (!(r_min > 0.0) || !(r_min <= r_max)) throw ParameterError("risk budget needs 0 < r_min <= r_max");
        if (pi_max < 1) throw ParameterError("pi_max must be >= 1");
    }
};

inline YieldScenarioSet project_scenarios(const CoefficientMatrix& model, const RegionLocation& location,
                                          const NormalizationSpec& spec) {
    if (location.weather_history.size() < 2)
        throw ParameterError("location " + location.location_id + " needs at least two weather years");
    YieldScenarioSet out;
    out.location_id = location.location_id;
    out.varieties = model.varieties;
    const auto T = static_cast<Eigen::Index>(location.weather_history.size());
    out.S.resize(model.num_tasks(), T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const auto& w = location.weather_history[static_cast<std::size_t>(t)];
        out.S.col(t) = predict_all(model, apply_normalizer(spec, raw_features(w, location.soil)));
        out.years.push_back(w.year);
    }
    return out;
}

/// Sample mean and covariance (denominator T-1) across scenario years, plus a
/// ridge of `relative_epsilon` times the mean raw variance (or `relative_epsilon`
/// itself when every variance is zero). The stored matrix is exactly symmetric.
inline YieldDistribution estimate_distribution(const YieldScenarioSet& scenarios, double relative_epsilon = 1e-6) {
    const auto T = scenarios.S.cols();
    if (T < 2) throw ParameterError("covariance needs at least two scenario years");
    if (!(relative_epsilon >= 0.0)) throw ParameterError("shrinkage epsilon must be >= 0");
    YieldDistribution d;
    d.location_id = scenarios.location_id;
    d.varieties = scenarios.varieties;
    d.mean = scenarios.S.rowwise().mean();
    const Eigen::MatrixXd centered = scenarios.S.colwise() - d.mean;
    Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(T - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    const double mean_diag = cov.rows() > 0 ? cov.diagonal().mean() : 0.0;
    d.shrinkage = relative_epsilon * (mean_diag > 0.0 ? mean_diag : 1.0);
    cov.diagonal().array() += d.shrinkage;
    d.covariance = std::move(cov);
    return d;
}

/// Maximal tolerable risk for productivity index k: linear from r_min (k = 0) to r_max (k = pi_max).
inline double risk_budget(int pi, const RiskBudget& budget = {}) {
    budget.validate();
    if (pi < 0 || pi > budget.pi_max) throw ParameterError("productivity index out of range: " + std::to_string(pi));
    const double w = static_cast<double>(pi) / static_cast<double>(budget.pi_max);
    // convex-combination form keeps both endpoints exact
    return (1.0 - w) * budget.r_min + w * budget.r_max;
}

} // namespace seedplan
