#pragma once

// Risk-capped allocation on the probability simplex:
//
//   max_w  w' mu   s.t.  w' Sigma w <= cap^2,  w >= 0,  1'w = 1.
//
// If the best single variety already fits under the cap it is optimal.
// Otherwise the cap binds, and the solver bisects (geometrically) on the
// risk-aversion gamma of  max w'mu - gamma w'Sigma w  over the simplex; the
// achieved risk is non-increasing in gamma. Each scalarized problem is solved
// with accelerated projected gradient (fixed step 1/L) and finished by an
// exact KKT solve on the identified support.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seedplan/errors.hpp"
#include "seedplan/risk.hpp"

namespace seedplan {

struct AllocationWeights {
    std::string location_id;
    std::vector<std::string> varieties;
    Eigen::VectorXd weights;
    double expected_yield = 0.0;
    double risk = 0.0;
    bool feasible = true;
};

struct FrontierPoint {
    double risk_cap = 0.0;
    double risk = 0.0;
    double expected_yield = 0.0;
    AllocationWeights weights;
};

struct AllocationOptions {
    double gamma_lo = 1e-8;
    double gamma_hi = 1e8;
    double gamma_ceiling = 1e16;     // bracket expansion stops here
    double risk_tolerance = 1e-9;    // relative |risk - cap| for bisection
    int max_bisections = 200;
    int inner_max_iterations = 20000;
    double inner_tolerance = 1e-13;
    int polish_every = 25;
    double lipschitz_safety = 1e-6;  // relative margin on 2 gamma lambda_max
};

/// Euclidean projection onto {w >= 0, sum w = 1} (sort and threshold).
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const auto n = v.size();
    if (n == 0) throw ParameterError("cannot project an empty vector");
    if (!v.allFinite()) throw ParameterError("simplex projection needs a finite vector");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += u[static_cast<std::size_t>(j)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

inline double portfolio_risk(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& w) {
    return std::sqrt(std::max(0.0, w.dot(sigma * w)));
}

namespace detail {

inline std::vector<Eigen::Index> support_of(const Eigen::VectorXd& w) {
    std::vector<Eigen::Index> s;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) s.push_back(i);
    return s;
}

inline Eigen::MatrixXd sub_matrix(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& s) {
    const auto k = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd out(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) out(a, b) = m(s[static_cast<std::size_t>(a)], s[static_cast<std::size_t>(b)]);
    return out;
}

inline Eigen::VectorXd sub_vector(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& s) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(s.size()));
    for (std::size_t a = 0; a < s.size(); ++a) out[static_cast<Eigen::Index>(a)] = v[s[a]];
    return out;
}

/// Checks w >= 0 and, for indices off the support, mu_j - 2 gamma (Sigma w)_j <= nu.
inline bool kkt_holds(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double gamma, Eigen::VectorXd& w,
                      const std::vector<Eigen::Index>& support) {
    const double scale = std::max(1.0, mu.cwiseAbs().maxCoeff()) + 2.0 * gamma * sigma.cwiseAbs().maxCoeff();
    const double tol = 1e-10 * scale;
    if ((w.array() < -1e-12).any()) return false;
    w = w.cwiseMax(0.0);
    const double total = w.sum();
    if (!(total > 0.0)) return false;
    w /= total;
    const Eigen::VectorXd g = mu - 2.0 * gamma * (sigma * w);
    double nu = 0.0;
    for (auto i : support) nu += g[i];
    nu /= static_cast<double>(support.size());
    for (Eigen::Index j = 0; j < w.size(); ++j)
        if (g[j] > nu + tol) return false;
    return true;
}

/// Exact maximizer of w'mu - gamma w'Sigma w on the face spanned by `support`, if KKT-valid.
inline bool polish_scalarized(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double gamma,
                              const std::vector<Eigen::Index>& support, Eigen::VectorXd& out) {
    if (support.empty()) return false;
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = 2.0 * gamma * sub_matrix(sigma, support);
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Eigen::VectorXd rhs(k + 1);
    rhs.head(k) = sub_vector(mu, support);
    rhs[k] = 1.0;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mu.size());
    for (Eigen::Index a = 0; a < k; ++a) w[support[static_cast<std::size_t>(a)]] = sol[a];
    if (!kkt_holds(mu, sigma, gamma, w, support)) return false;
    out = std::move(w);
    return true;
}

/// argmax_{w in simplex} w'mu - gamma w'Sigma w.
inline Eigen::VectorXd solve_scalarized(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double gamma,
                                        double lambda_max, const Eigen::VectorXd& start,
                                        const AllocationOptions& opts) {
    const double L = std::max(2.0 * gamma * lambda_max * (1.0 + opts.lipschitz_safety), 1e-300);
    const double step = 1.0 / L;
    Eigen::VectorXd x = project_to_simplex(start);
    Eigen::VectorXd x_prev = x;
    Eigen::VectorXd y = x;
    double t = 1.0;
    auto value = [&](const Eigen::VectorXd& w) { return w.dot(mu) - gamma * w.dot(sigma * w); };
    double fx = value(x);
    Eigen::VectorXd polished;
    for (int k = 0; k < opts.inner_max_iterations; ++k) {
        const Eigen::VectorXd z = project_to_simplex(y + step * (mu - 2.0 * gamma * (sigma * y)));
        const double fz = value(z);
        x_prev = x;
        if (fz >= fx) {
            x = z;
            fx = fz;
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = x + ((t - 1.0) / t_next) * (x - x_prev);
            t = t_next;
        } else {
            y = x;
            t = 1.0;
        }
        if (k % opts.polish_every == 0 && polish_scalarized(mu, sigma, gamma, support_of(z), polished))
            return polished;
        if ((x - x_prev).cwiseAbs().maxCoeff() <= opts.inner_tolerance && fz >= fx - 1e-15 * std::abs(fx)) break;
    }
    if (polish_scalarized(mu, sigma, gamma, support_of(x), polished)) return polished;
    return x;
}

/// On the support of `w`, the point hitting risk == cap along the parametric
/// KKT path w = a + theta b (a: min-variance on the face); accepted only if it
/// is nonnegative and KKT-consistent off the support.
inline bool polish_capped(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double cap,
                          const std::vector<Eigen::Index>& support, Eigen::VectorXd& out) {
    if (support.size() < 2) return false;
    const Eigen::MatrixXd S = sub_matrix(sigma, support);
    const Eigen::VectorXd m = sub_vector(mu, support);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.size());
    const Eigen::VectorXd u = ldlt.solve(ones);
    const Eigen::VectorXd v = ldlt.solve(m);
    const double A = ones.dot(u), B = ones.dot(v), C = m.dot(v);
    if (!(A > 0.0)) return false;
    const double spread = C - B * B / A; // b' Sigma b
    const double slack = cap * cap - 1.0 / A;
    if (!(spread > 0.0) || !(slack >= 0.0)) return false;
    const double theta = std::sqrt(slack / spread);
    const Eigen::VectorXd ws = u / A + theta * (v - (B / A) * u);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mu.size());
    for (std::size_t a = 0; a < support.size(); ++a) w[support[a]] = ws[static_cast<Eigen::Index>(a)];
    if (!kkt_holds(mu, sigma, 1.0 / (2.0 * theta), w, support)) return false;
    out = std::move(w);
    return true;
}

inline AllocationWeights make_allocation(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, Eigen::VectorXd w,
                                         bool feasible) {
    AllocationWeights a;
    a.weights = std::move(w);
    a.expected_yield = a.weights.dot(mu);
    a.risk = portfolio_risk(sigma, a.weights);
    a.feasible = feasible;
    return a;
}

} // namespace detail

inline AllocationWeights solve_allocation(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double risk_cap,
                                          const AllocationOptions& opts = {}) {
    const auto V = mu.size();
    if (V == 0) throw ParameterError("allocation needs at least one variety");
    if (sigma.rows() != V || sigma.cols() != V) throw ParameterError("covariance dimensions do not match the mean");
    if (!(risk_cap > 0.0)) throw ParameterError("risk cap must be > 0");
    if (!mu.allFinite() || !sigma.allFinite()) throw ParameterError("allocation inputs must be finite");

    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < V; ++i)
        if (mu[i] > mu[best]) best = i;
    if (std::sqrt(std::max(0.0, sigma(best, best))) <= risk_cap)
        return detail::make_allocation(mu, sigma, Eigen::VectorXd::Unit(V, best), true);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    const double lambda_max = std::max(es.eigenvalues().maxCoeff(), std::numeric_limits<double>::min());
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(V, 1.0 / static_cast<double>(V));
    auto risk_of = [&](const Eigen::VectorXd& w) { return portfolio_risk(sigma, w); };

    const Eigen::VectorXd min_var =
        detail::solve_scalarized(Eigen::VectorXd::Zero(V), sigma, 1.0, lambda_max, uniform, opts);
    if (risk_of(min_var) > risk_cap) return detail::make_allocation(mu, sigma, min_var, false);

    double lo = opts.gamma_lo;
    double hi = opts.gamma_hi;
    Eigen::VectorXd w_lo = detail::solve_scalarized(mu, sigma, lo, lambda_max, Eigen::VectorXd::Unit(V, best), opts);
    if (risk_of(w_lo) <= risk_cap) return detail::make_allocation(mu, sigma, w_lo, true);

    Eigen::VectorXd w_hi = detail::solve_scalarized(mu, sigma, hi, lambda_max, min_var, opts);
    while (risk_of(w_hi) > risk_cap && hi < opts.gamma_ceiling) {
        lo = hi;
        w_lo = w_hi;
        hi *= 2.0;
        w_hi = detail::solve_scalarized(mu, sigma, hi, lambda_max, w_hi, opts);
    }
    if (risk_of(w_hi) > risk_cap) return detail::make_allocation(mu, sigma, min_var, true);

    for (int it = 0; it < opts.max_bisections; ++it) {
        const double mid = std::sqrt(lo * hi);
        Eigen::VectorXd w = detail::solve_scalarized(mu, sigma, mid, lambda_max, w_hi, opts);
        const double r = risk_of(w);
        if (r > risk_cap) {
            lo = mid;
            w_lo = std::move(w);
        } else {
            hi = mid;
            w_hi = std::move(w);
        }
        if (std::abs(r - risk_cap) <= opts.risk_tolerance * risk_cap || hi / lo < 1.0 + 1e-15) break;
    }

    // The bracket's feasible end, sharpened to the exact cap on its face.
    Eigen::VectorXd result = w_hi;
    for (const auto& candidate : {w_hi, w_lo}) {
        Eigen::VectorXd exact;
        if (detail::polish_capped(mu, sigma, risk_cap, detail::support_of(candidate), exact) &&
            risk_of(exact) <= risk_cap * (1.0 + 1e-12) && exact.dot(mu) >= result.dot(mu)) {
            result = std::move(exact);
            break;
        }
    }
    return detail::make_allocation(mu, sigma, result, true);
}

inline AllocationWeights solve_allocation(const YieldDistribution& dist, double risk_cap,
                                          const AllocationOptions& opts = {}) {
    auto a = solve_allocation(dist.mean, dist.covariance, risk_cap, opts);
    a.location_id = dist.location_id;
    a.varieties = dist.varieties;
    return a;
}

/// One frontier point per cap; caps must be positive and ascending.
inline std::vector<FrontierPoint> efficient_frontier(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                                     const std::vector<double>& risk_grid,
                                                     const AllocationOptions& opts = {}) {
    for (std::size_t i = 0; i < risk_grid.size(); ++i) {
        if (!(risk_grid[i] > 0.0)) throw ParameterError("frontier risk caps must be positive");
        if (i > 0 && !(risk_grid[i] > risk_grid[i - 1])) throw ParameterError("frontier risk caps must be ascending");
    }
    std::vector<FrontierPoint> out;
    for (double cap : risk_grid) {
        FrontierPoint p;
        p.risk_cap = cap;
        p.weights = solve_allocation(mu, sigma, cap, opts);
        p.risk = p.weights.risk;
        p.expected_yield = p.weights.expected_yield;
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<FrontierPoint> efficient_frontier(const YieldDistribution& dist, const std::vector<double>& risk_grid,
                                                     const AllocationOptions& opts = {}) {
    auto points = efficient_frontier(dist.mean, dist.covariance, risk_grid, opts);
    for (auto& p : points) {
        p.weights.location_id = dist.location_id;
        p.weights.varieties = dist.varieties;
    }
    return points;
}

/// Yield lost at `risk_cap` when only the restricted varieties may be planted.
inline double suboptimality_gap(const YieldDistribution& full, const YieldDistribution& restricted, double risk_cap,
                                const AllocationOptions& opts = {}) {
    for (const auto& v : restricted.varieties)
        if (std::find(full.varieties.begin(), full.varieties.end(), v) == full.varieties.end())
            throw ParameterError("restricted variety '" + v + "' is not in the full set");
    const double full_yield = solve_allocation(full, risk_cap, opts).expected_yield;
    const double restricted_yield = solve_allocation(restricted, risk_cap, opts).expected_yield;
    return std::max(0.0, full_yield - restricted_yield);
}

} // namespace seedplan
