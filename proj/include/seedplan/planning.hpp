#pragma once

// Demand aggregation over locations, top-M ranking, restricted re-allocation
// and the final drop-and-renormalize stocking rule.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seedplan/data.hpp"
#include "seedplan/errors.hpp"
#include "seedplan/portfolio.hpp"
#include "seedplan/risk.hpp"

namespace seedplan {

struct DemandVector {
    std::vector<std::string> varieties;
    Eigen::VectorXd demand;

    double total() const { return demand.sum(); }
};

struct PlanEntry {
    std::string variety_id;
    double proportion = 0.0;
};

struct DroppedVariety {
    std::string variety_id;
    double proportion = 0.0; // share at the time it was dropped
    std::string reason;
};

struct StockingPlan {
    std::vector<PlanEntry> entries;
    std::vector<DroppedVariety> dropped;
};

/// d_i = sum_l a_l w_li, matching allocations to locations by id.
inline DemandVector aggregate_demand(const std::vector<AllocationWeights>& allocations,
                                     const std::vector<RegionLocation>& locations) {
    if (allocations.size() != locations.size())
        throw ParameterError("expected one allocation per location (" + std::to_string(locations.size()) + "), got " +
                             std::to_string(allocations.size()));
    DemandVector d;
    if (allocations.empty()) return d;
    d.varieties = allocations.front().varieties;
    d.demand = Eigen::VectorXd::Zero(allocations.front().weights.size());
    std::map<std::string, double> area;
    for (const auto& l : locations) area[l.location_id] = l.area;
    std::map<std::string, int> used;
    for (const auto& a : allocations) {
        auto it = area.find(a.location_id);
        if (it == area.end()) throw ParameterError("allocation for unknown location '" + a.location_id + "'");
        if (++used[a.location_id] > 1) throw ParameterError("duplicate allocation for location '" + a.location_id + "'");
        if (a.varieties != d.varieties) throw ParameterError("allocations do not share one variety order");
        d.demand += it->second * a.weights;
    }
    return d;
}

/// Indices of the m largest demands, descending; ties go to the smaller id.
inline std::vector<std::string> rank_top_m(const DemandVector& d, int m) {
    if (m < 1 || m > static_cast<int>(d.varieties.size()))
        throw ParameterError("top-M must lie in [1, " + std::to_string(d.varieties.size()) + "]");
    std::vector<std::size_t> order(d.varieties.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = d.demand[static_cast<Eigen::Index>(a)], db = d.demand[static_cast<Eigen::Index>(b)];
        if (da != db) return da > db;
        return d.varieties[a] < d.varieties[b];
    });
    std::vector<std::string> out;
    for (int i = 0; i < m; ++i) out.push_back(d.varieties[order[static_cast<std::size_t>(i)]]);
    return out;
}

/// Re-solves every location over the candidate varieties only, at the same caps.
inline std::vector<AllocationWeights> reoptimize_restricted(const std::vector<std::string>& candidates,
                                                            const std::vector<YieldDistribution>& distributions,
                                                            const std::vector<double>& risk_caps,
                                                            const AllocationOptions& opts = {}) {
    if (distributions.size() != risk_caps.size()) throw ParameterError("need one risk cap per location");
    if (candidates.empty()) throw ParameterError("candidate list is empty");
    std::vector<AllocationWeights> out;
    out.reserve(distributions.size());
    for (std::size_t l = 0; l < distributions.size(); ++l)
        out.push_back(solve_allocation(distributions[l].restrict_to(candidates), risk_caps[l], opts));
    return out;
}

/// Normalizes demand to shares (keeping at most `max_entries` largest), then
/// repeatedly drops the smallest share below `min_share` and renormalizes.
inline StockingPlan finalize_plan(const DemandVector& d, double min_share = 0.10, std::size_t max_entries = 5) {
    if (!(min_share >= 0.0 && min_share < 1.0)) throw ParameterError("min_share must lie in [0, 1)");
    if (max_entries < 1) throw ParameterError("max_entries must be >= 1");
    if (d.varieties.empty() || !(d.demand.array() >= 0.0).all() || !(d.total() > 0.0))
        throw ParameterError("stocking plan needs nonnegative demand with a positive total");

    StockingPlan plan;
    std::vector<std::string> ranked = rank_top_m(d, static_cast<int>(d.varieties.size()));
    std::map<std::string, double> demand;
    for (std::size_t i = 0; i < d.varieties.size(); ++i) demand[d.varieties[i]] = d.demand[static_cast<Eigen::Index>(i)];
    const double total = d.total();
    if (ranked.size() > max_entries) {
        for (std::size_t i = max_entries; i < ranked.size(); ++i)
            plan.dropped.push_back({ranked[i], demand[ranked[i]] / total, "outside top " + std::to_string(max_entries)});
        ranked.resize(max_entries);
    }

    std::vector<PlanEntry> kept;
    for (const auto& v : ranked) kept.push_back({v, demand[v]});
    auto renormalize = [&] {
        double sum = 0.0;
        for (const auto& e : kept) sum += e.proportion;
        for (auto& e : kept) e.proportion /= sum;
    };
    renormalize();
    // `kept` stays sorted by share (descending, id ascending on ties): the last entry is the smallest.
    while (kept.size() > 1 && (kept.back().proportion < min_share || kept.back().proportion <= 0.0)) {
        const auto& e = kept.back();
        plan.dropped.push_back({e.variety_id, e.proportion, "share below minimum"});
        kept.pop_back();
        renormalize();
    }
    plan.entries = std::move(kept);
    return plan;
}

} // namespace seedplan
