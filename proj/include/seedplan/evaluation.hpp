#pragma once

// Model scoring, k-fold cross-validation and exhaustive grid search.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "seedplan/csv.hpp"
#include "seedplan/data.hpp"
#include "seedplan/mtl.hpp"

namespace seedplan {

namespace detail {

inline Eigen::VectorXd task_residual(const CoefficientMatrix& model, const Task& task) {
    const auto col = model.column_of(task.variety_id);
    if (task.X.cols() != model.W.rows()) throw ParameterError("dataset columns do not match the model");
    return task.X * model.W.col(col) - task.y;
}

} // namespace detail

/// Multi-task RMSE as used for model selection:
///   sum_i sqrt(sum_j r_ij^2) * n_i / sum_i n_i.
/// The inner root is over the task's residual sum of squares, not its mean.
inline double rmse_paper(const CoefficientMatrix& model, const MultiTaskDataset& data) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& task : data.tasks) {
        const double n = static_cast<double>(task.rows());
        num += std::sqrt(detail::task_residual(model, task).squaredNorm()) * n;
        den += n;
    }
    return den > 0.0 ? num / den : 0.0;
}

/// Pooled root mean squared error over every observation.
inline double rmse_standard(const CoefficientMatrix& model, const MultiTaskDataset& data) {
    double sse = 0.0;
    double n = 0.0;
    for (const auto& task : data.tasks) {
        sse += detail::task_residual(model, task).squaredNorm();
        n += static_cast<double>(task.rows());
    }
    return n > 0.0 ? std::sqrt(sse / n) : 0.0;
}

// ---------------------------------------------------------------------------
// Solver dispatch

/// One hyperparameter combination. Fields irrelevant to a formulation are ignored.
struct ParamSet {
    double lambda = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda_l = 0.0;
    double threshold = 0.9;
};

struct SolverSpec {
    Formulation formulation = Formulation::mean_regularized;
    SolverOptions options;
};

struct TrainedModel {
    FitResult fit;
    std::optional<TaskGraph> graph; // graph formulation only
};

/// Graph MTL with its graph bootstrapped from a lasso fit (lambda_L, threshold).
inline TrainedModel fit_graph_pipeline(const MultiTaskDataset& data, const ParamSet& params,
                                       const SolverOptions& opts, const FitResult* basic = nullptr) {
    TrainedModel out;
    std::optional<FitResult> own;
    if (!basic) {
        own = solve_multitask_lasso(data, params.lambda_l, opts);
        basic = &*own;
    }
    TaskGraph graph;
    graph.num_tasks = data.num_tasks();
    graph.threshold = params.threshold;
    if (data.num_tasks() >= 2) graph = build_task_graph(basic->model, params.threshold);
    out.fit = solve_graph_mtl(data, params.lambda1, params.lambda2, GraphIncidence::from_graph(graph), opts);
    out.fit.report.penalties["lambda_L"] = params.lambda_l;
    out.fit.report.penalties["threshold"] = params.threshold;
    out.fit.report.converged = out.fit.report.converged && basic->report.converged;
    out.graph = std::move(graph);
    return out;
}

inline TrainedModel fit_model(const MultiTaskDataset& data, const SolverSpec& spec, const ParamSet& params) {
    switch (spec.formulation) {
    case Formulation::least_squares: return {solve_least_squares(data), std::nullopt};
    case Formulation::lasso: return {solve_multitask_lasso(data, params.lambda_l, spec.options), std::nullopt};
    case Formulation::mean_regularized:
        return {solve_mean_regularized(data, params.lambda, spec.options), std::nullopt};
    case Formulation::graph: return fit_graph_pipeline(data, params, spec.options);
    }
    throw ParameterError("unknown formulation");
}

// ---------------------------------------------------------------------------
// Cross-validation

/// fold[i][j] = validation fold of row j of task i. Rows of each task are
/// shuffled and dealt round-robin, so a task with n_i >= k rows appears in
/// every fold and no task is concentrated in one fold.
using FoldAssignment = std::vector<std::vector<int>>;

inline FoldAssignment assign_folds(const MultiTaskDataset& data, int k, std::uint64_t seed) {
    if (k < 2) throw ParameterError("k-fold cross-validation needs k >= 2");
    std::mt19937_64 rng(seed);
    FoldAssignment folds;
    for (const auto& task : data.tasks) {
        std::vector<int> order(static_cast<std::size_t>(task.rows()));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> f(order.size());
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            f[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(k));
        folds.push_back(std::move(f));
    }
    return folds;
}

/// Training and validation sets for one fold. Tasks left without training
/// rows are dropped from both sides.
inline std::pair<MultiTaskDataset, MultiTaskDataset> fold_split(const MultiTaskDataset& data,
                                                                const FoldAssignment& folds, int fold) {
    MultiTaskDataset train, valid;
    train.feature_names = valid.feature_names = data.feature_names;
    for (std::size_t i = 0; i < data.tasks.size(); ++i) {
        std::vector<Eigen::Index> tr, va;
        for (std::size_t j = 0; j < folds[i].size(); ++j)
            (folds[i][j] == fold ? va : tr).push_back(static_cast<Eigen::Index>(j));
        if (tr.empty()) continue;
        train.tasks.push_back(select_rows(data.tasks[i], tr));
        if (!va.empty()) valid.tasks.push_back(select_rows(data.tasks[i], va));
    }
    return {std::move(train), std::move(valid)};
}

struct CvScore {
    std::vector<double> fold_scores;
    double mean = 0.0;
    bool converged = true;
};

inline CvScore k_fold_cv(const MultiTaskDataset& data, int k, const SolverSpec& spec, const ParamSet& params,
                         std::uint64_t seed) {
    const auto folds = assign_folds(data, k, seed);
    CvScore score;
    for (int f = 0; f < k; ++f) {
        auto [train, valid] = fold_split(data, folds, f);
        if (train.tasks.empty() || valid.tasks.empty()) continue;
        auto model = fit_model(train, spec, params);
        score.converged = score.converged && model.fit.report.converged;
        score.fold_scores.push_back(rmse_paper(model.fit.model, valid));
    }
    if (score.fold_scores.empty()) throw ParameterError("no fold produced a validation score");
    score.mean = std::accumulate(score.fold_scores.begin(), score.fold_scores.end(), 0.0) /
                 static_cast<double>(score.fold_scores.size());
    return score;
}

// ---------------------------------------------------------------------------
// Grid search

/// Candidate values per parameter name (lambda, lambda1, lambda2, lambda_L, t).
/// Combinations are enumerated with the first listed axis outermost.
struct ParamGrid {
    std::vector<std::pair<std::string, std::vector<double>>> axes;

    void validate() const {
        if (axes.empty()) throw ParameterError("parameter grid is empty");
        for (const auto& [name, values] : axes) {
            if (values.empty()) throw ParameterError("parameter grid axis '" + name + "' is empty");
            if (name != "lambda" && name != "lambda1" && name != "lambda2" && name != "lambda_L" && name != "t")
                throw ParameterError("unknown grid parameter '" + name + "'");
        }
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.second.size();
        return n;
    }

    std::vector<ParamSet> combinations(const ParamSet& base = {}) const {
        validate();
        std::vector<ParamSet> out;
        std::vector<std::size_t> idx(axes.size(), 0);
        while (true) {
            ParamSet p = base;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const double v = axes[a].second[idx[a]];
                const auto& name = axes[a].first;
                if (name == "lambda") p.lambda = v;
                else if (name == "lambda1") p.lambda1 = v;
                else if (name == "lambda2") p.lambda2 = v;
                else if (name == "lambda_L") p.lambda_l = v;
                else p.threshold = v;
            }
            out.push_back(p);
            std::size_t a = axes.size();
            while (a > 0) {
                --a;
                if (++idx[a] < axes[a].second.size()) break;
                idx[a] = 0;
                if (a == 0) return out;
            }
            if (axes.empty()) return out;
        }
    }
};

/// {1e-2, 1e-1, 1, 10, 100}
inline std::vector<double> decade_grid() { return {1e-2, 1e-1, 1.0, 10.0, 100.0}; }

/// Default grid for a formulation; graph axes put lambda_L and t outermost.
inline ParamGrid default_grid(Formulation f) {
    ParamGrid g;
    switch (f) {
    case Formulation::mean_regularized: g.axes = {{"lambda", decade_grid()}}; break;
    case Formulation::lasso: g.axes = {{"lambda_L", decade_grid()}}; break;
    case Formulation::graph: {
        std::vector<double> t;
        for (int i = 1; i <= 10; ++i) t.push_back(0.1 * i);
        g.axes = {{"lambda_L", decade_grid()}, {"t", t}, {"lambda1", decade_grid()}, {"lambda2", decade_grid()}};
        break;
    }
    case Formulation::least_squares: g.axes = {{"lambda", {0.0}}}; break;
    }
    return g;
}

struct CvRow {
    ParamSet params;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double seconds = 0.0;
    bool converged = true;
};

struct CvResult {
    std::vector<CvRow> rows; // grid order
    std::size_t best = 0;
    int folds = 0;

    const CvRow& best_row() const { return rows.at(best); }
};

/// Exhaustive; the first combination reaching the minimal mean score wins.
/// For the graph formulation the bootstrap lasso of each (fold, lambda_L) is
/// fitted once and reused across thresholds and graph penalties.
/// Parameters not on any grid axis are taken from `base`.
inline CvResult grid_search(const MultiTaskDataset& data, const SolverSpec& spec, const ParamGrid& grid, int k,
                            std::uint64_t seed, const ParamSet& base = {}) {
    grid.validate();
    const auto combos = grid.combinations(base);
    const auto folds = assign_folds(data, k, seed);

    std::vector<std::pair<MultiTaskDataset, MultiTaskDataset>> splits;
    for (int f = 0; f < k; ++f) splits.push_back(fold_split(data, folds, f));
    std::map<std::pair<int, double>, FitResult> lasso_cache;

    CvResult result;
    result.folds = k;
    for (const auto& params : combos) {
        const auto start = std::chrono::steady_clock::now();
        CvRow row;
        row.params = params;
        for (int f = 0; f < k; ++f) {
            const auto& [train, valid] = splits[static_cast<std::size_t>(f)];
            if (train.tasks.empty() || valid.tasks.empty()) continue;
            TrainedModel model;
            if (spec.formulation == Formulation::graph) {
                auto key = std::make_pair(f, params.lambda_l);
                auto it = lasso_cache.find(key);
                if (it == lasso_cache.end())
                    it = lasso_cache.emplace(key, solve_multitask_lasso(train, params.lambda_l, spec.options)).first;
                model = fit_graph_pipeline(train, params, spec.options, &it->second);
            } else {
                model = fit_model(train, spec, params);
            }
            row.converged = row.converged && model.fit.report.converged;
            row.fold_scores.push_back(rmse_paper(model.fit.model, valid));
        }
        if (row.fold_scores.empty()) throw ParameterError("no fold produced a validation score");
        row.mean = std::accumulate(row.fold_scores.begin(), row.fold_scores.end(), 0.0) /
                   static_cast<double>(row.fold_scores.size());
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (result.rows.empty() || row.mean < result.rows[result.best].mean) result.best = result.rows.size();
        result.rows.push_back(std::move(row));
    }
    return result;
}

/// cv_report.csv: parameters, per-fold scores, mean score, wall time.
inline void write_cv_report(const std::string& path, const CvResult& cv) {
    using csv::format_double;
    auto out = csv::open_output(path);
    out << "lambda,lambda1,lambda2,lambda_L,t";
    for (int f = 0; f < cv.folds; ++f) out << ",fold" << f + 1;
    out << ",mean_score,seconds\n";
    for (const auto& r : cv.rows) {
        out << format_double(r.params.lambda) << ',' << format_double(r.params.lambda1) << ','
            << format_double(r.params.lambda2) << ',' << format_double(r.params.lambda_l) << ','
            << format_double(r.params.threshold);
        for (int f = 0; f < cv.folds; ++f) {
            out << ',';
            if (static_cast<std::size_t>(f) < r.fold_scores.size()) out << format_double(r.fold_scores[static_cast<std::size_t>(f)]);
        }
        out << ',' << format_double(r.mean) << ',' << format_double(r.seconds) << '\n';
    }
}

} // namespace seedplan
