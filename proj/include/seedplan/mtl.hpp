#pragma once

// Multi-task linear regression solvers.
//
// Every task i contributes the squared loss ||X_i b_i - y_i||^2. On top of the
// summed loss the solvers add one of three penalties on W = [b_1 ... b_V]:
//
//   lasso             lambda_L * ||W||_1                     (elementwise)
//   mean-regularized  lambda * sum_i ||b_i - mean_j b_j||_1
//   graph             lambda1 * ||W G||_F^2 + lambda2 * ||W||_1
//
// The lasso and graph problems are solved by monotone FISTA with backtracking;
// the mean-regularized problem by ADMM on the split Z = W C, C = I - 11'/V.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "seedplan/data.hpp"
#include "seedplan/errors.hpp"

namespace seedplan {

/// Column i holds the coefficients of task (variety) i; rows follow the
/// design-matrix column order, intercept last.
struct CoefficientMatrix {
    Eigen::MatrixXd W;
    std::vector<std::string> varieties;
    std::vector<std::string> features;

    Eigen::Index num_tasks() const noexcept { return W.cols(); }

    std::optional<Eigen::Index> find(std::string_view variety) const {
        for (std::size_t i = 0; i < varieties.size(); ++i)
            if (varieties[i] == variety) return static_cast<Eigen::Index>(i);
        return std::nullopt;
    }

    Eigen::Index column_of(std::string_view variety) const {
        if (auto i = find(variety)) return *i;
        throw ParameterError("variety '" + std::string(variety) + "' is not in the model");
    }
};

inline CoefficientMatrix zero_model(const MultiTaskDataset& data) {
    CoefficientMatrix m;
    m.W = Eigen::MatrixXd::Zero(data.num_columns(), static_cast<Eigen::Index>(data.num_tasks()));
    for (const auto& t : data.tasks) m.varieties.push_back(t.variety_id);
    m.features = data.feature_names;
    return m;
}

struct TaskGraph {
    std::size_t num_tasks = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges; // i < j, sorted
    double threshold = 0.0;
};

/// Signed V x E incidence matrix: column e = (i, j) has +1 at row i, -1 at row j,
/// so ||W G||_F^2 is the sum of ||b_i - b_j||^2 over edges.
struct GraphIncidence {
    Eigen::SparseMatrix<double> G;

    static GraphIncidence from_graph(const TaskGraph& graph) {
        GraphIncidence inc;
        const auto V = static_cast<Eigen::Index>(graph.num_tasks);
        const auto E = static_cast<Eigen::Index>(graph.edges.size());
        inc.G.resize(V, E);
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(2 * graph.edges.size());
        for (Eigen::Index e = 0; e < E; ++e) {
            auto [i, j] = graph.edges[static_cast<std::size_t>(e)];
            if (i == j || i >= graph.num_tasks || j >= graph.num_tasks) throw ParameterError("invalid graph edge");
            entries.emplace_back(static_cast<Eigen::Index>(std::min(i, j)), e, 1.0);
            entries.emplace_back(static_cast<Eigen::Index>(std::max(i, j)), e, -1.0);
        }
        inc.G.setFromTriplets(entries.begin(), entries.end());
        return inc;
    }

    static GraphIncidence empty(std::size_t num_tasks) {
        TaskGraph g;
        g.num_tasks = num_tasks;
        return from_graph(g);
    }

    Eigen::Index num_tasks() const noexcept { return G.rows(); }
    Eigen::Index num_edges() const noexcept { return G.cols(); }

    /// G G' (the graph Laplacian), dense.
    Eigen::MatrixXd laplacian() const { return Eigen::MatrixXd(G * G.transpose()); }
};

struct SolverOptions {
    int max_iterations = 10000;
    double tolerance = 1e-6;      // relative objective change
    double admm_rho = 1.0;
    bool adapt_rho = true;        // residual balancing
    double backtracking = 0.5;    // step shrink factor in (0, 1)

    void validate() const {
        if (max_iterations < 1) throw ParameterError("max_iterations must be >= 1");
        if (!(tolerance > 0.0)) throw ParameterError("tolerance must be > 0");
        if (!(admm_rho > 0.0)) throw ParameterError("ADMM penalty rho must be > 0");
        if (!(backtracking > 0.0 && backtracking < 1.0)) throw ParameterError("backtracking factor must lie in (0, 1)");
    }
};

enum class Formulation { least_squares, lasso, mean_regularized, graph };

inline std::string to_string(Formulation f) {
    switch (f) {
    case Formulation::least_squares: return "least_squares";
    case Formulation::lasso: return "lasso";
    case Formulation::mean_regularized: return "mean_regularized";
    case Formulation::graph: return "graph";
    }
    return "unknown";
}

struct SolverReport {
    Formulation formulation = Formulation::least_squares;
    std::map<std::string, double> penalties;
    int iterations = 0;
    bool converged = true;
    double objective = 0.0;
    double initial_objective = 0.0;
    std::vector<double> trace; // objective after each outer iteration
};

struct FitResult {
    CoefficientMatrix model;
    SolverReport report;
};

// ---------------------------------------------------------------------------
// Objectives

inline void check_shape(const MultiTaskDataset& data, const Eigen::MatrixXd& W) {
    if (W.cols() != static_cast<Eigen::Index>(data.num_tasks()) || W.rows() != data.num_columns())
        throw ParameterError("coefficient matrix shape does not match the dataset");
}

inline double squared_loss(const MultiTaskDataset& data, const Eigen::MatrixXd& W) {
    check_shape(data, W);
    double total = 0.0;
    for (std::size_t i = 0; i < data.num_tasks(); ++i) {
        const auto& t = data.tasks[i];
        total += (t.X * W.col(static_cast<Eigen::Index>(i)) - t.y).squaredNorm();
    }
    return total;
}

inline Eigen::MatrixXd center_columns(const Eigen::MatrixXd& W) {
    return W.colwise() - W.rowwise().mean();
}

inline double mean_penalty(const Eigen::MatrixXd& W) { return center_columns(W).cwiseAbs().sum(); }

inline double graph_penalty(const Eigen::MatrixXd& W, const GraphIncidence& G) {
    if (G.num_tasks() != W.cols()) throw ParameterError("graph size does not match the number of tasks");
    return (W * G.G).squaredNorm();
}

inline double objective_lasso(const MultiTaskDataset& data, const Eigen::MatrixXd& W, double lambda_l) {
    return squared_loss(data, W) + lambda_l * W.cwiseAbs().sum();
}

inline double objective_mean_regularized(const MultiTaskDataset& data, const Eigen::MatrixXd& W, double lambda) {
    return squared_loss(data, W) + lambda * mean_penalty(W);
}

inline double objective_graph(const MultiTaskDataset& data, const Eigen::MatrixXd& W, double lambda1, double lambda2,
                              const GraphIncidence& G) {
    return squared_loss(data, W) + lambda1 * graph_penalty(W, G) + lambda2 * W.cwiseAbs().sum();
}

/// Penalty weights for objective_value; unused fields are ignored.
struct Penalties {
    double lambda = 0.0;   // mean-regularized
    double lambda1 = 0.0;  // graph smoothness
    double lambda2 = 0.0;  // graph sparsity
    double lambda_l = 0.0; // lasso
    const GraphIncidence* graph = nullptr;
};

inline double objective_value(Formulation f, const MultiTaskDataset& data, const Eigen::MatrixXd& W,
                              const Penalties& p) {
    switch (f) {
    case Formulation::least_squares: return squared_loss(data, W);
    case Formulation::lasso: return objective_lasso(data, W, p.lambda_l);
    case Formulation::mean_regularized: return objective_mean_regularized(data, W, p.lambda);
    case Formulation::graph: {
        if (p.graph) return objective_graph(data, W, p.lambda1, p.lambda2, *p.graph);
        return objective_lasso(data, W, p.lambda2);
    }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Proximal operators

inline double soft_threshold(double x, double t) noexcept {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

inline Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& X, double t) {
    return X.unaryExpr([t](double v) { return soft_threshold(v, t); });
}

// ---------------------------------------------------------------------------
// Least squares

/// Independent per-task least squares; minimum-norm when X_i is rank deficient.
inline FitResult solve_least_squares(const MultiTaskDataset& data) {
    if (data.tasks.empty()) throw ParameterError("dataset has no tasks");
    FitResult out;
    out.model = zero_model(data);
    out.report.initial_objective = squared_loss(data, out.model.W);
    for (std::size_t i = 0; i < data.num_tasks(); ++i) {
        const auto& t = data.tasks[i];
        out.model.W.col(static_cast<Eigen::Index>(i)) = t.X.completeOrthogonalDecomposition().solve(t.y);
    }
    out.report.formulation = Formulation::least_squares;
    out.report.objective = squared_loss(data, out.model.W);
    out.report.trace = {out.report.objective};
    return out;
}

namespace detail {

inline bool objective_settled(double previous, double current, double floor_scale, double tol) {
    return std::abs(previous - current) <= tol * std::max(std::abs(previous), floor_scale);
}

// Monotone FISTA for  sum_i ||X_i b_i - y_i||^2 + lambda1 ||W G||_F^2 + lambda2 ||W||_1,
// with function-value restart and backtracking on the Lipschitz estimate.
inline FitResult fista_graph(const MultiTaskDataset& data, double lambda1, double lambda2,
                             const Eigen::MatrixXd* laplacian, const SolverOptions& opts) {
    const auto V = static_cast<Eigen::Index>(data.num_tasks());
    const bool coupled = laplacian != nullptr && lambda1 > 0.0 && laplacian->size() > 0;

    auto smooth = [&](const Eigen::MatrixXd& W) {
        double f = squared_loss(data, W);
        if (coupled) f += lambda1 * (W * (*laplacian) * W.transpose()).trace();
        return f;
    };
    auto gradient = [&](const Eigen::MatrixXd& W) {
        Eigen::MatrixXd g(W.rows(), W.cols());
        for (Eigen::Index i = 0; i < V; ++i) {
            const auto& t = data.tasks[static_cast<std::size_t>(i)];
            g.col(i) = 2.0 * t.X.transpose() * (t.X * W.col(i) - t.y);
        }
        if (coupled) g.noalias() += 2.0 * lambda1 * W * (*laplacian);
        return g;
    };
    auto l1 = [&](const Eigen::MatrixXd& W) { return lambda2 * W.cwiseAbs().sum(); };

    // The loss part is block diagonal, so its Lipschitz constant is exact;
    // backtracking picks up the graph coupling.
    double L = 0.0;
    for (const auto& t : data.tasks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.X.transpose() * t.X, Eigen::EigenvaluesOnly);
        L = std::max(L, 2.0 * es.eigenvalues().maxCoeff());
    }
    if (!(L > 0.0)) L = 1.0;

    FitResult out;
    out.model = zero_model(data);
    Eigen::MatrixXd x = out.model.W;
    Eigen::MatrixXd x_prev = x;
    Eigen::MatrixXd y = x;
    double t = 1.0;
    double F = smooth(x) + l1(x);
    const double floor_scale = std::max(1e-10 * F, std::numeric_limits<double>::min());
    out.report.initial_objective = F;
    out.report.converged = false;

    int k = 0;
    for (; k < opts.max_iterations; ++k) {
        const Eigen::MatrixXd g = gradient(y);
        const double fy = smooth(y);
        Eigen::MatrixXd z;
        double fz = 0.0;
        for (int bt = 0; bt < 200; ++bt) {
            z = soft_threshold(y - g / L, lambda2 / L);
            fz = smooth(z);
            const Eigen::MatrixXd d = z - y;
            const double model = fy + (g.array() * d.array()).sum() + 0.5 * L * d.squaredNorm();
            if (fz <= model + 1e-12 * std::abs(fy)) break;
            L /= opts.backtracking;
        }
        const double Fz = fz + l1(z);

        x_prev = x;
        const double F_prev = F;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (Fz <= F) {
            x = z;
            F = Fz;
            y = x + ((t - 1.0) / t_next) * (x - x_prev);
            t = t_next;
        } else {
            // rejected step: restart momentum from the current iterate
            y = x;
            t = 1.0;
            out.report.trace.push_back(F);
            continue;
        }
        out.report.trace.push_back(F);

        const double step = (x - x_prev).cwiseAbs().maxCoeff();
        const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
        if (objective_settled(F_prev, F, floor_scale, opts.tolerance) && step <= opts.tolerance * scale) {
            out.report.converged = true;
            ++k;
            break;
        }
    }
    out.model.W = x;
    out.report.iterations = k;
    out.report.objective = F;
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Public solvers

inline FitResult solve_multitask_lasso(const MultiTaskDataset& data, double lambda_l, const SolverOptions& opts = {}) {
    if (data.tasks.empty()) throw ParameterError("dataset has no tasks");
    if (!(lambda_l >= 0.0)) throw ParameterError("lambda_L must be >= 0");
    opts.validate();
    auto out = detail::fista_graph(data, 0.0, lambda_l, nullptr, opts);
    out.report.formulation = Formulation::lasso;
    out.report.penalties = {{"lambda_L", lambda_l}};
    return out;
}

inline FitResult solve_graph_mtl(const MultiTaskDataset& data, double lambda1, double lambda2,
                                 const GraphIncidence& G, const SolverOptions& opts = {}) {
    if (data.tasks.empty()) throw ParameterError("dataset has no tasks");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ParameterError("graph penalties must be >= 0");
    if (G.num_tasks() != static_cast<Eigen::Index>(data.num_tasks()))
        throw ParameterError("graph size does not match the number of tasks");
    opts.validate();
    const Eigen::MatrixXd lap = G.laplacian();
    auto out = detail::fista_graph(data, lambda1, lambda2, G.num_edges() > 0 ? &lap : nullptr, opts);
    out.report.formulation = Formulation::graph;
    out.report.penalties = {{"lambda1", lambda1}, {"lambda2", lambda2}};
    out.report.objective = objective_graph(data, out.model.W, lambda1, lambda2, G);
    return out;
}

/// ADMM on  min_W loss(W) + lambda ||Z||_1  s.t.  Z = W C.
///
/// W-step: with D = Z - U, each column solves (2A_i + rho I) b_i - rho bbar = 2 c_i + rho (D_i - Dbar),
/// where A_i = X_i'X_i, c_i = X_i'y_i and bbar is the column mean; bbar itself comes from one
/// (p+1)x(p+1) system, so the step costs V small solves.
inline FitResult solve_mean_regularized(const MultiTaskDataset& data, double lambda, const SolverOptions& opts = {}) {
    if (data.tasks.empty()) throw ParameterError("dataset has no tasks");
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
    opts.validate();

    // Penalty off or identically zero: the minimizer is per-task least squares.
    if (lambda == 0.0 || data.num_tasks() == 1) {
        auto out = solve_least_squares(data);
        out.report.formulation = Formulation::mean_regularized;
        out.report.penalties = {{"lambda", lambda}};
        out.report.objective = objective_mean_regularized(data, out.model.W, lambda);
        return out;
    }

    const auto V = static_cast<Eigen::Index>(data.num_tasks());
    const auto P = data.num_columns();
    std::vector<Eigen::MatrixXd> gram(static_cast<std::size_t>(V));
    Eigen::MatrixXd xty(P, V);
    for (Eigen::Index i = 0; i < V; ++i) {
        const auto& t = data.tasks[static_cast<std::size_t>(i)];
        gram[static_cast<std::size_t>(i)] = t.X.transpose() * t.X;
        xty.col(i) = t.X.transpose() * t.y;
    }

    double rho = opts.admm_rho;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> blocks(static_cast<std::size_t>(V));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> coupling;
    auto factor = [&] {
        Eigen::MatrixXd sum_inv = Eigen::MatrixXd::Zero(P, P);
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(P, P);
        for (Eigen::Index i = 0; i < V; ++i) {
            auto& b = blocks[static_cast<std::size_t>(i)];
            b.compute(2.0 * gram[static_cast<std::size_t>(i)] + rho * I);
            sum_inv += b.solve(I);
        }
        coupling.compute(I - (rho / static_cast<double>(V)) * sum_inv);
    };
    factor();

    FitResult out;
    out.model = zero_model(data);
    Eigen::MatrixXd W = out.model.W;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(P, V);
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(P, V);
    Eigen::MatrixXd rhs(P, V);

    double best = objective_mean_regularized(data, W, lambda);
    const double floor_scale = std::max(1e-10 * best, std::numeric_limits<double>::min());
    out.report.initial_objective = best;
    out.report.converged = false;
    double F_prev = best;
    const double abs_tol = 1e-3 * opts.tolerance;
    const double sqrt_n = std::sqrt(static_cast<double>(P * V));
    constexpr int kAdaptIterations = 1000;

    int k = 0;
    for (; k < opts.max_iterations; ++k) {
        const Eigen::MatrixXd D = Z - U;
        const Eigen::MatrixXd Dc = center_columns(D);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(P);
        for (Eigen::Index i = 0; i < V; ++i) {
            rhs.col(i) = 2.0 * xty.col(i) + rho * Dc.col(i);
            acc += blocks[static_cast<std::size_t>(i)].solve(rhs.col(i));
        }
        const Eigen::VectorXd mean = coupling.solve(acc / static_cast<double>(V));
        for (Eigen::Index i = 0; i < V; ++i)
            W.col(i) = blocks[static_cast<std::size_t>(i)].solve(rhs.col(i) + rho * mean);

        const Eigen::MatrixXd WC = center_columns(W);
        const Eigen::MatrixXd Z_old = Z;
        Z = soft_threshold(WC + U, lambda / rho);
        U += WC - Z;

        const double r_norm = (WC - Z).norm();
        const double s_norm = rho * center_columns(Z - Z_old).norm();

        const double F = objective_mean_regularized(data, W, lambda);
        out.report.trace.push_back(F);
        if (F < best) {
            best = F;
            out.model.W = W;
        }

        const double eps_pri = sqrt_n * abs_tol + opts.tolerance * std::max(WC.norm(), Z.norm());
        const double eps_dual = sqrt_n * abs_tol + opts.tolerance * rho * center_columns(U).norm();
        if (r_norm <= eps_pri && s_norm <= eps_dual &&
            detail::objective_settled(F_prev, F, floor_scale, opts.tolerance)) {
            out.report.converged = true;
            ++k;
            break;
        }
        F_prev = F;

        if (opts.adapt_rho && k < kAdaptIterations) {
            if (r_norm > 10.0 * s_norm) {
                rho *= 2.0;
                U /= 2.0;
                factor();
            } else if (s_norm > 10.0 * r_norm) {
                rho /= 2.0;
                U *= 2.0;
                factor();
            }
        }
    }
    out.report.formulation = Formulation::mean_regularized;
    out.report.penalties = {{"lambda", lambda}};
    out.report.iterations = k;
    out.report.objective = best;
    return out;
}

// ---------------------------------------------------------------------------
// Task graph

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double va = (da * da).sum();
    const double vb = (db * db).sum();
    if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (da * db).sum() / std::sqrt(va * vb);
}

/// Edge (i, j) iff the correlation of b_i and b_j strictly exceeds the threshold.
inline TaskGraph build_task_graph(const CoefficientMatrix& basic, double threshold) {
    if (basic.num_tasks() < 2) throw ParameterError("task graph needs at least two tasks");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ParameterError("correlation threshold must lie in [0, 1]");
    TaskGraph g;
    g.num_tasks = static_cast<std::size_t>(basic.num_tasks());
    g.threshold = threshold;
    for (Eigen::Index i = 0; i < basic.num_tasks(); ++i)
        for (Eigen::Index j = i + 1; j < basic.num_tasks(); ++j) {
            const double r = pearson(basic.W.col(i), basic.W.col(j));
            if (!std::isnan(r) && r > threshold)
                g.edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    return g;
}

// ---------------------------------------------------------------------------
// Prediction

/// b_i . (features, 1) for normalized features in design-column order.
inline double predict_yield(const CoefficientMatrix& model, const Eigen::VectorXd& features,
                            std::string_view variety) {
    const Eigen::Index col = model.column_of(variety);
    if (features.size() + 1 != model.W.rows()) throw ParameterError("feature vector length does not match the model");
    const auto p = features.size();
    return model.W.col(col).head(p).dot(features) + model.W(p, col);
}

/// Predictions of every variety for one normalized feature vector.
inline Eigen::VectorXd predict_all(const CoefficientMatrix& model, const Eigen::VectorXd& features) {
    if (features.size() + 1 != model.W.rows()) throw ParameterError("feature vector length does not match the model");
    const auto p = features.size();
    return model.W.topRows(p).transpose() * features + model.W.row(p).transpose();
}

/// Re-expresses coefficients fitted on `from`-normalized features so they
/// produce identical predictions on `to`-normalized features.
inline CoefficientMatrix rebase_coefficients(const CoefficientMatrix& model, const NormalizationSpec& from,
                                             const NormalizationSpec& to) {
    if (from.size() != to.size() || static_cast<Eigen::Index>(from.size()) + 1 != model.W.rows())
        throw ParameterError("normalizers do not match the model");
    CoefficientMatrix out = model;
    const auto p = static_cast<Eigen::Index>(from.size());
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto& f = from.ranges()[static_cast<std::size_t>(k)];
        const auto& t = to.ranges()[static_cast<std::size_t>(k)];
        if (f.constant()) {
            out.W.row(k).setZero();
            continue;
        }
        const double width = f.max - f.min;
        out.W.row(p) += model.W.row(k) * ((t.min - f.min) / width);
        out.W.row(k) = t.constant() ? Eigen::RowVectorXd::Zero(model.W.cols())
                                    : Eigen::RowVectorXd(model.W.row(k) * ((t.max - t.min) / width));
    }
    return out;
}

} // namespace seedplan
