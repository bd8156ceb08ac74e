// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "seedplan/seedplan.hpp"

using namespace seedplan;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " (" << detail << ")" << std::endl;
    if (!ok) ++failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. MTL objectives against an exhaustive coefficient grid

// Loss of one task as a quadratic form: w'Aw - 2b'w + c.
struct Quadratic {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double c = 0.0;
};

struct OracleProblem {
    int V = 1;
    int P = 1; // coefficients per task
    std::vector<Quadratic> loss;
    Formulation formulation = Formulation::mean_regularized;
    double lambda = 0.0;  // mean-regularized weight, or lasso weight
    double lambda1 = 0.0; // graph smoothness
    double lambda2 = 0.0; // graph sparsity
    std::vector<std::pair<int, int>> edges;

    // coefficients stored task-major: w[i * P + j]
    double objective(const double* w) const {
        double f = 0.0;
        for (int i = 0; i < V; ++i) {
            const auto& q = loss[static_cast<std::size_t>(i)];
            const double* wi = w + i * P;
            for (int a = 0; a < P; ++a) {
                double row = 0.0;
                for (int b = 0; b < P; ++b) row += q.A(a, b) * wi[b];
                f += wi[a] * row - 2.0 * q.b[a] * wi[a];
            }
            f += q.c;
        }
        double l1 = 0.0;
        for (int k = 0; k < V * P; ++k) l1 += std::abs(w[k]);
        switch (formulation) {
        case Formulation::mean_regularized:
            for (int j = 0; j < P; ++j) {
                double mean = 0.0;
                for (int i = 0; i < V; ++i) mean += w[i * P + j];
                mean /= V;
                for (int i = 0; i < V; ++i) f += lambda * std::abs(w[i * P + j] - mean);
            }
            break;
        case Formulation::lasso: f += lambda * l1; break;
        case Formulation::graph:
            for (auto [a, b] : edges)
                for (int j = 0; j < P; ++j) {
                    const double d = w[a * P + j] - w[b * P + j];
                    f += lambda1 * d * d;
                }
            f += lambda2 * l1;
            break;
        default: break;
        }
        return f;
    }

    double objective(const Eigen::MatrixXd& W) const {
        std::vector<double> w(static_cast<std::size_t>(V * P));
        for (int i = 0; i < V; ++i)
            for (int j = 0; j < P; ++j) w[static_cast<std::size_t>(i * P + j)] = W(j, i);
        return objective(w.data());
    }
};

// Minimum over the lattice {-1000..1000}^d / 100. The outer d-1 axes are
// enumerated; the objective is convex along the last one, so its lattice
// minimum is reached by walking downhill from any start.
double grid_minimum(const OracleProblem& p) {
    const int d = p.V * p.P;
    constexpr int lo = -1000, hi = 1000;
    std::vector<int> k(static_cast<std::size_t>(d), lo);
    std::vector<double> w(static_cast<std::size_t>(d), lo / 100.0);
    auto eval = [&](int inner) {
        w.back() = inner / 100.0;
        return p.objective(w.data());
    };
    double best = std::numeric_limits<double>::infinity();
    int start = 0;
    while (true) {
        int at = start;
        double f = eval(at);
        if (at < hi && eval(at + 1) < f) {
            while (at < hi) {
                const double g = eval(at + 1);
                if (!(g < f)) break;
                f = g, ++at;
            }
        } else {
            while (at > lo) {
                const double g = eval(at - 1);
                if (!(g < f)) break;
                f = g, --at;
            }
        }
        best = std::min(best, f);
        start = at;
        int axis = d - 2;
        while (axis >= 0 && k[static_cast<std::size_t>(axis)] == hi) {
            k[static_cast<std::size_t>(axis)] = lo;
            w[static_cast<std::size_t>(axis)] = lo / 100.0;
            --axis;
        }
        if (axis < 0) break;
        ++k[static_cast<std::size_t>(axis)];
        w[static_cast<std::size_t>(axis)] = k[static_cast<std::size_t>(axis)] / 100.0;
    }
    return best;
}

struct OracleInstance {
    MultiTaskDataset data;
    int V = 1;
    int P = 1;
};

OracleInstance random_oracle_instance(int V, int P, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> rows(4, 12);
    std::uniform_real_distribution<double> shared(-2.0, 2.0);
    OracleInstance inst;
    inst.V = V;
    inst.P = P;
    Eigen::VectorXd common(P);
    for (int j = 0; j < P; ++j) common[j] = shared(rng);
    for (int j = 0; j + 1 < P; ++j) inst.data.feature_names.push_back("x" + std::to_string(j));
    inst.data.feature_names.push_back("intercept");
    for (int i = 0; i < V; ++i) {
        Task t;
        t.variety_id = "T" + std::to_string(i);
        const int n = rows(rng);
        t.X.resize(n, P);
        for (int r = 0; r < n; ++r) {
            for (int j = 0; j + 1 < P; ++j) t.X(r, j) = g(rng);
            t.X(r, P - 1) = 1.0;
        }
        Eigen::VectorXd w = common;
        for (int j = 0; j < P; ++j) w[j] += 0.7 * g(rng);
        t.y = t.X * w;
        for (int r = 0; r < n; ++r) t.y[r] += 0.5 * g(rng);
        inst.data.tasks.push_back(std::move(t));
    }
    return inst;
}

OracleProblem oracle_for(const OracleInstance& inst) {
    OracleProblem p;
    p.V = inst.V;
    p.P = inst.P;
    for (const auto& t : inst.data.tasks)
        p.loss.push_back({t.X.transpose() * t.X, t.X.transpose() * t.y, t.y.squaredNorm()});
    return p;
}

void criterion_solver_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> weight(0.1, 4.0);
    std::bernoulli_distribution coin(0.6);
    // shapes (V, p+1) with at most three coefficients in total
    const std::vector<std::pair<int, int>> shapes = {{3, 1}, {2, 1}, {1, 2}, {3, 1}, {2, 1}, {1, 1}, {3, 1}};
    double worst = 0.0, below = 0.0;
    int instances = 0, solves = 0;
    bool ok = true;
    for (int n = 0; n < 21; ++n) {
        const auto [V, P] = shapes[static_cast<std::size_t>(n) % shapes.size()];
        const auto inst = random_oracle_instance(V, P, rng);
        ++instances;

        OracleProblem mean = oracle_for(inst);
        mean.formulation = Formulation::mean_regularized;
        mean.lambda = weight(rng);
        const auto fm = solve_mean_regularized(inst.data, mean.lambda);

        OracleProblem graph = oracle_for(inst);
        graph.formulation = Formulation::graph;
        graph.lambda1 = weight(rng);
        graph.lambda2 = weight(rng);
        TaskGraph tg;
        tg.num_tasks = static_cast<std::size_t>(V);
        for (int a = 0; a < V; ++a)
            for (int b = a + 1; b < V; ++b)
                if (coin(rng)) {
                    tg.edges.emplace_back(a, b);
                    graph.edges.emplace_back(a, b);
                }
        const auto fg = solve_graph_mtl(inst.data, graph.lambda1, graph.lambda2, GraphIncidence::from_graph(tg));

        OracleProblem lasso = oracle_for(inst);
        lasso.formulation = Formulation::lasso;
        lasso.lambda = weight(rng);
        const auto fl = solve_multitask_lasso(inst.data, lasso.lambda);

        for (auto [prob, fit] : {std::pair{&mean, &fm}, std::pair{&graph, &fg}, std::pair{&lasso, &fl}}) {
            const double grid = grid_minimum(*prob);
            const double solver = prob->objective(fit->model.W);
            const double rel = (solver - grid) / std::max(std::abs(grid), 1e-12);
            worst = std::max(worst, rel);
            below = std::max(below, -rel);
            ok = ok && rel <= 1e-4 && fit->report.converged;
            ++solves;
        }
    }
    const double secs = seconds_since(t0);
    report(1, ok && secs < 60.0, "MTL solvers match the exhaustive coefficient grid",
           std::to_string(instances) + " instances, " + std::to_string(solves) + " solves, worst excess " + fmt(worst) +
               " relative, grid above solver by at most " + fmt(below) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// 2. Planted recovery

void criterion_recovery() {
    const auto t0 = Clock::now();
    SyntheticConfig cfg;
    cfg.num_varieties = 20;
    cfg.min_observations = 20;
    cfg.max_observations = 500;
    cfg.noise_std = 0.0;
    cfg.rng_seed = 2024;
    const auto syn = generate_synthetic(cfg);
    const auto data = assemble_tasks(syn.experiment, syn.normalizer);
    const auto [train, test] = split_train_test(data, 0.8, 1);
    const auto fit = solve_mean_regularized(train, 1e-8);
    const double err = (fit.model.W - syn.truth.W).cwiseAbs().maxCoeff();
    const double rmse = rmse_paper(fit.model, test);
    const double secs = seconds_since(t0);
    report(2, err <= 1e-3 && rmse <= 1e-3 && secs < 30.0, "planted coefficients recovered from noiseless data",
           "max-abs error " + fmt(err) + ", test rmse_paper " + fmt(rmse) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// 3. Shared structure helps small tasks

void criterion_mtl_benefit() {
    const auto t0 = Clock::now();
    int wins = 0;
    std::string scores;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SyntheticConfig cfg;
        cfg.num_varieties = 30;
        cfg.num_locations = 2;
        cfg.task_deviation_scale = 0.5;
        cfg.noise_std = 2.0;
        cfg.min_observations = 3;
        cfg.max_observations = 60;
        cfg.rng_seed = seed;
        const auto syn = generate_synthetic(cfg);
        const auto data = assemble_tasks(syn.experiment, syn.normalizer);
        const auto [train, test] = split_train_test(data, 0.8, seed);
        const SolverSpec spec{Formulation::mean_regularized, {}};
        const auto cv = grid_search(train, spec, default_grid(Formulation::mean_regularized), 5, seed);
        const auto mtl = fit_model(train, spec, cv.best_row().params);
        const auto ls = solve_least_squares(train);
        const double a = rmse_standard(mtl.fit.model, test);
        const double b = rmse_standard(ls.model, test);
        if (a < b) ++wins;
        if (!scores.empty()) scores += " ";
        scores += fmt(a) + "/" + fmt(b);
    }
    report(3, wins >= 8, "mean-regularized CV model beats per-task least squares",
           std::to_string(wins) + " of 10 seeds, test rmse_standard mtl/ls: " + scores + ", " +
               fmt(seconds_since(t0)) + " s");
}

// ---------------------------------------------------------------------------
// 4. Reductions between formulations

MultiTaskDataset random_dataset(int V, int P, int n_lo, int n_hi, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> rows(n_lo, n_hi);
    MultiTaskDataset d;
    for (int j = 0; j + 1 < P; ++j) d.feature_names.push_back("x" + std::to_string(j));
    d.feature_names.push_back("intercept");
    for (int i = 0; i < V; ++i) {
        Task t;
        t.variety_id = "T" + std::to_string(i);
        const int n = rows(rng);
        t.X.resize(n, P);
        for (Eigen::Index k = 0; k < t.X.size(); ++k) t.X.data()[k] = g(rng);
        t.X.col(P - 1).setOnes();
        t.y.resize(n);
        for (int r = 0; r < n; ++r) t.y[r] = 10 + 3 * g(rng);
        d.tasks.push_back(std::move(t));
    }
    return d;
}

void criterion_reductions() {
    std::mt19937_64 rng(404);
    double graph_gap = 0.0, ls_gap = 0.0, single_gap = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        const auto d = random_dataset(4, 4, 15, 40, rng);
        const double lam = 0.5 + rep;
        const auto g = solve_graph_mtl(d, 0.7, lam, GraphIncidence::empty(d.num_tasks()));
        const auto l = solve_multitask_lasso(d, lam);
        graph_gap = std::max(graph_gap, std::abs(objective_lasso(d, g.model.W, lam) - objective_lasso(d, l.model.W, lam)));

        // normal equations per task, full column rank by construction
        const auto m = solve_mean_regularized(d, 0.0);
        for (std::size_t i = 0; i < d.num_tasks(); ++i) {
            const auto& t = d.tasks[i];
            const Eigen::VectorXd beta = (t.X.transpose() * t.X).ldlt().solve(t.X.transpose() * t.y);
            ls_gap = std::max(ls_gap, (m.model.W.col(static_cast<Eigen::Index>(i)) - beta).cwiseAbs().maxCoeff());
        }

        const auto one = random_dataset(1, 4, 15, 40, rng);
        const auto base = solve_mean_regularized(one, 0.0).model.W;
        for (double lambda : {1e-3, 0.1, 10.0, 1e3})
            single_gap = std::max(single_gap, (solve_mean_regularized(one, lambda).model.W - base).cwiseAbs().maxCoeff());
    }
    report(4, graph_gap <= 1e-6 && ls_gap <= 1e-6 && single_gap <= 1e-6, "formulation reductions hold",
           "empty-graph objective diff " + fmt(graph_gap) + ", lambda=0 coefficient diff " + fmt(ls_gap) +
               ", V=1 lambda drift " + fmt(single_gap));
}

// ---------------------------------------------------------------------------
// 5-6. Allocation and frontier

struct AllocInstance {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
};

AllocInstance random_alloc_instance(int V, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    AllocInstance a;
    a.mu.resize(V);
    for (int i = 0; i < V; ++i) a.mu[i] = 100 + 10 * g(rng);
    Eigen::MatrixXd B(V, V + 2);
    for (Eigen::Index k = 0; k < B.size(); ++k) B.data()[k] = 3 * g(rng);
    a.sigma = B * B.transpose() / (V + 2) + 0.1 * Eigen::MatrixXd::Identity(V, V);
    return a;
}

// Best yield over the simplex lattice of step 0.01 under the cap; -inf if none fits.
double simplex_grid(const AllocInstance& a, double cap) {
    const int V = static_cast<int>(a.mu.size());
    constexpr int steps = 100;
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd w(V);
    std::vector<int> k(static_cast<std::size_t>(V), 0);
    auto visit = [&](auto&& self, int i, int left) -> void {
        if (i == V - 1) {
            k[static_cast<std::size_t>(i)] = left;
            for (int j = 0; j < V; ++j) w[j] = k[static_cast<std::size_t>(j)] / double(steps);
            if (w.dot(a.sigma * w) <= cap * cap) best = std::max(best, w.dot(a.mu));
            return;
        }
        for (int v = 0; v <= left; ++v) {
            k[static_cast<std::size_t>(i)] = v;
            self(self, i + 1, left - v);
        }
    };
    visit(visit, 0, steps);
    return best;
}

bool simplex_ok(const Eigen::VectorXd& w) {
    return w.minCoeff() >= 0.0 && w.maxCoeff() <= 1.0 && std::abs(w.sum() - 1.0) <= 1e-9;
}

void criterion_allocation() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<int> size(2, 4);
    std::uniform_real_distribution<double> frac(0.0, 1.0);
    int instances = 0, binding = 0;
    double worst = 0.0;
    bool ok = true;
    for (int n = 0; n < 30; ++n) {
        const auto inst = random_alloc_instance(size(rng), rng);
        // caps between the smallest and largest single-variety risk
        const double lo = inst.sigma.diagonal().cwiseSqrt().minCoeff();
        const double hi = inst.sigma.diagonal().cwiseSqrt().maxCoeff();
        const double cap = lo + frac(rng) * (hi - lo);
        const auto a = solve_allocation(inst.mu, inst.sigma, cap);
        const double grid = simplex_grid(inst, cap);
        ++instances;
        if (!std::isfinite(grid)) continue;
        if (a.risk > 0.99 * cap) ++binding;
        worst = std::max(worst, grid - a.expected_yield);
        ok = ok && a.feasible && simplex_ok(a.weights) && a.risk <= cap * (1 + 1e-4) &&
             a.expected_yield >= grid - 1e-3;
    }
    const double secs = seconds_since(t0);
    report(5, ok && secs < 60.0, "allocation matches the simplex grid and respects its constraints",
           std::to_string(instances) + " instances, " + std::to_string(binding) + " with an active cap, worst shortfall " +
               fmt(worst) + ", " + fmt(secs) + " s");
}

void criterion_frontier() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> size(2, 6);
    bool ok = true;
    int instances = 0, points = 0;
    for (int n = 0; n < 15; ++n) {
        const auto inst = random_alloc_instance(size(rng), rng);
        Eigen::Index top = 0;
        inst.mu.maxCoeff(&top);
        const double saturate = std::sqrt(inst.sigma(top, top));
        std::vector<double> grid;
        for (int k = 0; k <= 40; ++k) grid.push_back(0.2 + k * (1.5 * saturate) / 40);
        const auto f = efficient_frontier(inst.mu, inst.sigma, grid);
        ++instances;
        std::vector<double> y;
        for (const auto& p : f)
            if (p.weights.feasible) y.push_back(p.expected_yield);
        // infeasible caps form a prefix of the grid, so equal spacing is kept
        points += static_cast<int>(y.size());
        for (std::size_t k = 1; k < y.size(); ++k) ok = ok && y[k] >= y[k - 1] - 1e-6;
        for (std::size_t k = 1; k + 1 < y.size(); ++k) ok = ok && y[k] >= 0.5 * (y[k - 1] + y[k + 1]) - 1e-6;
        ok = ok && !y.empty() && std::abs(y.back() - inst.mu.maxCoeff()) <= 1e-9;
    }
    report(6, ok, "frontier is non-decreasing, concave and saturates at max mean",
           std::to_string(instances) + " instances, " + std::to_string(points) + " feasible points");
}

// ---------------------------------------------------------------------------
// 7-9. Closed-form rules

void criterion_risk_budget() {
    bool ok = risk_budget(0) == 0.1 && risk_budget(18) == 5.1;
    double worst = 0.0;
    for (int pi = 0; pi <= 18; ++pi) worst = std::max(worst, std::abs(risk_budget(pi) - (0.1 + pi * 5.0 / 18.0)));
    ok = ok && worst <= 1e-12;
    report(7, ok, "risk budget endpoints exact and linear in PI",
           "R(0)=" + fmt(risk_budget(0)) + ", R(18)=" + fmt(risk_budget(18)) + ", max deviation " + fmt(worst));
}

void criterion_metric() {
    MultiTaskDataset d;
    d.feature_names = {"intercept"};
    Task a;
    a.variety_id = "A";
    a.X = Eigen::MatrixXd::Ones(2, 1);
    a.y = Eigen::Vector2d(3, 4);
    Task b;
    b.variety_id = "B";
    b.X = Eigen::MatrixXd::Ones(1, 1);
    b.y = Eigen::VectorXd::Zero(1);
    d.tasks = {a, b};
    const double v = rmse_paper(zero_model(d), d);
    report(8, v == 10.0 / 3.0, "weighted RMSE hand example", "value " + std::to_string(v));
}

void criterion_plan_rules() {
    std::mt19937_64 rng(909);
    std::uniform_int_distribution<int> len(1, 12);
    std::exponential_distribution<double> e(1.0);
    bool ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        DemandVector d;
        const int V = len(rng);
        d.demand.resize(V);
        for (int i = 0; i < V; ++i) {
            d.varieties.push_back("V" + std::to_string(i));
            d.demand[i] = e(rng);
        }
        const auto plan = finalize_plan(d);
        double total = 0.0;
        for (const auto& en : plan.entries) {
            total += en.proportion;
            ok = ok && en.proportion >= 0.10 && en.proportion <= 1.0;
        }
        ok = ok && !plan.entries.empty() && plan.entries.size() <= 5 && std::abs(total - 1.0) <= 1e-9;
    }
    DemandVector pub;
    pub.varieties = {"V1", "V2", "V3", "V4"};
    pub.demand = Eigen::Vector4d(0.28, 0.20, 0.38, 0.14);
    const auto plan = finalize_plan(pub);
    bool same = plan.entries.size() == 4;
    for (const auto& en : plan.entries)
        for (std::size_t i = 0; i < 4; ++i)
            if (en.variety_id == pub.varieties[i])
                same = same && std::abs(en.proportion - pub.demand[static_cast<Eigen::Index>(i)]) <= 1e-12;
    report(9, ok && same, "stocking plan rules", "1000 random demand vectors, published 28/20/38/14 unchanged");
}

// ---------------------------------------------------------------------------
// 10. CLI determinism and desk-scale runtime

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SEEDPLAN_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void criterion_end_to_end() {
    const fs::path dir = fs::temp_directory_path() / ("seedplan_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "synthetic = true\n"
               "synthetic.varieties = 20\n"
               "synthetic.locations = 200\n"
               "synthetic.year_first = 2001\n"
               "synthetic.year_last = 2015\n"
               "synthetic.seed = 77\n"
               "seed = 5\n"
               "tune = true\n"
               "threads = 1\n";
    }
    const std::string base = "plan --config " + (dir / "run.cfg").string();
    const auto t0 = Clock::now();
    const int rc1 = run_cli(base + " --out " + (dir / "a").string());
    const double secs = seconds_since(t0);
    const int rc2 = run_cli(base + " --out " + (dir / "b").string());
    bool same = rc1 == 0 && rc2 == 0;
    int compared = 0;
    if (same) {
        for (const auto& entry : fs::directory_iterator(dir / "a")) {
            const auto name = entry.path().filename().string();
            // the CV report carries wall-clock timings
            if (entry.path().extension() != ".csv" || name == "cv_report.csv") continue;
            same = same && slurp(entry.path()) == slurp(dir / "b" / name);
            ++compared;
        }
    }
    fs::remove_all(dir);
    report(10, same && compared >= 8 && secs < 120.0, "plan is byte-deterministic and desk scale runs in time",
           "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", " + std::to_string(compared) +
               " CSV files identical, V=20 N=200 T=15 tuned run " + fmt(secs) + " s");
}

} // namespace

int main() {
    try {
        criterion_solver_oracle();
        criterion_recovery();
        criterion_mtl_benefit();
        criterion_reductions();
        criterion_allocation();
        criterion_frontier();
        criterion_risk_budget();
        criterion_metric();
        criterion_plan_rules();
        criterion_end_to_end();
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
