// seedplan: batch front end for estimation, allocation and stocking plans.

#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "seedplan/seedplan.hpp"

namespace {

using namespace seedplan;

constexpr int kExitError = 1;
constexpr int kExitNonConverged = 3;

struct Flags {
    std::string config;
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Registers the shared flags; each one records a `key = value` override that
// is applied on top of the config file.
void add_common(CLI::App* cmd, Flags& flags) {
    cmd->add_option("--config", flags.config, "key = value configuration file");
    auto record = [&flags](std::string key) {
        return [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); };
    };
    cmd->add_option_function<std::string>("--seed", record("seed"), "seed for splits, folds and the generator");
    cmd->add_option_function<std::string>("--solver", record("solver"), "mean or graph")
        ->check(CLI::IsMember({"mean", "graph"}));
    cmd->add_option_function<std::string>("--lambda", record("lambda"), "mean-regularization weight");
    cmd->add_option_function<std::string>("--lambda1", record("lambda1"), "graph smoothness weight");
    cmd->add_option_function<std::string>("--lambda2", record("lambda2"), "graph sparsity weight");
    cmd->add_option_function<std::string>("--lambda-l", record("lambda_L"), "lasso weight for the task graph");
    cmd->add_option_function<std::string>("--threshold", record("threshold"), "correlation threshold for graph edges");
    cmd->add_option_function<std::string>("--rmin", record("rmin"), "risk budget at PI 0");
    cmd->add_option_function<std::string>("--rmax", record("rmax"), "risk budget at the maximum PI");
    cmd->add_option_function<std::string>("--top-m", record("top_m"), "candidate list length");
    cmd->add_option_function<std::string>("--min-share", record("min_share"), "smallest share kept in a plan");
    cmd->add_option_function<std::string>("--threads", record("threads"), "worker threads for per-location stages");
    cmd->add_option_function<std::string>("--out", record("out"), "output directory");
    cmd->add_flag_callback("--allow-nonconverged", [&flags] { flags.overrides.emplace_back("allow_nonconverged", "true"); },
                           "exit 0 even if a solver hit its iteration limit");
}

RunConfig resolve(const Flags& flags) {
    RunConfig cfg = flags.config.empty() ? RunConfig{} : load_config(flags.config);
    for (const auto& [k, v] : flags.overrides) {
        apply_setting(cfg, k, v);
        if (k == "seed" && cfg.synthetic) apply_setting(cfg, "synthetic.seed", v);
    }
    return cfg;
}

int convergence_exit(bool converged, const RunConfig& cfg) {
    if (converged) return 0;
    std::cerr << "warning: solver did not converge within " << cfg.solver.max_iterations << " iterations\n";
    return cfg.allow_nonconverged ? 0 : kExitNonConverged;
}

void print_metrics(const TrainingOutcome& t) {
    for (const auto& [k, v] : t.metrics) std::cout << k << " = " << csv::format_double(v) << "\n";
}

std::string describe(const ParamSet& p, Formulation f) {
    using csv::format_double;
    if (f == Formulation::graph)
        return "lambda_L=" + format_double(p.lambda_l) + " t=" + format_double(p.threshold) +
               " lambda1=" + format_double(p.lambda1) + " lambda2=" + format_double(p.lambda2);
    if (f == Formulation::lasso) return "lambda_L=" + format_double(p.lambda_l);
    return "lambda=" + format_double(p.lambda);
}

int cmd_simulate(RunConfig cfg) {
    if (!cfg.synthetic) cfg.synthetic = SyntheticConfig{};
    cfg.synthetic->validate();
    const auto data = run_stage("data", [&] { return generate_synthetic(*cfg.synthetic); });
    write_synthetic(cfg.out_dir, data);
    std::cout << (std::filesystem::path(cfg.out_dir) / "true_coefficients.csv").string() << "\n";
    return 0;
}

int cmd_train(RunConfig cfg, bool tune) {
    cfg.tune = tune;
    cfg.validate();
    const Inputs in = load_inputs(cfg, true, false);
    const TrainingOutcome t = train_model(in.experiment, cfg);
    {
        BundleWriter out(cfg.out_dir);
        write_training(out, t);
        out.commit();
    }
    if (t.cv) {
        std::cout << "best: " << describe(t.params, cfg.formulation)
                  << " mean_score=" << csv::format_double(t.cv->best_row().mean) << "\n";
        std::cout << (std::filesystem::path(cfg.out_dir) / "cv_report.csv").string() << "\n";
    }
    print_metrics(t);
    return convergence_exit(t.model.fit.report.converged, cfg);
}

int cmd_plan(const RunConfig& cfg) {
    const PipelineResult res = run_pipeline(cfg);
    run_stage("report", [&] { write_plan_bundle(res, cfg); });
    if (res.training) print_metrics(*res.training);
    for (const auto& e : res.plan.entries) std::cout << e.variety_id << " " << csv::format_double(e.proportion) << "\n";
    return convergence_exit(res.converged(), cfg);
}

int cmd_frontier(const RunConfig& cfg) {
    cfg.validate();
    const Inputs in = load_inputs(cfg, cfg.model_path.empty(), true);
    PipelineResult res;
    obtain_model(cfg, in, res);
    project_locations(cfg, in.region, res);
    const std::size_t f = frontier_index(cfg, res);
    res.frontier_location = res.locations[f].location_id;
    run_stage("allocation", [&] { res.frontier = efficient_frontier(res.distributions[f], cfg.risk_grid()); });
    run_stage("report", [&] {
        BundleWriter out(cfg.out_dir);
        if (res.training) write_training(out, *res.training);
        out.text("frontier.csv", frontier_csv(res.frontier, res.model.varieties));
        out.text("frontier.svg", frontier_svg(res.frontier, {}, res.distributions[f], res.frontier_location));
        out.commit();
    });
    for (const auto& p : res.frontier)
        std::cout << csv::format_double(p.risk_cap) << " " << csv::format_double(p.expected_yield) << "\n";
    return convergence_exit(res.converged(), cfg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Seed stocking planner: yield models, per-location allocation and stocking plans"};
    app.require_subcommand(1);
    Flags flags;
    auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset with a planted model");
    auto* train = app.add_subcommand("train", "fit the yield model and report RMSE");
    auto* tune = app.add_subcommand("tune", "grid-search hyperparameters by k-fold CV");
    auto* plan = app.add_subcommand("plan", "run the full pipeline and write the report bundle");
    auto* frontier = app.add_subcommand("frontier", "efficient frontier at one location");
    for (auto* cmd : {simulate, train, tune, plan, frontier}) add_common(cmd, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve(flags);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (train->parsed()) return cmd_train(cfg, cfg.tune);
        if (tune->parsed()) return cmd_train(cfg, true);
        if (plan->parsed()) return cmd_plan(cfg);
        if (frontier->parsed()) return cmd_frontier(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
