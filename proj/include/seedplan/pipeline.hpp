#pragma once

// End-to-end stocking pipeline: estimation -> projection/risk -> planning,
// plus the plain-text run configuration and the report bundle writer.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seedplan/csv.hpp"
#include "seedplan/data.hpp"
#include "seedplan/errors.hpp"
#include "seedplan/evaluation.hpp"
#include "seedplan/model_io.hpp"
#include "seedplan/mtl.hpp"
#include "seedplan/parallel.hpp"
#include "seedplan/planning.hpp"
#include "seedplan/portfolio.hpp"
#include "seedplan/risk.hpp"
#include "seedplan/svg.hpp"
#include "seedplan/synthetic.hpp"

namespace seedplan {

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    // data: either file inputs or a synthetic spec
    std::string experiment_path;
    std::string region_soil_path;
    std::string region_weather_path;
    std::optional<SyntheticConfig> synthetic;
    // optional pre-trained model for plan/frontier
    std::string model_path;
    std::string normalizer_path;

    Formulation formulation = Formulation::mean_regularized;
    ParamSet params{0.01, 0.1, 0.1, 0.01, 0.9};
    bool tune = false;
    std::optional<ParamGrid> grid;
    int folds = 5;
    SolverOptions solver;
    double train_ratio = 0.8;
    std::uint64_t seed = 1;

    RiskBudget budget;
    double shrinkage = 1e-6; // relative to the mean scenario variance
    int top_m = 6;
    std::size_t max_entries = 5;
    double min_share = 0.10;
    std::vector<double> frontier_grid; // empty: evenly spaced over [r_min, r_max]
    int frontier_points = 26;
    std::string frontier_location;     // empty: first location by id

    int threads = 1;
    bool write_distributions = false;
    bool allow_nonconverged = false;
    std::string out_dir = "out";

    bool has_file_inputs() const {
        return !experiment_path.empty() || !region_soil_path.empty() || !region_weather_path.empty();
    }

    void validate() const {
        if (synthetic && has_file_inputs())
            throw ParameterError("configure either input files or a synthetic spec, not both");
        if (!synthetic && !has_file_inputs() && model_path.empty())
            throw ParameterError("no input data: set experiment/region paths or synthetic = true");
        if (synthetic) synthetic->validate();
        solver.validate();
        budget.validate();
        if (top_m < 1) throw ParameterError("top_m must be >= 1");
        if (folds < 2) throw ParameterError("folds must be >= 2");
        if (threads < 1) throw ParameterError("threads must be >= 1");
        if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ParameterError("train_ratio must lie in (0, 1)");
        if (frontier_points < 1) throw ParameterError("frontier_points must be >= 1");
    }

    std::vector<double> risk_grid() const {
        if (!frontier_grid.empty()) return frontier_grid;
        std::vector<double> g;
        for (int i = 0; i < frontier_points; ++i)
            g.push_back(frontier_points == 1 ? budget.r_max
                                             : budget.r_min + (budget.r_max - budget.r_min) * i / (frontier_points - 1));
        return g;
    }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParameterError("setting '" + key + "' expects a boolean, got '" + v + "'");
}

inline double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ParameterError("setting '" + key + "' expects a number, got '" + v + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ParameterError("setting '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& cell : csv::split_line(v))
        if (!cell.empty()) out.push_back(parse_real(key, cell));
    if (out.empty()) throw ParameterError("setting '" + key + "' expects a comma-separated list");
    return out;
}

inline Formulation parse_formulation(const std::string& v) {
    if (v == "mean" || v == "mean_regularized") return Formulation::mean_regularized;
    if (v == "graph") return Formulation::graph;
    if (v == "lasso") return Formulation::lasso;
    if (v == "ls" || v == "least_squares") return Formulation::least_squares;
    throw ParameterError("unknown solver '" + v + "' (expected mean or graph)");
}

inline void set_grid_axis(RunConfig& cfg, const std::string& name, std::vector<double> values) {
    if (!cfg.grid) cfg.grid = ParamGrid{};
    for (auto& axis : cfg.grid->axes)
        if (axis.first == name) {
            axis.second = std::move(values);
            return;
        }
    cfg.grid->axes.emplace_back(name, std::move(values));
}

} // namespace detail

/// Applies one `key = value` setting. Unknown keys are errors.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    auto syn = [&]() -> SyntheticConfig& {
        if (!cfg.synthetic) cfg.synthetic = SyntheticConfig{};
        return *cfg.synthetic;
    };
    if (key == "experiment") cfg.experiment_path = value;
    else if (key == "region_soil") cfg.region_soil_path = value;
    else if (key == "region_weather") cfg.region_weather_path = value;
    else if (key == "model") cfg.model_path = value;
    else if (key == "normalizer") cfg.normalizer_path = value;
    else if (key == "synthetic") {
        if (parse_bool(key, value)) syn();
        else cfg.synthetic.reset();
    } else if (key == "synthetic.varieties") syn().num_varieties = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.locations") syn().num_locations = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.year_first") syn().year_first = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.year_last") syn().year_last = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.experiment_years") syn().experiment_years = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.task_mean") syn().true_task_mean = parse_list(key, value);
    else if (key == "synthetic.deviation_scale") syn().task_deviation_scale = parse_real(key, value);
    else if (key == "synthetic.sparsity") syn().deviation_sparsity = parse_real(key, value);
    else if (key == "synthetic.noise_std") syn().noise_std = parse_real(key, value);
    else if (key == "synthetic.clusters") syn().cluster_count = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.seed") syn().rng_seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "synthetic.min_obs") syn().min_observations = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.max_obs") syn().max_observations = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.power_law") syn().power_law_exponent = parse_real(key, value);
    else if (key == "synthetic.sites") syn().num_sites = static_cast<int>(parse_int(key, value));
    else if (key == "synthetic.missing_planting_date") syn().missing_planting_date_rate = parse_real(key, value);
    else if (key == "synthetic.dominant_boost") syn().dominant_variety_boost = parse_real(key, value);
    else if (key == "solver") cfg.formulation = parse_formulation(value);
    else if (key == "lambda") cfg.params.lambda = parse_real(key, value);
    else if (key == "lambda1") cfg.params.lambda1 = parse_real(key, value);
    else if (key == "lambda2") cfg.params.lambda2 = parse_real(key, value);
    else if (key == "lambda_L" || key == "lambda_l") cfg.params.lambda_l = parse_real(key, value);
    else if (key == "threshold" || key == "t") cfg.params.threshold = parse_real(key, value);
    else if (key == "tune") cfg.tune = parse_bool(key, value);
    else if (key == "folds") cfg.folds = static_cast<int>(parse_int(key, value));
    else if (key.rfind("grid.", 0) == 0) {
        std::string axis = key.substr(5);
        if (axis == "lambda_l") axis = "lambda_L";
        if (axis == "threshold") axis = "t";
        set_grid_axis(cfg, axis, parse_list(key, value));
    } else if (key == "max_iterations") cfg.solver.max_iterations = static_cast<int>(parse_int(key, value));
    else if (key == "tolerance") cfg.solver.tolerance = parse_real(key, value);
    else if (key == "rho") cfg.solver.admm_rho = parse_real(key, value);
    else if (key == "train_ratio") cfg.train_ratio = parse_real(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "rmin") cfg.budget.r_min = parse_real(key, value);
    else if (key == "rmax") cfg.budget.r_max = parse_real(key, value);
    else if (key == "shrinkage") cfg.shrinkage = parse_real(key, value);
    else if (key == "top_m") cfg.top_m = static_cast<int>(parse_int(key, value));
    else if (key == "max_entries") cfg.max_entries = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "min_share") cfg.min_share = parse_real(key, value);
    else if (key == "frontier_grid") cfg.frontier_grid = parse_list(key, value);
    else if (key == "frontier_points") cfg.frontier_points = static_cast<int>(parse_int(key, value));
    else if (key == "frontier_location") cfg.frontier_location = value;
    else if (key == "threads") cfg.threads = static_cast<int>(parse_int(key, value));
    else if (key == "write_distributions") cfg.write_distributions = parse_bool(key, value);
    else if (key == "allow_nonconverged") cfg.allow_nonconverged = parse_bool(key, value);
    else if (key == "out") cfg.out_dir = value;
    else throw ParameterError("unknown configuration key '" + key + "'");
}

/// `key = value` lines; `#` starts a comment; blank lines ignored.
inline std::vector<std::pair<std::string, std::string>> parse_settings(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto view = csv::trim(line);
        if (view.empty()) continue;
        auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw ParameterError("config line " + std::to_string(number) + " is not 'key = value'");
        out.emplace_back(std::string(csv::trim(view.substr(0, eq))), std::string(csv::trim(view.substr(eq + 1))));
    }
    return out;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg;
    // relative data paths resolve against the config file's directory
    const auto base = std::filesystem::path(path).parent_path();
    for (const auto& [k, v] : parse_settings(buf.str())) {
        std::string value = v;
        const bool is_path = k == "experiment" || k == "region_soil" || k == "region_weather" || k == "model" ||
                             k == "normalizer";
        if (is_path && !value.empty() && std::filesystem::path(value).is_relative() && !base.empty())
            value = (base / value).string();
        apply_setting(cfg, k, value);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Stages

struct Inputs {
    std::vector<ExperimentRecord> experiment;
    std::vector<RegionLocation> region;
    std::vector<std::string> issues;
    std::optional<SyntheticData> synthetic;
};

template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline Inputs load_inputs(const RunConfig& cfg, bool need_experiment, bool need_region) {
    return run_stage("data", [&] {
        Inputs in;
        if (cfg.synthetic) {
            auto data = generate_synthetic(*cfg.synthetic);
            in.experiment = data.experiment;
            in.region = data.region;
            in.synthetic = std::move(data);
            return in;
        }
        if (need_experiment) {
            if (cfg.experiment_path.empty()) throw ParameterError("experiment path is not set");
            in.experiment = load_experiment(cfg.experiment_path);
        }
        if (need_region) {
            if (cfg.region_soil_path.empty() || cfg.region_weather_path.empty())
                throw ParameterError("region soil/weather paths are not set");
            auto region = load_region(cfg.region_soil_path, cfg.region_weather_path);
            in.region = std::move(region.locations);
            in.issues = std::move(region.issues);
        }
        return in;
    });
}

struct TrainingOutcome {
    NormalizationSpec normalizer;
    MultiTaskDataset train;
    MultiTaskDataset test;
    TrainedModel model;
    ParamSet params;
    std::optional<CvResult> cv;
    std::map<std::string, double> metrics; // ordered by name
};

inline TrainingOutcome train_model(const std::vector<ExperimentRecord>& records, const RunConfig& cfg) {
    return run_stage("estimation", [&] {
        if (records.empty()) throw ParameterError("no experiment records");
        TrainingOutcome out;
        auto [train_records, test_records] = split_experiment(records, cfg.train_ratio, cfg.seed);
        out.normalizer = fit_normalizer(train_records);
        out.train = assemble_tasks(train_records, out.normalizer);
        if (!test_records.empty()) out.test = assemble_tasks(test_records, out.normalizer);
        out.test.feature_names = out.train.feature_names;

        SolverSpec spec{cfg.formulation, cfg.solver};
        out.params = cfg.params;
        if (cfg.tune) {
            const ParamGrid grid = cfg.grid ? *cfg.grid : default_grid(cfg.formulation);
            out.cv = grid_search(out.train, spec, grid, cfg.folds, cfg.seed, cfg.params);
            out.params = out.cv->best_row().params;
        }
        out.model = fit_model(out.train, spec, out.params);
        out.metrics["train_rmse_paper"] = rmse_paper(out.model.fit.model, out.train);
        out.metrics["train_rmse_standard"] = rmse_standard(out.model.fit.model, out.train);
        if (!out.test.tasks.empty()) {
            out.metrics["test_rmse_paper"] = rmse_paper(out.model.fit.model, out.test);
            out.metrics["test_rmse_standard"] = rmse_standard(out.model.fit.model, out.test);
        }
        return out;
    });
}

struct PipelineResult {
    std::optional<TrainingOutcome> training; // absent when a saved model was loaded
    CoefficientMatrix model;
    NormalizationSpec normalizer;
    std::vector<RegionLocation> locations; // planned locations, sorted by id
    std::vector<std::string> skipped;
    std::vector<std::string> issues;
    std::vector<YieldDistribution> distributions;
    std::vector<double> risk_caps;
    std::vector<AllocationWeights> allocations;
    DemandVector demand;
    std::vector<std::string> candidates;
    std::vector<AllocationWeights> restricted;
    DemandVector restricted_demand;
    std::vector<double> gaps;
    StockingPlan plan;
    std::string frontier_location;
    std::vector<FrontierPoint> frontier;
    std::vector<FrontierPoint> restricted_frontier;

    bool converged() const { return !training || training->model.fit.report.converged; }
};

/// Model + normalizer from config (saved files) or by training.
inline void obtain_model(const RunConfig& cfg, const Inputs& in, PipelineResult& res) {
    if (!cfg.model_path.empty()) {
        run_stage("estimation", [&] {
            res.model = read_model(cfg.model_path);
            const std::string norm = !cfg.normalizer_path.empty()
                                         ? cfg.normalizer_path
                                         : (std::filesystem::path(cfg.model_path).parent_path() / "normalizer.csv").string();
            res.normalizer = read_normalizer(norm);
        });
        return;
    }
    res.training = train_model(in.experiment, cfg);
    res.model = res.training->model.fit.model;
    res.normalizer = res.training->normalizer;
}

inline void project_locations(const RunConfig& cfg, const std::vector<RegionLocation>& region, PipelineResult& res) {
    run_stage("projection", [&] {
        res.locations.clear();
        for (const auto& loc : region) {
            if (loc.weather_history.size() < 2)
                res.skipped.push_back(loc.location_id);
            else
                res.locations.push_back(loc);
        }
        std::sort(res.locations.begin(), res.locations.end(),
                  [](const RegionLocation& a, const RegionLocation& b) { return a.location_id < b.location_id; });
        for (std::size_t i = 1; i < res.locations.size(); ++i)
            if (res.locations[i].location_id == res.locations[i - 1].location_id)
                throw DuplicateKeyError("duplicate location id " + res.locations[i].location_id);
        if (res.locations.empty()) throw ParameterError("no region location has at least two weather years");
        res.distributions.assign(res.locations.size(), {});
        res.risk_caps.assign(res.locations.size(), 0.0);
        parallel_for(res.locations.size(), cfg.threads, [&](std::size_t l) {
            const auto& loc = res.locations[l];
            res.distributions[l] = estimate_distribution(project_scenarios(res.model, loc, res.normalizer), cfg.shrinkage);
            res.risk_caps[l] = risk_budget(loc.soil.pi, cfg.budget);
        });
    });
}

inline std::size_t frontier_index(const RunConfig& cfg, const PipelineResult& res) {
    if (cfg.frontier_location.empty()) return 0;
    for (std::size_t l = 0; l < res.locations.size(); ++l)
        if (res.locations[l].location_id == cfg.frontier_location) return l;
    throw ParameterError("frontier location '" + cfg.frontier_location + "' is not a planned location");
}

inline PipelineResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    const Inputs in = load_inputs(cfg, cfg.model_path.empty(), true);
    PipelineResult res;
    res.issues = in.issues;
    obtain_model(cfg, in, res);
    project_locations(cfg, in.region, res);
    for (const auto& id : res.skipped) res.issues.push_back("location " + id + " skipped: fewer than two weather years");

    run_stage("allocation", [&] {
        res.allocations.assign(res.locations.size(), {});
        parallel_for(res.locations.size(), cfg.threads, [&](std::size_t l) {
            res.allocations[l] = solve_allocation(res.distributions[l], res.risk_caps[l]);
        });
        res.demand = aggregate_demand(res.allocations, res.locations);
    });

    run_stage("planning", [&] {
        const int m = std::min<int>(cfg.top_m, static_cast<int>(res.demand.varieties.size()));
        res.candidates = rank_top_m(res.demand, m);
        res.restricted.assign(res.locations.size(), {});
        parallel_for(res.locations.size(), cfg.threads, [&](std::size_t l) {
            res.restricted[l] =
                solve_allocation(res.distributions[l].restrict_to(res.candidates), res.risk_caps[l]);
        });
        res.restricted_demand = aggregate_demand(res.restricted, res.locations);
        res.gaps.clear();
        for (std::size_t l = 0; l < res.locations.size(); ++l)
            res.gaps.push_back(std::max(0.0, res.allocations[l].expected_yield - res.restricted[l].expected_yield));
        res.plan = finalize_plan(res.restricted_demand, cfg.min_share, cfg.max_entries);

        const std::size_t f = frontier_index(cfg, res);
        res.frontier_location = res.locations[f].location_id;
        const auto grid = cfg.risk_grid();
        res.frontier = efficient_frontier(res.distributions[f], grid);
        res.restricted_frontier = efficient_frontier(res.distributions[f].restrict_to(res.candidates), grid);
    });
    return res;
}

// ---------------------------------------------------------------------------
// Report bundle

/// Tracks written files so a failed run leaves nothing half-written behind.
class BundleWriter {
public:
    explicit BundleWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());
    }
    ~BundleWriter() {
        if (committed_) return;
        std::error_code ec;
        for (auto it = written_.rbegin(); it != written_.rend(); ++it) std::filesystem::remove(*it, ec);
    }
    BundleWriter(const BundleWriter&) = delete;
    BundleWriter& operator=(const BundleWriter&) = delete;

    std::string path(const std::string& name) {
        auto p = dir_ / name;
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        written_.push_back(p);
        return p.string();
    }

    void text(const std::string& name, const std::string& content) {
        auto out = csv::open_output(path(name));
        out << content;
        if (!out) throw Error("failed writing " + name);
    }

    void commit() { committed_ = true; }
    const std::vector<std::filesystem::path>& files() const { return written_; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool committed_ = false;
};

inline std::string metrics_csv(const std::map<std::string, double>& metrics) {
    std::string s = "metric,value\n";
    for (const auto& [k, v] : metrics) s += k + "," + csv::format_double(v) + "\n";
    return s;
}

inline std::string frontier_csv(const std::vector<FrontierPoint>& points, const std::vector<std::string>& varieties) {
    using csv::format_double;
    std::string s = "risk,expected_yield";
    for (const auto& v : varieties) s += "," + v;
    s += "\n";
    for (const auto& p : points) {
        s += format_double(p.risk) + "," + format_double(p.expected_yield);
        for (Eigen::Index i = 0; i < p.weights.weights.size(); ++i) s += "," + format_double(p.weights.weights[i]);
        s += "\n";
    }
    return s;
}

inline std::string frontier_svg(const std::vector<FrontierPoint>& full, const std::vector<FrontierPoint>& restricted,
                                const YieldDistribution& dist, const std::string& location) {
    std::vector<svg::Series> series;
    svg::Series f{"all varieties", {}, {}};
    for (const auto& p : full) f.x.push_back(p.risk), f.y.push_back(p.expected_yield);
    series.push_back(std::move(f));
    if (!restricted.empty()) {
        svg::Series r{"top-M only", {}, {}};
        for (const auto& p : restricted) r.x.push_back(p.risk), r.y.push_back(p.expected_yield);
        series.push_back(std::move(r));
    }
    svg::Series single{"single varieties", {}, {}};
    std::vector<std::pair<double, double>> pts;
    for (Eigen::Index i = 0; i < dist.size(); ++i)
        pts.emplace_back(std::sqrt(std::max(0.0, dist.covariance(i, i))), dist.mean[i]);
    std::sort(pts.begin(), pts.end());
    for (auto [x, y] : pts) single.x.push_back(x), single.y.push_back(y);
    series.push_back(std::move(single));
    return svg::line_chart(series, "Efficient frontier at " + location, "risk (yield std)", "expected yield");
}

inline void write_training(BundleWriter& out, const TrainingOutcome& t) {
    write_model(out.path("model.csv"), t.model.fit.model);
    out.text("model_meta.txt", model_meta(t.model.fit.report));
    write_normalizer(out.path("normalizer.csv"), t.normalizer);
    out.text("metrics.csv", metrics_csv(t.metrics));
    if (t.cv) write_cv_report(out.path("cv_report.csv"), *t.cv);
}

inline std::vector<std::filesystem::path> write_plan_bundle(const PipelineResult& res, const RunConfig& cfg) {
    using csv::format_double;
    BundleWriter out(cfg.out_dir);
    if (res.training) write_training(out, *res.training);

    std::string alloc = "location_id,variety,weight\n";
    for (const auto& a : res.allocations)
        for (Eigen::Index i = 0; i < a.weights.size(); ++i)
            alloc += a.location_id + "," + a.varieties[static_cast<std::size_t>(i)] + "," + format_double(a.weights[i]) + "\n";
    out.text("allocations.csv", alloc);

    std::string restricted = "location_id,variety,weight\n";
    for (const auto& a : res.restricted)
        for (Eigen::Index i = 0; i < a.weights.size(); ++i)
            restricted += a.location_id + "," + a.varieties[static_cast<std::size_t>(i)] + "," +
                          format_double(a.weights[i]) + "\n";
    out.text("allocations_restricted.csv", restricted);

    std::string demand = "variety,demand\n";
    for (std::size_t i = 0; i < res.demand.varieties.size(); ++i)
        demand += res.demand.varieties[i] + "," + format_double(res.demand.demand[static_cast<Eigen::Index>(i)]) + "\n";
    out.text("demand.csv", demand);

    std::string plan = "variety,proportion\n";
    for (const auto& e : res.plan.entries) plan += e.variety_id + "," + format_double(e.proportion) + "\n";
    out.text("plan.csv", plan);

    std::string gaps = "location_id,risk_cap,gap\n";
    for (std::size_t l = 0; l < res.locations.size(); ++l)
        gaps += res.locations[l].location_id + "," + format_double(res.risk_caps[l]) + "," + format_double(res.gaps[l]) + "\n";
    out.text("gaps.csv", gaps);

    const auto f = std::find_if(res.distributions.begin(), res.distributions.end(),
                                [&](const YieldDistribution& d) { return d.location_id == res.frontier_location; });
    out.text("frontier.csv", frontier_csv(res.frontier, res.model.varieties));
    out.text("frontier_restricted.csv", frontier_csv(res.restricted_frontier, res.candidates));
    if (f != res.distributions.end())
        out.text("frontier.svg", frontier_svg(res.frontier, res.restricted_frontier, *f, res.frontier_location));

    std::vector<double> dv(res.demand.demand.data(), res.demand.demand.data() + res.demand.demand.size());
    out.text("demand.svg", svg::bar_chart(res.demand.varieties, dv, "Seed demand by variety", "demand"));
    std::vector<std::string> labels;
    std::vector<double> shares;
    for (const auto& e : res.plan.entries) labels.push_back(e.variety_id), shares.push_back(e.proportion);
    out.text("plan.svg", svg::pie_chart(labels, shares, "Stocking plan"));

    std::string issues;
    for (const auto& s : res.issues) issues += s + "\n";
    for (const auto& d : res.plan.dropped)
        issues += "dropped " + d.variety_id + " (share " + format_double(d.proportion) + "): " + d.reason + "\n";
    out.text("notes.txt", issues);

    if (cfg.write_distributions) {
        for (const auto& d : res.distributions) {
            std::string mu = "variety,mean\n";
            for (Eigen::Index i = 0; i < d.size(); ++i)
                mu += d.varieties[static_cast<std::size_t>(i)] + "," + format_double(d.mean[i]) + "\n";
            std::string sigma = "variety";
            for (const auto& v : d.varieties) sigma += "," + v;
            sigma += "\n";
            for (Eigen::Index i = 0; i < d.size(); ++i) {
                sigma += d.varieties[static_cast<std::size_t>(i)];
                for (Eigen::Index j = 0; j < d.size(); ++j) sigma += "," + format_double(d.covariance(i, j));
                sigma += "\n";
            }
            out.text("distributions/" + d.location_id + "/mu.csv", mu);
            out.text("distributions/" + d.location_id + "/sigma.csv", sigma);
        }
    }
    out.commit();
    return out.files();
}

} // namespace seedplan
