#include <gtest/gtest.h>

#include <filesystem>

#include "seedplan/pipeline.hpp"
#include "test_util.hpp"

using namespace seedplan;
namespace fs = std::filesystem;

namespace {

RunConfig small_synthetic(std::uint64_t seed = 7) {
    RunConfig cfg;
    SyntheticConfig s;
    s.num_varieties = 8;
    s.num_locations = 12;
    s.min_observations = 30;
    s.max_observations = 120;
    s.rng_seed = seed;
    cfg.synthetic = s;
    cfg.params.lambda = 0.1;
    return cfg;
}

} // namespace

TEST(Config, ParsesKeysAndComments) {
    RunConfig cfg;
    for (const auto& [k, v] : parse_settings("# header\nsolver = graph\nlambda_L = 0.5\n\nt=0.7  # inline\n"
                                             "grid.lambda1 = 0.01, 0.1\nsynthetic.varieties = 9\nrmax = 4\n"))
        apply_setting(cfg, k, v);
    EXPECT_EQ(cfg.formulation, Formulation::graph);
    EXPECT_EQ(cfg.params.lambda_l, 0.5);
    EXPECT_EQ(cfg.params.threshold, 0.7);
    ASSERT_TRUE(cfg.grid.has_value());
    EXPECT_EQ(cfg.grid->axes[0].first, "lambda1");
    EXPECT_EQ(cfg.grid->axes[0].second, (std::vector<double>{0.01, 0.1}));
    ASSERT_TRUE(cfg.synthetic.has_value());
    EXPECT_EQ(cfg.synthetic->num_varieties, 9);
    EXPECT_EQ(cfg.budget.r_max, 4.0);
}

TEST(Config, RejectsBadInput) {
    RunConfig cfg;
    EXPECT_THROW(apply_setting(cfg, "lamda", "1"), ParameterError);
    EXPECT_THROW(apply_setting(cfg, "lambda", "1x"), ParameterError);
    EXPECT_THROW(apply_setting(cfg, "solver", "svm"), ParameterError);
    EXPECT_THROW(apply_setting(cfg, "tune", "maybe"), ParameterError);
    EXPECT_THROW(parse_settings("lambda 0.1\n"), ParameterError);
    EXPECT_THROW(RunConfig{}.validate(), ParameterError);
    auto both = small_synthetic();
    both.experiment_path = "x.csv";
    EXPECT_THROW(both.validate(), ParameterError);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
    testutil::TempDir dir("cfg");
    testutil::write_text(dir.file("run.cfg"), "experiment = data/exp.csv\nregion_soil = /abs/soil.csv\n");
    const auto cfg = load_config(dir.file("run.cfg"));
    EXPECT_EQ(fs::path(cfg.experiment_path), fs::path(dir.path()) / "data/exp.csv");
    EXPECT_EQ(cfg.region_soil_path, "/abs/soil.csv");
}

TEST(Config, RiskGrid) {
    RunConfig cfg;
    cfg.frontier_points = 3;
    cfg.budget = {1.0, 3.0, 18};
    EXPECT_EQ(cfg.risk_grid(), (std::vector<double>{1.0, 2.0, 3.0}));
    cfg.frontier_grid = {0.5};
    EXPECT_EQ(cfg.risk_grid(), (std::vector<double>{0.5}));
}

TEST(Pipeline, EndToEndInvariants) {
    const auto cfg = small_synthetic();
    const auto res = run_pipeline(cfg);
    ASSERT_TRUE(res.training.has_value());
    EXPECT_EQ(res.locations.size(), 12u);
    EXPECT_EQ(res.allocations.size(), 12u);
    double area = 0;
    for (const auto& l : res.locations) area += l.area;
    EXPECT_NEAR(res.demand.total(), area, 1e-6 * area);
    EXPECT_NEAR(res.restricted_demand.total(), area, 1e-6 * area);
    EXPECT_EQ(res.candidates.size(), 6u);
    ASSERT_FALSE(res.plan.entries.empty());
    EXPECT_LE(res.plan.entries.size(), 5u);
    double share = 0;
    for (const auto& e : res.plan.entries) {
        share += e.proportion;
        EXPECT_NE(std::find(res.candidates.begin(), res.candidates.end(), e.variety_id), res.candidates.end());
    }
    EXPECT_NEAR(share, 1.0, 1e-9);
    for (double g : res.gaps) EXPECT_GE(g, 0.0);
    EXPECT_EQ(res.frontier.size(), 26u);
    EXPECT_EQ(res.frontier_location, res.locations.front().location_id);
}

TEST(Pipeline, DeterministicAcrossThreadCounts) {
    auto cfg = small_synthetic(3);
    const auto a = run_pipeline(cfg);
    cfg.threads = 3;
    const auto b = run_pipeline(cfg);
    ASSERT_EQ(a.allocations.size(), b.allocations.size());
    for (std::size_t l = 0; l < a.allocations.size(); ++l)
        EXPECT_EQ(a.allocations[l].weights, b.allocations[l].weights);
    EXPECT_EQ(a.demand.demand, b.demand.demand);
    ASSERT_EQ(a.plan.entries.size(), b.plan.entries.size());
    for (std::size_t i = 0; i < a.plan.entries.size(); ++i) {
        EXPECT_EQ(a.plan.entries[i].variety_id, b.plan.entries[i].variety_id);
        EXPECT_EQ(a.plan.entries[i].proportion, b.plan.entries[i].proportion);
    }
}

TEST(Pipeline, DominantVarietyTakesThePlan) {
    auto cfg = small_synthetic(11);
    cfg.synthetic->dominant_variety_boost = 60.0;
    const auto truth = generate_synthetic(*cfg.synthetic).truth;
    const auto res = run_pipeline(cfg);
    double dominant = 0;
    for (const auto& e : res.plan.entries)
        if (e.variety_id == truth.varieties[0]) dominant = e.proportion;
    EXPECT_GE(dominant, 0.9);
}

TEST(Pipeline, StageErrorsNameTheStage) {
    RunConfig cfg;
    cfg.experiment_path = "/nonexistent/exp.csv";
    cfg.region_soil_path = "/nonexistent/soil.csv";
    cfg.region_weather_path = "/nonexistent/weather.csv";
    try {
        run_pipeline(cfg);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "data");
    }
    auto bad = small_synthetic();
    bad.frontier_location = "nowhere";
    try {
        run_pipeline(bad);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "planning");
    }
}

TEST(Pipeline, SavedModelReproducesTrainedPlan) {
    testutil::TempDir dir("saved");
    auto cfg = small_synthetic(5);
    cfg.out_dir = dir.file("run1");
    const auto a = run_pipeline(cfg);
    write_plan_bundle(a, cfg);
    EXPECT_TRUE(fs::exists(dir.file("run1/model.csv")));
    EXPECT_TRUE(fs::exists(dir.file("run1/normalizer.csv")));

    // keep the region, swap training for the saved model
    const auto syn = generate_synthetic(*cfg.synthetic);
    fs::create_directories(dir.file("data"));
    write_synthetic(dir.file("data"), syn);
    RunConfig reuse;
    reuse.model_path = dir.file("run1/model.csv");
    reuse.region_soil_path = dir.file("data/region_soil.csv");
    reuse.region_weather_path = dir.file("data/region_weather.csv");
    const auto b = run_pipeline(reuse);
    EXPECT_FALSE(b.training.has_value());
    ASSERT_EQ(a.plan.entries.size(), b.plan.entries.size());
    for (std::size_t i = 0; i < a.plan.entries.size(); ++i) {
        EXPECT_EQ(a.plan.entries[i].variety_id, b.plan.entries[i].variety_id);
        EXPECT_NEAR(a.plan.entries[i].proportion, b.plan.entries[i].proportion, 1e-6);
    }
}

TEST(Bundle, WritesExpectedFiles) {
    testutil::TempDir dir("bundle");
    auto cfg = small_synthetic();
    cfg.out_dir = dir.file("out");
    cfg.write_distributions = true;
    const auto res = run_pipeline(cfg);
    write_plan_bundle(res, cfg);
    for (const char* f : {"allocations.csv", "allocations_restricted.csv", "demand.csv", "plan.csv", "gaps.csv",
                          "frontier.csv", "frontier_restricted.csv", "frontier.svg", "demand.svg", "plan.svg",
                          "notes.txt", "metrics.csv", "model.csv", "model_meta.txt"})
        EXPECT_TRUE(fs::exists(dir.file(std::string("out/") + f))) << f;
    const auto loc = res.locations.front().location_id;
    EXPECT_TRUE(fs::exists(dir.file("out/distributions/" + loc + "/sigma.csv")));
    const auto plan = csv::Table::read(dir.file("out/plan.csv"));
    EXPECT_EQ(plan.size(), res.plan.entries.size());
    const auto frontier = csv::Table::read(dir.file("out/frontier.csv"));
    EXPECT_EQ(frontier.size(), 26u);
    EXPECT_TRUE(frontier.has("risk"));
}

TEST(Bundle, UncommittedWriterRemovesItsFiles) {
    testutil::TempDir dir("partial");
    try {
        BundleWriter out(dir.file("out"));
        out.text("a.csv", "x\n1\n");
        out.text("sub/b.csv", "y\n2\n");
        EXPECT_TRUE(fs::exists(dir.file("out/sub/b.csv")));
        throw Error("simulated failure");
    } catch (const Error&) {
    }
    EXPECT_FALSE(fs::exists(dir.file("out/a.csv")));
    EXPECT_FALSE(fs::exists(dir.file("out/sub/b.csv")));
}
