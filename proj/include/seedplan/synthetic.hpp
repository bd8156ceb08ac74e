#pragma once

// Synthetic experiment/region data with a planted coefficient matrix.
//
// The planted W is expressed in the normalization fitted on the generated
// experiment records (returned alongside it), so a model trained on the full
// experiment set is directly comparable to it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "seedplan/data.hpp"
#include "seedplan/model_io.hpp"
#include "seedplan/mtl.hpp"

namespace seedplan {

struct SyntheticConfig {
    int num_varieties = 20;
    int num_locations = 200;
    int year_first = 2001;
    int year_last = 2015;
    int experiment_years = 7;            // experiments cover the last N years of the range
    std::vector<double> true_task_mean;  // p+1 entries, intercept last; empty = built-in default
    double task_deviation_scale = 5.0;
    double deviation_sparsity = 0.5;     // fraction of deviation entries that are exactly zero
    double noise_std = 1.0;
    int cluster_count = 4;
    std::uint64_t rng_seed = 42;
    int min_observations = 20;
    int max_observations = 500;
    double power_law_exponent = 1.1;     // Pareto tail index of the per-variety counts
    int num_sites = 60;                  // distinct experiment sites
    double missing_planting_date_rate = 0.2;
    double dominant_variety_boost = 0.0; // > 0: variety 0 gains this intercept and loses weather sensitivity

    void validate() const {
        if (num_varieties < 1 || num_locations < 1 || cluster_count < 1 || num_sites < 1 || experiment_years < 1)
            throw ParameterError("synthetic counts must be >= 1");
        if (year_last < year_first) throw ParameterError("synthetic year range is empty");
        if (!(noise_std >= 0.0)) throw ParameterError("noise_std must be >= 0");
        if (!(deviation_sparsity >= 0.0 && deviation_sparsity <= 1.0))
            throw ParameterError("deviation_sparsity must lie in [0, 1]");
        if (!(task_deviation_scale >= 0.0)) throw ParameterError("task_deviation_scale must be >= 0");
        if (min_observations < 1 || max_observations < min_observations)
            throw ParameterError("observation count bounds are invalid");
        if (!(power_law_exponent > 0.0)) throw ParameterError("power_law_exponent must be > 0");
        if (!true_task_mean.empty() && true_task_mean.size() != kNumFeatures + 1)
            throw ParameterError("true_task_mean must have " + std::to_string(kNumFeatures + 1) + " entries");
    }
};

struct SyntheticData {
    std::vector<ExperimentRecord> experiment;
    std::vector<RegionLocation> region;
    CoefficientMatrix truth;
    NormalizationSpec normalizer; // the space `truth` lives in
};

inline std::vector<double> default_task_mean() {
    // temp, precip, solar, cec, ph, om, clay, silt, sand, pi, intercept
    return {14.0, 9.0, 6.0, 3.0, -2.5, 5.0, -2.0, 1.5, -3.0, 10.0, 150.0};
}

namespace detail {

struct Site {
    double lat, lon;
    SoilProfile soil;
    double temp_base, precip_base, solar_base;
};

inline SoilProfile draw_soil(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SoilProfile s;
    s.cec = 5.0 + 30.0 * u01(rng);
    s.ph = 5.0 + 4.0 * u01(rng);
    s.organic_matter = 0.5 + 5.5 * u01(rng);
    // Fine-earth fractions leave 0-15% unmeasured (gravel, lab loss); an exact
    // 100% total would make the three columns collinear with the intercept.
    const double a = 0.2 + u01(rng), b = 0.2 + u01(rng), c = 0.2 + u01(rng);
    const double total = 85.0 + 15.0 * u01(rng);
    s.clay = total * a / (a + b + c);
    s.silt = total * b / (a + b + c);
    s.sand = total * c / (a + b + c);
    s.pi = std::uniform_int_distribution<int>(0, kPiMax)(rng);
    return s;
}

inline Site draw_site(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Site s;
    s.lat = 36.0 + 10.0 * u01(rng);
    s.lon = -100.0 + 15.0 * u01(rng);
    s.soil = draw_soil(rng);
    // warmer in the south, wetter in the east
    const double south = (46.0 - s.lat) / 10.0;
    const double east = (s.lon + 100.0) / 15.0;
    s.temp_base = 3300.0 + 1200.0 * south + 100.0 * u01(rng);
    s.precip_base = 400.0 + 450.0 * east + 50.0 * u01(rng);
    s.solar_base = 950000.0 + 250000.0 * south + 20000.0 * u01(rng);
    return s;
}

struct YearShock {
    double temp, precip, solar;
};

inline WeatherRecord site_weather(const Site& site, int year, const YearShock& shock, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    WeatherRecord w;
    w.year = year;
    w.temperature_sum = site.temp_base * (1.0 + 0.04 * shock.temp + 0.015 * n01(rng));
    w.precipitation_sum = std::max(0.0, site.precip_base * (1.0 + 0.18 * shock.precip + 0.06 * n01(rng)));
    w.solar_radiation_sum = std::max(0.0, site.solar_base * (1.0 + 0.03 * shock.solar + 0.01 * n01(rng)));
    return w;
}

inline std::string numbered(char prefix, int i, int width) {
    std::string digits = std::to_string(i);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return prefix + digits;
}

} // namespace detail

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.rng_seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);

    const int num_years = cfg.year_last - cfg.year_first + 1;
    std::vector<detail::YearShock> shocks;
    for (int y = 0; y < num_years; ++y) shocks.push_back({n01(rng), n01(rng), n01(rng)});
    auto shock_of = [&](int year) { return shocks[static_cast<std::size_t>(year - cfg.year_first)]; };

    const int id_width = std::max(3, static_cast<int>(std::to_string(cfg.num_varieties).size()));
    std::vector<std::string> varieties;
    for (int i = 0; i < cfg.num_varieties; ++i) varieties.push_back(detail::numbered('V', i, id_width));

    // Observation counts: Pareto-tailed, clipped to [min, max].
    std::vector<int> counts;
    for (int i = 0; i < cfg.num_varieties; ++i) {
        const double u = std::max(u01(rng), 1e-12);
        const double draw = cfg.min_observations * std::pow(u, -1.0 / cfg.power_law_exponent);
        counts.push_back(static_cast<int>(std::clamp(std::floor(draw), static_cast<double>(cfg.min_observations),
                                                     static_cast<double>(cfg.max_observations))));
    }

    std::vector<detail::Site> sites;
    for (int s = 0; s < cfg.num_sites; ++s) sites.push_back(detail::draw_site(rng));

    SyntheticData out;
    const int exp_first = std::max(cfg.year_first, cfg.year_last - cfg.experiment_years + 1);
    std::uniform_int_distribution<int> pick_site(0, cfg.num_sites - 1);
    std::uniform_int_distribution<int> pick_year(exp_first, cfg.year_last);
    std::uniform_int_distribution<int> pick_day(120, 250);
    for (int i = 0; i < cfg.num_varieties; ++i) {
        for (int j = 0; j < counts[static_cast<std::size_t>(i)]; ++j) {
            const auto& site = sites[static_cast<std::size_t>(pick_site(rng))];
            ExperimentRecord r;
            r.year = pick_year(rng);
            r.latitude = site.lat;
            r.longitude = site.lon;
            r.weather = detail::site_weather(site, r.year, shock_of(r.year), rng);
            r.soil = site.soil;
            r.variety_id = varieties[static_cast<std::size_t>(i)];
            if (u01(rng) >= cfg.missing_planting_date_rate) r.planting_date = pick_day(rng);
            out.experiment.push_back(std::move(r));
        }
    }
    out.normalizer = fit_normalizer(out.experiment);

    // Planted coefficients: shared mean + sparse cluster deviation + small sparse individual deviation.
    const auto P = static_cast<Eigen::Index>(kNumFeatures + 1);
    const auto mean_vec = cfg.true_task_mean.empty() ? default_task_mean() : cfg.true_task_mean;
    const Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(mean_vec.data(), P);
    auto sparse_draw = [&](double scale) {
        Eigen::VectorXd d(P);
        for (Eigen::Index k = 0; k < P; ++k) {
            const bool zero = u01(rng) < cfg.deviation_sparsity;
            const double v = scale * n01(rng);
            d[k] = zero ? 0.0 : v;
        }
        return d;
    };
    std::vector<Eigen::VectorXd> cluster_dev;
    for (int c = 0; c < cfg.cluster_count; ++c) cluster_dev.push_back(sparse_draw(cfg.task_deviation_scale));
    std::uniform_int_distribution<int> pick_cluster(0, cfg.cluster_count - 1);

    out.truth.W.resize(P, cfg.num_varieties);
    out.truth.varieties = varieties;
    out.truth.features = design_column_names();
    for (int i = 0; i < cfg.num_varieties; ++i) {
        const int c = pick_cluster(rng);
        out.truth.W.col(i) = mean + cluster_dev[static_cast<std::size_t>(c)] + sparse_draw(0.1 * cfg.task_deviation_scale);
    }
    if (cfg.dominant_variety_boost > 0.0) {
        out.truth.W(P - 1, 0) += cfg.dominant_variety_boost;
        out.truth.W.block(0, 0, 3, 1).setZero();
    }

    for (auto& r : out.experiment) {
        const auto col = out.truth.column_of(r.variety_id);
        const double mean_yield = design_row(out.normalizer, raw_features(r)).dot(out.truth.W.col(col));
        const double noise = cfg.noise_std > 0.0 ? cfg.noise_std * n01(rng) : 0.0;
        r.yield_value = std::max(0.0, mean_yield + noise);
    }

    const int loc_width = std::max(4, static_cast<int>(std::to_string(cfg.num_locations).size()));
    for (int l = 0; l < cfg.num_locations; ++l) {
        const auto site = detail::draw_site(rng);
        RegionLocation loc;
        loc.location_id = detail::numbered('L', l, loc_width);
        loc.latitude = site.lat;
        loc.longitude = site.lon;
        loc.soil = site.soil;
        loc.area = 0.5 + u01(rng);
        for (int y = cfg.year_first; y <= cfg.year_last; ++y)
            loc.weather_history.push_back(detail::site_weather(site, y, shock_of(y), rng));
        out.region.push_back(std::move(loc));
    }
    return out;
}

/// Writes experiment.csv, region_soil.csv, region_weather.csv, true_coefficients.csv
/// and true_normalizer.csv into `dir`.
inline void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    write_experiment((dir / "experiment.csv").string(), data.experiment);
    write_region((dir / "region_soil.csv").string(), (dir / "region_weather.csv").string(), data.region);
    write_model((dir / "true_coefficients.csv").string(), data.truth);
    write_normalizer((dir / "true_normalizer.csv").string(), data.normalizer);
}

} // namespace seedplan
