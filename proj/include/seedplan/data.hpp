#pragma once

// Dataset schemas, CSV ingestion, min-max feature normalization and
// assembly of the per-variety regression tasks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seedplan/csv.hpp"
#include "seedplan/errors.hpp"

namespace seedplan {

inline constexpr int kPiMax = 18;

/// Growing-season (Apr 1 - Oct 31) weather sums at one site for one year.
struct WeatherRecord {
    int year = 0;
    double temperature_sum = 0.0;
    double precipitation_sum = 0.0;
    double solar_radiation_sum = 0.0;

    bool operator==(const WeatherRecord&) const = default;
};

/// Soil attributes; fixed per location.
struct SoilProfile {
    double cec = 0.0;            // cmol/kg
    double ph = 7.0;
    double organic_matter = 0.0; // percent
    double clay = 0.0;           // percent
    double silt = 0.0;           // percent
    double sand = 0.0;           // percent
    int pi = 0;                  // productivity index, 0..18

    bool operator==(const SoilProfile&) const = default;
};

struct ExperimentRecord {
    int year = 0;
    double latitude = 0.0;
    double longitude = 0.0;
    WeatherRecord weather;
    SoilProfile soil;
    std::string variety_id;
    double yield_value = 0.0;
    std::optional<int> planting_date; // day of year; often missing

    bool operator==(const ExperimentRecord&) const = default;
};

struct RegionLocation {
    std::string location_id;
    double latitude = 0.0;
    double longitude = 0.0;
    SoilProfile soil;
    std::vector<WeatherRecord> weather_history; // strictly increasing years
    double area = 1.0;

    bool operator==(const RegionLocation&) const = default;
};

// ---------------------------------------------------------------------------
// Feature layout: 3 weather sums, 7 soil attributes, then the intercept.

inline constexpr std::size_t kNumFeatures = 10;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "temp", "precip", "solar", "cec", "ph", "om", "clay", "silt", "sand", "pi"};
inline constexpr std::string_view kInterceptName = "intercept";

using RawFeatures = std::array<double, kNumFeatures>;

inline RawFeatures raw_features(const WeatherRecord& w, const SoilProfile& s) {
    return {w.temperature_sum, w.precipitation_sum, w.solar_radiation_sum, s.cec, s.ph,
            s.organic_matter,  s.clay,              s.silt,                s.sand, static_cast<double>(s.pi)};
}

inline RawFeatures raw_features(const ExperimentRecord& r) { return raw_features(r.weather, r.soil); }

/// Names of the design-matrix columns, intercept last.
inline std::vector<std::string> design_column_names() {
    std::vector<std::string> names(kFeatureNames.begin(), kFeatureNames.end());
    names.emplace_back(kInterceptName);
    return names;
}

// ---------------------------------------------------------------------------
// Validation

inline void validate(const WeatherRecord& w) {
    if (!std::isfinite(w.temperature_sum) || !std::isfinite(w.precipitation_sum) ||
        !std::isfinite(w.solar_radiation_sum))
        throw ValidationError("weather sums must be finite");
    if (w.precipitation_sum < 0.0) throw ValidationError("precipitation sum must be >= 0");
    if (w.solar_radiation_sum < 0.0) throw ValidationError("solar radiation sum must be >= 0");
}

inline void validate(const SoilProfile& s) {
    for (double v : {s.cec, s.ph, s.organic_matter, s.clay, s.silt, s.sand})
        if (!std::isfinite(v)) throw ValidationError("soil attributes must be finite");
    auto percent = [](double v) { return v >= 0.0 && v <= 100.0; };
    if (!percent(s.clay) || !percent(s.silt) || !percent(s.sand))
        throw ValidationError("soil texture percentages must lie in [0, 100]");
    if (!percent(s.organic_matter)) throw ValidationError("organic matter must lie in [0, 100]");
    if (s.pi < 0 || s.pi > kPiMax) throw ValidationError("productivity index must lie in [0, 18]");
}

inline void validate(const ExperimentRecord& r) {
    if (r.variety_id.empty()) throw ValidationError("variety id must be nonempty");
    if (!(r.yield_value >= 0.0) || !std::isfinite(r.yield_value)) throw ValidationError("yield must be finite and >= 0");
    if (r.weather.year != r.year) throw ValidationError("weather year differs from record year");
    validate(r.weather);
    validate(r.soil);
}

inline void validate(const RegionLocation& l) {
    if (l.location_id.empty()) throw ValidationError("location id must be nonempty");
    if (!(l.area >= 0.0) || !std::isfinite(l.area)) throw ValidationError("area must be finite and >= 0");
    validate(l.soil);
    for (std::size_t t = 0; t < l.weather_history.size(); ++t) {
        validate(l.weather_history[t]);
        if (t > 0 && l.weather_history[t].year <= l.weather_history[t - 1].year)
            throw ValidationError("weather history of " + l.location_id + " must have strictly increasing years");
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline SoilProfile read_soil(const csv::Table& t, std::size_t row) {
    SoilProfile s;
    s.cec = t.number(row, t.column("cec"));
    s.ph = t.number(row, t.column("ph"));
    s.organic_matter = t.number(row, t.column("om"));
    s.clay = t.number(row, t.column("clay"));
    s.silt = t.number(row, t.column("silt"));
    s.sand = t.number(row, t.column("sand"));
    s.pi = static_cast<int>(t.integer(row, t.column("pi")));
    return s;
}

template <class Fn>
inline void with_row(std::size_t row, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        throw ValidationError("row " + std::to_string(row + 1) + ": " + e.what());
    }
}

} // namespace detail

inline std::vector<ExperimentRecord> load_experiment(const std::string& path) {
    auto t = csv::Table::read(path);
    t.require({"year", "lat", "lon", "temp", "precip", "solar", "cec", "ph", "om", "clay", "silt", "sand", "pi",
               "variety", "planting_date", "yield"});
    std::vector<ExperimentRecord> out;
    out.reserve(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) {
        ExperimentRecord rec;
        rec.year = static_cast<int>(t.integer(r, t.column("year")));
        rec.latitude = t.number(r, t.column("lat"));
        rec.longitude = t.number(r, t.column("lon"));
        rec.weather = {rec.year, t.number(r, t.column("temp")), t.number(r, t.column("precip")),
                       t.number(r, t.column("solar"))};
        rec.soil = detail::read_soil(t, r);
        rec.variety_id = t.text(r, t.column("variety"));
        if (auto d = t.optional_integer(r, t.column("planting_date"))) rec.planting_date = static_cast<int>(*d);
        rec.yield_value = t.number(r, t.column("yield"));
        detail::with_row(r, [&] { validate(rec); });
        out.push_back(std::move(rec));
    }
    return out;
}

/// Region locations plus anything noteworthy found while joining the two files.
struct RegionData {
    std::vector<RegionLocation> locations;  // soil-file order
    std::vector<std::string> issues;        // human-readable gap reports
    std::vector<std::string> without_weather;
};

inline RegionData load_region(const std::string& soil_path, const std::string& weather_path) {
    auto soil = csv::Table::read(soil_path);
    soil.require({"location_id", "lat", "lon", "cec", "ph", "om", "clay", "silt", "sand", "pi"});
    auto weather = csv::Table::read(weather_path);
    weather.require({"location_id", "year", "temp", "precip", "solar"});

    RegionData data;
    std::map<std::string, std::size_t> index;
    const bool has_area = soil.has("area");
    for (std::size_t r = 0; r < soil.size(); ++r) {
        RegionLocation loc;
        loc.location_id = soil.text(r, soil.column("location_id"));
        if (index.count(loc.location_id))
            throw DuplicateKeyError("duplicate location_id '" + loc.location_id + "' in " + soil_path);
        loc.latitude = soil.number(r, soil.column("lat"));
        loc.longitude = soil.number(r, soil.column("lon"));
        loc.soil = detail::read_soil(soil, r);
        loc.area = has_area ? soil.number(r, soil.column("area")) : 1.0;
        index[loc.location_id] = data.locations.size();
        data.locations.push_back(std::move(loc));
    }

    std::set<std::pair<std::string, int>> seen;
    std::set<std::string> unknown;
    for (std::size_t r = 0; r < weather.size(); ++r) {
        const auto& id = weather.text(r, weather.column("location_id"));
        int year = static_cast<int>(weather.integer(r, weather.column("year")));
        if (!seen.emplace(id, year).second)
            throw DuplicateKeyError("duplicate (location_id, year) pair (" + id + ", " + std::to_string(year) + ") in " +
                                    weather_path);
        auto it = index.find(id);
        if (it == index.end()) {
            unknown.insert(id);
            continue;
        }
        WeatherRecord w{year, weather.number(r, weather.column("temp")), weather.number(r, weather.column("precip")),
                        weather.number(r, weather.column("solar"))};
        detail::with_row(r, [&] { validate(w); });
        data.locations[it->second].weather_history.push_back(w);
    }
    if (!unknown.empty()) {
        std::string ids;
        for (const auto& id : unknown) ids += (ids.empty() ? "" : ", ") + id;
        throw ReferentialError("weather rows reference locations absent from the soil file: " + ids);
    }

    std::set<int> all_years;
    for (auto& loc : data.locations) {
        std::sort(loc.weather_history.begin(), loc.weather_history.end(),
                  [](const WeatherRecord& a, const WeatherRecord& b) { return a.year < b.year; });
        for (const auto& w : loc.weather_history) all_years.insert(w.year);
    }
    for (std::size_t r = 0; r < data.locations.size(); ++r) {
        const auto& loc = data.locations[r];
        detail::with_row(r, [&] { validate(loc); });
        if (loc.weather_history.empty()) {
            data.without_weather.push_back(loc.location_id);
            data.issues.push_back("location " + loc.location_id + " has no weather rows");
        } else if (loc.weather_history.size() != all_years.size()) {
            data.issues.push_back("location " + loc.location_id + " has " + std::to_string(loc.weather_history.size()) +
                                  " of " + std::to_string(all_years.size()) + " weather years");
        }
    }
    return data;
}

inline void write_experiment(const std::string& path, const std::vector<ExperimentRecord>& records) {
    using csv::format_double;
    auto out = csv::open_output(path);
    out << "year,lat,lon,temp,precip,solar,cec,ph,om,clay,silt,sand,pi,variety,planting_date,yield\n";
    for (const auto& r : records) {
        out << r.year << ',' << format_double(r.latitude) << ',' << format_double(r.longitude) << ','
            << format_double(r.weather.temperature_sum) << ',' << format_double(r.weather.precipitation_sum) << ','
            << format_double(r.weather.solar_radiation_sum) << ',' << format_double(r.soil.cec) << ','
            << format_double(r.soil.ph) << ',' << format_double(r.soil.organic_matter) << ','
            << format_double(r.soil.clay) << ',' << format_double(r.soil.silt) << ',' << format_double(r.soil.sand)
            << ',' << r.soil.pi << ',' << r.variety_id << ',';
        if (r.planting_date) out << *r.planting_date;
        out << ',' << format_double(r.yield_value) << '\n';
    }
    if (!out) throw Error("failed writing " + path);
}

inline void write_region(const std::string& soil_path, const std::string& weather_path,
                         const std::vector<RegionLocation>& locations) {
    using csv::format_double;
    auto soil = csv::open_output(soil_path);
    soil << "location_id,lat,lon,cec,ph,om,clay,silt,sand,pi,area\n";
    auto weather = csv::open_output(weather_path);
    weather << "location_id,year,temp,precip,solar\n";
    for (const auto& l : locations) {
        soil << l.location_id << ',' << format_double(l.latitude) << ',' << format_double(l.longitude) << ','
             << format_double(l.soil.cec) << ',' << format_double(l.soil.ph) << ','
             << format_double(l.soil.organic_matter) << ',' << format_double(l.soil.clay) << ','
             << format_double(l.soil.silt) << ',' << format_double(l.soil.sand) << ',' << l.soil.pi << ','
             << format_double(l.area) << '\n';
        for (const auto& w : l.weather_history)
            weather << l.location_id << ',' << w.year << ',' << format_double(w.temperature_sum) << ','
                    << format_double(w.precipitation_sum) << ',' << format_double(w.solar_radiation_sum) << '\n';
    }
    if (!soil || !weather) throw Error("failed writing region files");
}

// ---------------------------------------------------------------------------
// Min-max normalization

struct FeatureRange {
    std::string name;
    double min = 0.0;
    double max = 0.0;

    bool constant() const noexcept { return min == max; }
    // Constant features map to 0; nothing is clipped.
    double apply(double x) const noexcept { return constant() ? 0.0 : (x - min) / (max - min); }

    bool operator==(const FeatureRange&) const = default;
};

class NormalizationSpec {
public:
    NormalizationSpec() = default;
    explicit NormalizationSpec(std::vector<FeatureRange> ranges) : ranges_(std::move(ranges)) {
        for (const auto& r : ranges_)
            if (!(r.min <= r.max)) throw ValidationError("normalizer range for " + r.name + " has min > max");
    }

    const std::vector<FeatureRange>& ranges() const noexcept { return ranges_; }
    std::size_t size() const noexcept { return ranges_.size(); }

    const FeatureRange& at(std::string_view name) const {
        for (const auto& r : ranges_)
            if (r.name == name) return r;
        throw ParameterError("unknown feature '" + std::string(name) + "'");
    }

    bool operator==(const NormalizationSpec&) const = default;

private:
    std::vector<FeatureRange> ranges_;
};

inline NormalizationSpec fit_normalizer(const std::vector<ExperimentRecord>& records) {
    if (records.empty()) throw ValidationError("cannot fit a normalizer on zero records");
    RawFeatures lo = raw_features(records.front());
    RawFeatures hi = lo;
    for (const auto& r : records) {
        auto f = raw_features(r);
        for (std::size_t k = 0; k < kNumFeatures; ++k) {
            lo[k] = std::min(lo[k], f[k]);
            hi[k] = std::max(hi[k], f[k]);
        }
    }
    std::vector<FeatureRange> ranges;
    for (std::size_t k = 0; k < kNumFeatures; ++k) ranges.push_back({std::string(kFeatureNames[k]), lo[k], hi[k]});
    return NormalizationSpec(std::move(ranges));
}

/// Normalizes a full feature vector in canonical order.
inline Eigen::VectorXd apply_normalizer(const NormalizationSpec& spec, const RawFeatures& features) {
    if (spec.size() != kNumFeatures) throw ParameterError("normalizer does not cover the standard feature set");
    Eigen::VectorXd out(kNumFeatures);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const auto& r = spec.ranges()[k];
        if (r.name != kFeatureNames[k]) throw ParameterError("normalizer feature order mismatch at " + r.name);
        out[static_cast<Eigen::Index>(k)] = r.apply(features[k]);
    }
    return out;
}

/// Normalizes named values; order of the input is preserved.
inline std::vector<double> apply_normalizer(const NormalizationSpec& spec,
                                            const std::vector<std::pair<std::string, double>>& named) {
    std::vector<double> out;
    out.reserve(named.size());
    for (const auto& [name, value] : named) out.push_back(spec.at(name).apply(value));
    return out;
}

inline void write_normalizer(const std::string& path, const NormalizationSpec& spec) {
    auto out = csv::open_output(path);
    out << "feature,min,max\n";
    for (const auto& r : spec.ranges())
        out << r.name << ',' << csv::format_double(r.min) << ',' << csv::format_double(r.max) << '\n';
}

inline NormalizationSpec read_normalizer(const std::string& path) {
    auto t = csv::Table::read(path);
    t.require({"feature", "min", "max"});
    std::vector<FeatureRange> ranges;
    for (std::size_t r = 0; r < t.size(); ++r)
        ranges.push_back({t.text(r, t.column("feature")), t.number(r, t.column("min")), t.number(r, t.column("max"))});
    return NormalizationSpec(std::move(ranges));
}

// ---------------------------------------------------------------------------
// Multi-task assembly

struct Task {
    std::string variety_id;
    Eigen::MatrixXd X; // n_i x (p+1), last column all ones
    Eigen::VectorXd y;

    Eigen::Index rows() const noexcept { return X.rows(); }
};

struct MultiTaskDataset {
    std::vector<Task> tasks;
    std::vector<std::string> feature_names; // p names followed by "intercept"

    std::size_t num_tasks() const noexcept { return tasks.size(); }
    Eigen::Index num_columns() const noexcept { return static_cast<Eigen::Index>(feature_names.size()); }

    std::size_t total_rows() const noexcept {
        std::size_t n = 0;
        for (const auto& t : tasks) n += static_cast<std::size_t>(t.rows());
        return n;
    }

    std::optional<std::size_t> find(std::string_view variety) const {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (tasks[i].variety_id == variety) return i;
        return std::nullopt;
    }
};

/// Design row for one observation: normalized features followed by 1.
inline Eigen::VectorXd design_row(const NormalizationSpec& spec, const RawFeatures& raw) {
    Eigen::VectorXd row(kNumFeatures + 1);
    row.head(kNumFeatures) = apply_normalizer(spec, raw);
    row[kNumFeatures] = 1.0;
    return row;
}

/// One task per distinct variety, ordered by variety id. Yields stay in raw units.
inline MultiTaskDataset assemble_tasks(const std::vector<ExperimentRecord>& records, const NormalizationSpec& spec) {
    if (records.empty()) throw ValidationError("cannot assemble tasks from zero records");
    std::map<std::string, std::vector<std::size_t>> by_variety;
    for (std::size_t r = 0; r < records.size(); ++r) by_variety[records[r].variety_id].push_back(r);

    MultiTaskDataset data;
    data.feature_names = design_column_names();
    const auto cols = static_cast<Eigen::Index>(kNumFeatures + 1);
    for (const auto& [variety, rows] : by_variety) {
        Task task;
        task.variety_id = variety;
        task.X.resize(static_cast<Eigen::Index>(rows.size()), cols);
        task.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const auto& rec = records[rows[j]];
            task.X.row(static_cast<Eigen::Index>(j)) = design_row(spec, raw_features(rec)).transpose();
            task.y[static_cast<Eigen::Index>(j)] = rec.yield_value;
        }
        data.tasks.push_back(std::move(task));
    }
    return data;
}

inline Task select_rows(const Task& task, const std::vector<Eigen::Index>& rows) {
    Task out;
    out.variety_id = task.variety_id;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), task.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        out.X.row(static_cast<Eigen::Index>(j)) = task.X.row(rows[j]);
        out.y[static_cast<Eigen::Index>(j)] = task.y[rows[j]];
    }
    return out;
}

namespace detail {

// Shuffles each group's row indices and cuts them at round(ratio * n), keeping
// at least one row on each side when n >= 2. Groups are visited in order with
// one shared generator.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> stratified_cut(
    const std::vector<std::size_t>& group_sizes, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("train ratio must lie in (0, 1)");
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
    for (std::size_t n : group_sizes) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        long n_train = static_cast<long>(n);
        if (n >= 2) n_train = std::clamp(std::lround(ratio * static_cast<double>(n)), 1L, static_cast<long>(n) - 1);
        std::vector<std::size_t> tr(idx.begin(), idx.begin() + n_train);
        std::vector<std::size_t> te(idx.begin() + n_train, idx.end());
        std::sort(tr.begin(), tr.end());
        std::sort(te.begin(), te.end());
        out.emplace_back(std::move(tr), std::move(te));
    }
    return out;
}

} // namespace detail

/// Stratified per variety: every task with at least two rows lands on both
/// sides; single-row tasks stay in training only.
inline std::pair<MultiTaskDataset, MultiTaskDataset> split_train_test(const MultiTaskDataset& data, double ratio,
                                                                      std::uint64_t seed) {
    std::vector<std::size_t> sizes;
    for (const auto& t : data.tasks) sizes.push_back(static_cast<std::size_t>(t.rows()));
    const auto cuts = detail::stratified_cut(sizes, ratio, seed);
    MultiTaskDataset train, test;
    train.feature_names = test.feature_names = data.feature_names;
    auto as_index = [](const std::vector<std::size_t>& v) { return std::vector<Eigen::Index>(v.begin(), v.end()); };
    for (std::size_t i = 0; i < data.tasks.size(); ++i) {
        train.tasks.push_back(select_rows(data.tasks[i], as_index(cuts[i].first)));
        if (!cuts[i].second.empty()) test.tasks.push_back(select_rows(data.tasks[i], as_index(cuts[i].second)));
    }
    return {std::move(train), std::move(test)};
}

/// The same split applied to raw records (grouped by variety id, in sorted id
/// order, like assemble_tasks), so the normalizer can be fitted on training
/// rows only. Equivalent to assemble_tasks followed by split_train_test.
inline std::pair<std::vector<ExperimentRecord>, std::vector<ExperimentRecord>> split_experiment(
    const std::vector<ExperimentRecord>& records, double ratio, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_variety;
    for (std::size_t r = 0; r < records.size(); ++r) by_variety[records[r].variety_id].push_back(r);
    std::vector<std::size_t> sizes;
    for (const auto& [v, rows] : by_variety) sizes.push_back(rows.size());
    const auto cuts = detail::stratified_cut(sizes, ratio, seed);
    std::vector<ExperimentRecord> train, test;
    std::size_t g = 0;
    for (const auto& [v, rows] : by_variety) {
        for (auto j : cuts[g].first) train.push_back(records[rows[j]]);
        for (auto j : cuts[g].second) test.push_back(records[rows[j]]);
        ++g;
    }
    return {std::move(train), std::move(test)};
}

} // namespace seedplan
