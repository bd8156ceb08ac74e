#pragma once

#include <map>
#include <string>
#include <vector>

#include "seedplan/csv.hpp"
#include "seedplan/mtl.hpp"

namespace seedplan {

/// model.csv: `variety,feature,value`, varieties in model order, features in design order.
inline void write_model(const std::string& path, const CoefficientMatrix& model) {
    auto out = csv::open_output(path);
    out << "variety,feature,value\n";
    for (Eigen::Index i = 0; i < model.W.cols(); ++i)
        for (Eigen::Index k = 0; k < model.W.rows(); ++k)
            out << model.varieties[static_cast<std::size_t>(i)] << ',' << model.features[static_cast<std::size_t>(k)]
                << ',' << csv::format_double(model.W(k, i)) << '\n';
    if (!out) throw Error("failed writing " + path);
}

inline CoefficientMatrix read_model(const std::string& path) {
    auto t = csv::Table::read(path);
    t.require({"variety", "feature", "value"});
    std::vector<std::string> varieties, features;
    std::map<std::string, std::size_t> vi, fi;
    for (std::size_t r = 0; r < t.size(); ++r) {
        const auto& v = t.text(r, t.column("variety"));
        const auto& f = t.text(r, t.column("feature"));
        if (!vi.count(v)) {
            vi[v] = varieties.size();
            varieties.push_back(v);
        }
        if (!fi.count(f)) {
            fi[f] = features.size();
            features.push_back(f);
        }
    }
    CoefficientMatrix m;
    m.varieties = varieties;
    m.features = features;
    m.W = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(features.size()),
                                    static_cast<Eigen::Index>(varieties.size()),
                                    std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < t.size(); ++r) {
        auto i = static_cast<Eigen::Index>(vi[t.text(r, t.column("variety"))]);
        auto k = static_cast<Eigen::Index>(fi[t.text(r, t.column("feature"))]);
        m.W(k, i) = t.number(r, t.column("value"));
    }
    if (!m.W.allFinite()) throw ValidationError(path + " does not define every (variety, feature) coefficient");
    return m;
}

/// Plain `key: value` block describing how a model was fitted.
inline std::string model_meta(const SolverReport& report) {
    std::string s;
    s += "formulation: " + to_string(report.formulation) + "\n";
    for (const auto& [name, value] : report.penalties) s += name + ": " + csv::format_double(value) + "\n";
    s += "iterations: " + std::to_string(report.iterations) + "\n";
    s += std::string("converged: ") + (report.converged ? "true" : "false") + "\n";
    s += "final_objective: " + csv::format_double(report.objective) + "\n";
    return s;
}

inline void write_model_meta(const std::string& path, const SolverReport& report) {
    auto out = csv::open_output(path);
    out << model_meta(report);
}

} // namespace seedplan
