#pragma once

// Minimal static SVG charts for the report bundle.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

namespace seedplan::svg {

namespace detail {

inline std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string header(int w, int h, const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
           std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           "<text x=\"" + std::to_string(w / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(title) + "</text>\n";
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

} // namespace detail

inline std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                             const std::string& title, const std::string& y_label) {
    const int W = std::max(400, 60 + 28 * static_cast<int>(values.size())), H = 320;
    const double left = 60, right = W - 20, top = 30, bottom = H - 70;
    const double vmax = values.empty() ? 1.0 : std::max(1e-300, *std::max_element(values.begin(), values.end()));
    std::string s = detail::header(W, H, title);
    s += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(bottom) + "\" x2=\"" + detail::num(right) +
         "\" y2=\"" + detail::num(bottom) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"14\" y=\"" + detail::num((top + bottom) / 2) + "\" transform=\"rotate(-90 14 " +
         detail::num((top + bottom) / 2) + ")\" text-anchor=\"middle\">" + detail::escape(y_label) + "</text>\n";
    const double slot = values.empty() ? 0.0 : (right - left) / static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double h = (bottom - top) * std::max(0.0, values[i]) / vmax;
        const double x = left + slot * static_cast<double>(i) + 0.15 * slot;
        s += "<rect x=\"" + detail::num(x) + "\" y=\"" + detail::num(bottom - h) + "\" width=\"" +
             detail::num(0.7 * slot) + "\" height=\"" + detail::num(h) + "\" fill=\"#1f77b4\"/>\n";
        const double cx = x + 0.35 * slot;
        s += "<text x=\"" + detail::num(cx) + "\" y=\"" + detail::num(bottom + 10) + "\" transform=\"rotate(60 " +
             detail::num(cx) + " " + detail::num(bottom + 10) + ")\">" + detail::escape(labels[i]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

struct Series {
    std::string name;
    std::vector<double> x, y;
};

inline std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                              const std::string& y_label) {
    const int W = 520, H = 360;
    const double left = 70, right = W - 130, top = 30, bottom = H - 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& sr : series)
        for (std::size_t i = 0; i < sr.x.size(); ++i) {
            xmin = std::min(xmin, sr.x[i]);
            xmax = std::max(xmax, sr.x[i]);
            ymin = std::min(ymin, sr.y[i]);
            ymax = std::max(ymax, sr.y[i]);
        }
    if (xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    auto px = [&](double x) { return left + (right - left) * (x - xmin) / (xmax - xmin); };
    auto py = [&](double y) { return bottom - (bottom - top) * (y - ymin) / (ymax - ymin); };

    std::string s = detail::header(W, H, title);
    s += "<rect x=\"" + detail::num(left) + "\" y=\"" + detail::num(top) + "\" width=\"" + detail::num(right - left) +
         "\" height=\"" + detail::num(bottom - top) + "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::num((left + right) / 2) + "\" y=\"" + detail::num(H - 12.0) +
         "\" text-anchor=\"middle\">" + detail::escape(x_label) + "</text>\n";
    s += "<text x=\"16\" y=\"" + detail::num((top + bottom) / 2) + "\" transform=\"rotate(-90 16 " +
         detail::num((top + bottom) / 2) + ")\" text-anchor=\"middle\">" + detail::escape(y_label) + "</text>\n";
    s += "<text x=\"" + detail::num(left) + "\" y=\"" + detail::num(bottom + 14) + "\">" + detail::num(xmin) +
         "</text><text x=\"" + detail::num(right) + "\" y=\"" + detail::num(bottom + 14) +
         "\" text-anchor=\"end\">" + detail::num(xmax) + "</text>\n";
    s += "<text x=\"" + detail::num(left - 4) + "\" y=\"" + detail::num(bottom) + "\" text-anchor=\"end\">" +
         detail::num(ymin) + "</text><text x=\"" + detail::num(left - 4) + "\" y=\"" + detail::num(top + 8) +
         "\" text-anchor=\"end\">" + detail::num(ymax) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        const char* color = detail::kPalette[k % 10];
        std::string pts;
        for (std::size_t i = 0; i < sr.x.size(); ++i) pts += detail::num(px(sr.x[i])) + "," + detail::num(py(sr.y[i])) + " ";
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        for (std::size_t i = 0; i < sr.x.size(); ++i)
            s += "<circle cx=\"" + detail::num(px(sr.x[i])) + "\" cy=\"" + detail::num(py(sr.y[i])) +
                 "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
        s += "<text x=\"" + detail::num(right + 8) + "\" y=\"" + detail::num(top + 14.0 + 16.0 * static_cast<double>(k)) +
             "\" fill=\"" + color + "\">" + detail::escape(sr.name) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline std::string pie_chart(const std::vector<std::string>& labels, const std::vector<double>& shares,
                             const std::string& title) {
    const int W = 440, H = 320;
    const double cx = 150, cy = 170, r = 110;
    std::string s = detail::header(W, H, title);
    double total = 0.0;
    for (double v : shares) total += std::max(0.0, v);
    double angle = -std::numbers::pi / 2;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        const double frac = total > 0.0 ? std::max(0.0, shares[i]) / total : 0.0;
        const char* color = detail::kPalette[i % 10];
        if (frac >= 1.0 - 1e-12) {
            s += "<circle cx=\"" + detail::num(cx) + "\" cy=\"" + detail::num(cy) + "\" r=\"" + detail::num(r) +
                 "\" fill=\"" + color + "\"/>\n";
        } else if (frac > 0.0) {
            const double end = angle + 2 * std::numbers::pi * frac;
            s += "<path d=\"M " + detail::num(cx) + " " + detail::num(cy) + " L " + detail::num(cx + r * std::cos(angle)) +
                 " " + detail::num(cy + r * std::sin(angle)) + " A " + detail::num(r) + " " + detail::num(r) + " 0 " +
                 (frac > 0.5 ? "1" : "0") + " 1 " + detail::num(cx + r * std::cos(end)) + " " +
                 detail::num(cy + r * std::sin(end)) + " Z\" fill=\"" + color + "\" stroke=\"white\"/>\n";
            angle = end;
        }
        s += "<rect x=\"290\" y=\"" + detail::num(80.0 + 20.0 * static_cast<double>(i)) +
             "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/><text x=\"308\" y=\"" +
             detail::num(90.0 + 20.0 * static_cast<double>(i)) + "\">" + detail::escape(labels[i]) + " " +
             detail::num(100.0 * frac) + "%</text>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace seedplan::svg
