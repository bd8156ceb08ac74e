#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seedplan/errors.hpp"

namespace seedplan::csv {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto cell = trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        out.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// A parsed CSV file: header plus rows of raw string cells.
class Table {
public:
    static Table read(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open " + path);
        Table t;
        t.source_ = path;
        std::string line;
        bool have_header = false;
        while (std::getline(in, line)) {
            auto view = trim(line);
            if (view.empty()) continue;
            if (!have_header) {
                // tolerate a UTF-8 byte order mark
                if (view.size() >= 3 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
                t.header_ = split_line(view);
                for (std::size_t i = 0; i < t.header_.size(); ++i) t.index_[t.header_[i]] = i;
                have_header = true;
                continue;
            }
            auto cells = split_line(view);
            if (cells.size() != t.header_.size())
                throw ParseError("expected " + std::to_string(t.header_.size()) + " cells, found " +
                                     std::to_string(cells.size()),
                                 t.rows_.size() + 1);
            t.rows_.push_back(std::move(cells));
        }
        if (!have_header) throw SchemaError(t.header_.empty() ? "<header>" : t.header_.front(), path);
        return t;
    }

    bool has(const std::string& column) const { return index_.count(column) != 0; }

    std::size_t column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw SchemaError(name, source_);
        return it->second;
    }

    /// Throws SchemaError naming the first absent column.
    void require(std::initializer_list<const char*> columns) const {
        for (const char* c : columns) column(c);
    }

    std::size_t size() const noexcept { return rows_.size(); }
    const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }
    const std::string& source() const noexcept { return source_; }

    double number(std::size_t row, std::size_t col) const {
        const std::string& cell = rows_[row][col];
        double value = 0.0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(value))
            throw ParseError("column '" + header_[col] + "' value '" + cell + "' is not a finite number", row + 1);
        return value;
    }

    long long integer(std::size_t row, std::size_t col) const {
        const std::string& cell = rows_[row][col];
        long long value = 0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
            // accept integral values written as doubles, e.g. "12.0"
            double d = number(row, col);
            if (d != std::floor(d))
                throw ParseError("column '" + header_[col] + "' value '" + cell + "' is not an integer", row + 1);
            return static_cast<long long>(d);
        }
        return value;
    }

    std::optional<long long> optional_integer(std::size_t row, std::size_t col) const {
        if (rows_[row][col].empty()) return std::nullopt;
        return integer(row, col);
    }

    const std::string& text(std::size_t row, std::size_t col) const { return rows_[row][col]; }

private:
    std::string source_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::string>> rows_;
};

/// Opens a file for writing, throwing when the location is not writable.
inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    return out;
}

} // namespace seedplan::csv
