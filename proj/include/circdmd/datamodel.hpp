#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "circdmd/errors.hpp"

namespace circdmd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

/// How sensors are laid out in a CSV file.
enum class Layout { SensorsAsRows, SensorsAsColumns };

enum class HeaderMode { Auto, Present, Absent };

/// Synthesized identifiers "s0001", "s0002", ...
inline std::vector<std::string> default_sensor_ids(Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%04lld", static_cast<long long>(i + 1));
        ids.emplace_back(buf);
    }
    return ids;
}

/// Sensor-by-time matrix (N x T) with its sampling interval in hours.
/// Validated on construction and immutable afterwards.
class SpeedMatrix {
public:
    SpeedMatrix(Matrix values, double delta_t, std::vector<std::string> sensor_ids = {},
                std::optional<std::string> start_timestamp = std::nullopt)
        : SpeedMatrix(std::move(values), delta_t, std::move(sensor_ids), std::move(start_timestamp), 2) {}

    const Matrix& values() const noexcept { return values_; }
    double delta_t() const noexcept { return delta_t_; }
    const std::vector<std::string>& sensor_ids() const noexcept { return sensor_ids_; }
    const std::optional<std::string>& start_timestamp() const noexcept { return start_timestamp_; }

    Index n() const noexcept { return values_.rows(); }
    Index t() const noexcept { return values_.cols(); }

    /// Columns [begin, end) with metadata carried over. A slice may hold a
    /// single column (the test part of a split at T - 1).
    SpeedMatrix columns(Index begin, Index end) const {
        if (begin < 0 || end > t() || end - begin < 1) throw RangeError("column slice out of range");
        return SpeedMatrix(values_.middleCols(begin, end - begin), delta_t_, sensor_ids_,
                           start_timestamp_, 1);
    }

private:
    SpeedMatrix(Matrix values, double delta_t, std::vector<std::string> sensor_ids,
                std::optional<std::string> start_timestamp, Index min_t)
        : values_(std::move(values)),
          delta_t_(delta_t),
          sensor_ids_(std::move(sensor_ids)),
          start_timestamp_(std::move(start_timestamp)) {
        if (values_.rows() < 1 || values_.cols() < min_t)
            throw ShapeError("speed matrix needs N >= 1 and T >= " + std::to_string(min_t) + ", got " +
                             std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
        if (!(delta_t_ > 0.0) || !std::isfinite(delta_t_))
            throw RangeError("delta_t must be positive and finite");
        if (sensor_ids_.empty()) sensor_ids_ = default_sensor_ids(values_.rows());
        if (static_cast<Index>(sensor_ids_.size()) != values_.rows())
            throw ShapeError("sensor_ids has " + std::to_string(sensor_ids_.size()) +
                             " entries for " + std::to_string(values_.rows()) + " sensors");
        std::string bad;
        int n_bad = 0;
        for (Index t = 0; t < values_.cols(); ++t)
            for (Index n = 0; n < values_.rows(); ++n)
                if (!std::isfinite(values_(n, t))) {
                    if (n_bad++ < 10)
                        bad += " (" + std::to_string(n) + "," + std::to_string(t) + ")";
                }
        if (n_bad > 0)
            throw DataError(std::to_string(n_bad) + " non-finite value(s) at (sensor,time):" + bad +
                            (n_bad > 10 ? " ..." : ""));
    }

    Matrix values_;
    double delta_t_;
    std::vector<std::string> sensor_ids_;
    std::optional<std::string> start_timestamp_;
};

struct Dataset {
    SpeedMatrix train;
    SpeedMatrix test;
    Index split_index;
};

/// Train on columns [0, split_index), test on [split_index, T).
inline Dataset split(const SpeedMatrix& data, Index split_index) {
    if (split_index < 1 || split_index >= data.t())
        throw RangeError("split index " + std::to_string(split_index) + " outside [1, " +
                         std::to_string(data.t()) + ")");
    return Dataset{data.columns(0, split_index), data.columns(split_index, data.t()), split_index};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::optional<double> parse_number(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
    return value;
}

}  // namespace detail

/// Parse CSV text. In the sensors-as-columns layout a header row supplies the
/// sensor ids; in the sensors-as-rows layout a header row (time labels) is
/// skipped and ids are synthesized.
inline SpeedMatrix parse_matrix(std::istream& in, Layout layout, double delta_t,
                                HeaderMode header = HeaderMode::Auto) {
    std::vector<std::vector<double>> rows;
    std::vector<std::string> header_cells;
    std::string line;
    std::size_t file_row = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        auto view = detail::trim(line);
        if (view.empty()) {
            ++file_row;
            continue;
        }
        auto cells = detail::split_cells(view);
        if (first) {
            first = false;
            bool is_header = header == HeaderMode::Present;
            if (header == HeaderMode::Auto)
                for (auto c : cells)
                    if (!detail::parse_number(c)) is_header = true;
            if (is_header) {
                for (auto c : cells) header_cells.emplace_back(c);
                width = cells.size();
                ++file_row;
                continue;
            }
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw ShapeError("row " + std::to_string(file_row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(width));
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto v = detail::parse_number(cells[c]);
            if (!v) throw ParseError(file_row, c, "not a number: '" + std::string(cells[c]) + "'");
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
        ++file_row;
    }
    if (rows.empty()) throw ShapeError("no data rows");

    const auto r = static_cast<Index>(rows.size());
    const auto c = static_cast<Index>(width);
    Matrix values(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

    if (layout == Layout::SensorsAsColumns) {
        Matrix transposed = values.transpose();
        return SpeedMatrix(std::move(transposed), delta_t, std::move(header_cells));
    }
    return SpeedMatrix(std::move(values), delta_t);
}

inline SpeedMatrix load_matrix(const std::string& path, Layout layout, double delta_t,
                               HeaderMode header = HeaderMode::Auto) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return parse_matrix(in, layout, delta_t, header);
}

namespace detail {

/// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace detail

inline void write_matrix(std::ostream& out, const SpeedMatrix& m, Layout layout) {
    const auto& v = m.values();
    if (layout == Layout::SensorsAsColumns) {
        for (std::size_t i = 0; i < m.sensor_ids().size(); ++i)
            out << (i ? "," : "") << m.sensor_ids()[i];
        out << '\n';
        for (Index t = 0; t < v.cols(); ++t) {
            for (Index n = 0; n < v.rows(); ++n)
                out << (n ? "," : "") << detail::format_double(v(n, t));
            out << '\n';
        }
    } else {
        for (Index n = 0; n < v.rows(); ++n) {
            for (Index t = 0; t < v.cols(); ++t)
                out << (t ? "," : "") << detail::format_double(v(n, t));
            out << '\n';
        }
    }
}

inline void save_matrix(const std::string& path, const SpeedMatrix& m, Layout layout) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    write_matrix(out, m, layout);
}

}  // namespace circdmd
