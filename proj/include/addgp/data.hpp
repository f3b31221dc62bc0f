#pragma once

// Tabular datasets: CSV loading, standardization, seeded train/test splits and
// the two-dimensional axis-aligned sine generator.

#include "addgp/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace addgp {

/// Row-major so that each input point is a contiguous span.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

struct Dataset {
    RowMatrix inputs;
    Eigen::VectorXd targets;
    /// Input labels followed by the target label; empty when unknown.
    std::vector<std::string> column_names;

    Eigen::Index size() const { return inputs.rows(); }
    int dims() const { return static_cast<int>(inputs.cols()); }

    void validate() const {
        if (inputs.rows() < 1 || inputs.cols() < 1) throw InvalidData("dataset needs at least one row and one input column");
        if (targets.size() != inputs.rows()) throw InvalidData("dataset: target count does not match row count");
        if (!inputs.allFinite() || !targets.allFinite()) throw InvalidData("dataset contains non-finite values");
        if (!column_names.empty() && column_names.size() != static_cast<std::size_t>(inputs.cols()) + 1)
            throw InvalidData("dataset: expected " + std::to_string(inputs.cols() + 1) + " column names");
    }

    Dataset rows(const std::vector<Eigen::Index>& idx) const {
        Dataset out;
        out.inputs.resize(static_cast<Eigen::Index>(idx.size()), inputs.cols());
        out.targets.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(idx[i]);
            out.targets[static_cast<Eigen::Index>(i)] = targets[idx[i]];
        }
        out.column_names = column_names;
        return out;
    }
};

struct StandardizationStats {
    Eigen::VectorXd input_means;
    Eigen::VectorXd input_stds;
    double target_mean = 0.0;
    double target_std = 1.0;

    /// Leaves inputs and targets untouched.
    static StandardizationStats identity(int dims) {
        return {Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims), 0.0, 1.0};
    }

    RowMatrix apply_inputs(const RowMatrix& x) const {
        if (x.cols() != input_means.size())
            throw std::invalid_argument("standardization: expected " + std::to_string(input_means.size()) +
                                        " input columns, got " + std::to_string(x.cols()));
        RowMatrix out = x;
        for (Eigen::Index d = 0; d < x.cols(); ++d)
            out.col(d) = (x.col(d).array() - input_means[d]) / input_stds[d];
        return out;
    }

    Eigen::VectorXd apply_targets(const Eigen::VectorXd& y) const {
        return (y.array() - target_mean) / target_std;
    }

    Dataset apply(const Dataset& data) const {
        return {apply_inputs(data.inputs), apply_targets(data.targets), data.column_names};
    }
};

inline Eigen::VectorXd destandardize_targets(const Eigen::VectorXd& values, const StandardizationStats& stats) {
    return values.array() * stats.target_std + stats.target_mean;
}

/// Target column picked by header name or by zero-based index (negative counts from the end).
using ColumnSelector = std::variant<std::string, int>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::optional<double> parse_real(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// A numeric table with an optional header.
struct Table {
    RowMatrix values;
    std::vector<std::string> header;

    int columns() const { return static_cast<int>(values.cols()); }
};

/// Parses a comma-separated table of reals. A first row containing any
/// non-numeric cell is taken as the header. Rows are reported by file line.
inline Table parse_table(std::istream& in, const std::string& source = "<stream>") {
    std::vector<std::vector<std::string>> raw;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        raw.push_back(detail::split_csv_line(line));
        line_numbers.push_back(line_no);
    }
    if (raw.empty()) throw EmptyTableError(source + ": empty table");

    Table table;
    std::size_t first_data = 0;
    if (std::any_of(raw[0].begin(), raw[0].end(), [](const std::string& c) { return !detail::parse_real(c).has_value(); })) {
        table.header = raw[0];
        first_data = 1;
    }
    const std::size_t cols = raw[0].size();
    const std::size_t rows = raw.size() - first_data;
    if (rows == 0) throw EmptyTableError(source + ": table has a header but no data rows");

    table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& cells = raw[first_data + r];
        const std::size_t file_row = line_numbers[first_data + r];
        if (cells.size() != cols)
            throw ParseError(source + ": row " + std::to_string(file_row) + " has " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(cols),
                             file_row, cells.size());
        for (std::size_t c = 0; c < cols; ++c) {
            const auto v = detail::parse_real(cells[c]);
            if (!v)
                throw ParseError(source + ": non-numeric cell '" + cells[c] + "' at row " + std::to_string(file_row) +
                                     ", column " + std::to_string(c + 1),
                                 file_row, c + 1);
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
        }
    }
    return table;
}

inline Table load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open '" + path + "'");
    return parse_table(in, path);
}

/// Zero-based position of the selected column in a table.
inline int resolve_column(const ColumnSelector& selector, const std::vector<std::string>& header, int columns,
                          const std::string& source = "<stream>") {
    if (std::holds_alternative<std::string>(selector)) {
        const auto& name = std::get<std::string>(selector);
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument(source + ": no column named '" + name + "'");
        return static_cast<int>(it - header.begin());
    }
    const int idx = std::get<int>(selector);
    const int resolved = idx < 0 ? columns + idx : idx;
    if (resolved < 0 || resolved >= columns)
        throw std::invalid_argument(source + ": column index " + std::to_string(idx) + " out of range");
    return resolved;
}

/// Splits a table into inputs (remaining columns, in order) and the target column.
inline Dataset to_dataset(const Table& table, const ColumnSelector& target = -1, const std::string& source = "<stream>") {
    const int cols = table.columns();
    if (cols < 2) throw InvalidData(source + ": need at least one input column and a target column");
    const int t = resolve_column(target, table.header, cols, source);
    Dataset data;
    data.inputs.resize(table.values.rows(), cols - 1);
    data.targets = table.values.col(t);
    for (int c = 0, k = 0; c < cols; ++c)
        if (c != t) data.inputs.col(k++) = table.values.col(c);
    if (!table.header.empty()) {
        for (int c = 0; c < cols; ++c)
            if (c != t) data.column_names.push_back(table.header[static_cast<std::size_t>(c)]);
        data.column_names.push_back(table.header[static_cast<std::size_t>(t)]);
    }
    return data;
}

/// Parses a comma-separated table; the selected column becomes the target and
/// the remaining columns are inputs in file order.
inline Dataset parse_csv(std::istream& in, const ColumnSelector& target = -1, const std::string& source = "<stream>") {
    return to_dataset(parse_table(in, source), target, source);
}

inline Dataset load_csv(const std::string& path, const ColumnSelector& target = -1) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open '" + path + "'");
    return parse_csv(in, target, path);
}

inline void write_csv(std::ostream& out, const Dataset& data) {
    const int D = data.dims();
    if (!data.column_names.empty()) {
        for (std::size_t i = 0; i < data.column_names.size(); ++i) out << (i ? "," : "") << data.column_names[i];
    } else {
        for (int d = 0; d < D; ++d) out << 'x' << d + 1 << ',';
        out << 'y';
    }
    out << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (int d = 0; d < D; ++d) out << data.inputs(i, d) << ',';
        out << data.targets[i] << '\n';
    }
}

inline void write_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write '" + path + "'");
    write_csv(out, data);
}

/// Population mean/std of every input column and of the target.
inline StandardizationStats fit_standardization(const Dataset& data) {
    data.validate();
    const auto n = static_cast<double>(data.size());
    StandardizationStats s;
    s.input_means = data.inputs.colwise().mean().transpose();
    s.input_stds.resize(data.dims());
    for (int d = 0; d < data.dims(); ++d) {
        const double sd = std::sqrt((data.inputs.col(d).array() - s.input_means[d]).square().sum() / n);
        if (!(sd > 0.0)) {
            const std::string name = data.column_names.empty() ? "x" + std::to_string(d + 1)
                                                               : data.column_names[static_cast<std::size_t>(d)];
            throw InvalidData("input column '" + name + "' (index " + std::to_string(d) + ") is constant");
        }
        s.input_stds[d] = sd;
    }
    s.target_mean = data.targets.mean();
    s.target_std = std::sqrt((data.targets.array() - s.target_mean).square().sum() / n);
    if (!(s.target_std > 0.0)) throw InvalidData("target column is constant");
    return s;
}

inline std::pair<Dataset, StandardizationStats> standardize(const Dataset& data) {
    auto stats = fit_standardization(data);
    return {stats.apply(data), std::move(stats)};
}

/// Seeded random partition. The train part gets round(fraction * N) rows,
/// clamped so that both parts are non-empty.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    const Eigen::Index n = data.size();
    if (n < 2) throw std::invalid_argument("split: need at least two rows so that both parts are non-empty");
    auto n_train = static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<Eigen::Index>(n_train, 1, n - 1);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    std::vector<Eigen::Index> train(order.begin(), order.begin() + n_train);
    std::vector<Eigen::Index> test(order.begin() + n_train, order.end());
    return {data.rows(train), data.rows(test)};
}

/// f(x1, x2) = sin(2 pi x1) + sin(2 pi x2).
inline double axis_sines(double x1, double x2) {
    return std::sin(2.0 * std::numbers::pi * x1) + std::sin(2.0 * std::numbers::pi * x2);
}

/// Width of each arm of the L-shaped training region.
inline constexpr double kLRegionWidth = 0.3;

inline bool in_l_region(double x1, double x2) {
    const bool in_square = x1 >= 0.0 && x1 <= 1.0 && x2 >= 0.0 && x2 <= 1.0;
    return in_square && (x1 <= kLRegionWidth || x2 <= kLRegionWidth);
}

struct SynthData {
    Dataset train;
    Dataset test;
    std::function<double(double, double)> truth;
};

/// Training inputs uniform over the L-shaped region; noisy targets. The test
/// set is a noiseless grid_size x grid_size grid over the unit square.
inline SynthData synth_axis_sines(int n_train, int grid_size, double noise_sd, std::uint64_t seed) {
    if (n_train < 1) throw std::invalid_argument("synth_axis_sines: n_train must be >= 1");
    if (grid_size < 2) throw std::invalid_argument("synth_axis_sines: grid_size must be >= 2");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("synth_axis_sines: noise_sd must be >= 0");

    SynthData out;
    out.truth = axis_sines;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    out.train.inputs.resize(n_train, 2);
    out.train.targets.resize(n_train);
    for (int i = 0; i < n_train; ++i) {
        double x1 = 0.0, x2 = 0.0;
        do {
            x1 = unit(rng);
            x2 = unit(rng);
        } while (!in_l_region(x1, x2));
        out.train.inputs(i, 0) = x1;
        out.train.inputs(i, 1) = x2;
        out.train.targets[i] = axis_sines(x1, x2) + (noise_sd > 0.0 ? noise_sd * noise(rng) : 0.0);
    }

    const int m = grid_size * grid_size;
    out.test.inputs.resize(m, 2);
    out.test.targets.resize(m);
    for (int i = 0; i < grid_size; ++i)
        for (int j = 0; j < grid_size; ++j) {
            const int r = i * grid_size + j;
            const double x1 = static_cast<double>(i) / (grid_size - 1);
            const double x2 = static_cast<double>(j) / (grid_size - 1);
            out.test.inputs(r, 0) = x1;
            out.test.inputs(r, 1) = x2;
            out.test.targets[r] = axis_sines(x1, x2);
        }
    out.train.column_names = out.test.column_names = {"x1", "x2", "y"};
    return out;
}

} // namespace addgp
