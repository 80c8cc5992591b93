#include "wimpute/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace wimpute {

DataMatrix::DataMatrix(Matrix v, std::vector<std::string> names)
    : values(std::move(v)), column_names(std::move(names)) {
    if (static_cast<Index>(column_names.size()) != values.cols()) {
        throw std::invalid_argument("column name count does not match matrix width");
    }
}

std::vector<std::string> default_column_names(Index d) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) names.push_back("col" + std::to_string(j));
    return names;
}

Index MaskMatrix::missing_count(Index column) const {
    return observed.rows() - observed.col(column).count();
}

Index MaskMatrix::total_missing() const {
    return observed.size() - observed.count();
}

MaskMatrix MaskMatrix::all_observed(Index n, Index d) {
    return MaskMatrix{BoolMatrix::Constant(n, d, true)};
}

std::vector<Index> imputed_columns(const MaskMatrix& mask) {
    std::vector<Index> cols;
    for (Index j = 0; j < mask.cols(); ++j) {
        if (mask.missing_count(j) > 0) cols.push_back(j);
    }
    return cols;
}

void validate_mask(const MaskMatrix& mask) {
    for (Index k = 0; k < mask.rows(); ++k) {
        if (!mask.observed.row(k).any()) {
            throw std::invalid_argument("row " + std::to_string(k) + " has no observed entries");
        }
    }
    for (Index j = 0; j < mask.cols(); ++j) {
        if (mask.rows() > 0 && !mask.observed.col(j).any()) {
            throw std::invalid_argument("column " + std::to_string(j) + " is entirely missing");
        }
    }
}

MaskedDataset::MaskedDataset(DataMatrix data, MaskMatrix mask)
    : data_(std::move(data)), mask_(std::move(mask)) {
    if (data_.rows() != mask_.rows() || data_.cols() != mask_.cols()) {
        throw std::invalid_argument("mask shape does not match data shape");
    }
    validate_mask(mask_);
    completed_ = Matrix::Constant(data_.rows(), data_.cols(), std::numeric_limits<double>::quiet_NaN());
    for (Index j = 0; j < data_.cols(); ++j) {
        for (Index k = 0; k < data_.rows(); ++k) {
            if (mask_.observed(k, j)) {
                const double v = data_.values(k, j);
                if (!std::isfinite(v)) {
                    throw std::invalid_argument("observed cell (" + std::to_string(k) + ", " + std::to_string(j) +
                                                ") is not finite");
                }
                completed_(k, j) = v;
            }
        }
    }
}

void MaskedDataset::set_missing(Index column, const RowIndices& rows, const Vector& values) {
    if (static_cast<Index>(rows.size()) != values.size()) {
        throw std::invalid_argument("set_missing: row/value count mismatch");
    }
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const Index k = rows[t];
        if (mask_.observed(k, column)) {
            throw std::logic_error("set_missing: cell (" + std::to_string(k) + ", " + std::to_string(column) +
                                   ") is observed");
        }
        completed_(k, column) = values[static_cast<Index>(t)];
    }
}

RowPartition partition_by_column(const MaskMatrix& mask, Index column) {
    if (column < 0 || column >= mask.cols()) {
        throw std::out_of_range("column index " + std::to_string(column) + " out of range");
    }
    RowPartition part;
    for (Index k = 0; k < mask.rows(); ++k) {
        (mask.observed(k, column) ? part.observed : part.missing).push_back(k);
    }
    return part;
}

ColumnStats column_stats(const Matrix& m) {
    ColumnStats s;
    const double n = static_cast<double>(m.rows());
    s.mean = m.colwise().mean().transpose();
    s.std = ((m.rowwise() - s.mean.transpose()).array().square().colwise().sum() / n).sqrt().transpose();
    for (Index j = 0; j < m.cols(); ++j) {
        // Exactly constant columns can leave rounding residue in the mean.
        if ((m.col(j).array() == m(0, j)).all()) s.std[j] = 0.0;
    }
    return s;
}

ColumnStats column_stats(const Matrix& m, const RowIndices& rows) {
    return column_stats(select_rows(m, rows));
}

std::pair<Matrix, ColumnStats> standardize(const Matrix& m, const std::optional<ColumnStats>& stats) {
    ColumnStats s = stats ? *stats : column_stats(m);
    if (s.mean.size() != m.cols() || s.std.size() != m.cols()) {
        throw std::invalid_argument("standardize: stats dimension does not match matrix width");
    }
    Matrix z(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        if (s.is_constant(j)) {
            z.col(j).setZero();
        } else {
            z.col(j) = (m.col(j).array() - s.mean[j]) / s.std[j];
        }
    }
    return {std::move(z), std::move(s)};
}

std::pair<DataMatrix, ColumnStats> standardize(const DataMatrix& m, const std::optional<ColumnStats>& stats) {
    auto [z, s] = standardize(m.values, stats);
    return {DataMatrix(std::move(z), m.column_names), std::move(s)};
}

Matrix destandardize(const Matrix& z, const ColumnStats& stats) {
    if (stats.mean.size() != z.cols()) {
        throw std::invalid_argument("destandardize: stats dimension does not match matrix width");
    }
    Matrix m(z.rows(), z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
        m.col(j) = z.col(j).array() * stats.std[j] + stats.mean[j];
    }
    return m;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

struct RawTable {
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> rows;
};

RawTable parse_table(const std::string& text, bool has_header) {
    std::istringstream in(text);
    std::string line;
    RawTable t;
    bool header_pending = has_header;
    std::size_t width = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (header_pending) {
            for (auto& f : fields) t.names.push_back(trim(f));
            width = fields.size();
            header_pending = false;
            continue;
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " fields, expected " + std::to_string(width),
                             row, std::min(fields.size(), width));
        }
        std::vector<std::optional<double>> values;
        values.reserve(width);
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const std::string cell = trim(fields[j]);
            if (cell.empty()) {
                values.emplace_back(std::nullopt);
                continue;
            }
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (*first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
                throw ParseError("cannot parse cell at row " + std::to_string(row) + ", column " + std::to_string(j) +
                                     " as a finite real: '" + cell + "'",
                                 row, j);
            }
            values.emplace_back(v);
        }
        t.rows.push_back(std::move(values));
        ++row;
    }
    if (t.rows.empty()) throw ParseError("no data rows", 0, 0);
    if (width < 2) throw ParseError("a table needs at least two columns", 0, 0);
    if (t.names.empty()) {
        for (const auto& n : default_column_names(static_cast<Index>(width))) t.names.push_back(n);
    }
    return t;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace

DataMatrix parse_csv(const std::string& text, bool has_header) {
    RawTable t = parse_table(text, has_header);
    const Index n = static_cast<Index>(t.rows.size());
    const Index d = static_cast<Index>(t.names.size());
    Matrix m(n, d);
    for (Index k = 0; k < n; ++k) {
        for (Index j = 0; j < d; ++j) {
            const auto& cell = t.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            if (!cell) {
                throw ParseError("empty cell at row " + std::to_string(k) + ", column " + std::to_string(j) +
                                     " in a complete table",
                                 static_cast<std::size_t>(k), static_cast<std::size_t>(j));
            }
            m(k, j) = *cell;
        }
    }
    return DataMatrix(std::move(m), std::move(t.names));
}

MaskedDataset parse_masked_csv(const std::string& text, bool has_header) {
    RawTable t = parse_table(text, has_header);
    const Index n = static_cast<Index>(t.rows.size());
    const Index d = static_cast<Index>(t.names.size());
    Matrix m(n, d);
    MaskMatrix mask{BoolMatrix(n, d)};
    for (Index k = 0; k < n; ++k) {
        for (Index j = 0; j < d; ++j) {
            const auto& cell = t.rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            mask.observed(k, j) = cell.has_value();
            m(k, j) = cell ? *cell : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return MaskedDataset(DataMatrix(std::move(m), std::move(t.names)), std::move(mask));
}

DataMatrix load_csv(const std::filesystem::path& path, bool has_header) {
    return parse_csv(read_file(path), has_header);
}

MaskedDataset load_masked_csv(const std::filesystem::path& path, bool has_header) {
    return parse_masked_csv(read_file(path), has_header);
}

std::string format_csv(const Matrix& values, const std::vector<std::string>& names, const MaskMatrix* mask) {
    std::string out;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j) out.push_back(',');
        out += names[j];
    }
    out.push_back('\n');
    for (Index k = 0; k < values.rows(); ++k) {
        for (Index j = 0; j < values.cols(); ++j) {
            if (j) out.push_back(',');
            if (mask == nullptr || mask->observed(k, j)) append_number(out, values(k, j));
        }
        out.push_back('\n');
    }
    return out;
}

void save_csv(const std::filesystem::path& path, const Matrix& values, const std::vector<std::string>& names) {
    write_file(path, format_csv(values, names));
}

void save_masked_csv(const std::filesystem::path& path, const Matrix& values, const MaskMatrix& mask,
                     const std::vector<std::string>& names) {
    write_file(path, format_csv(values, names, &mask));
}

Matrix select_rows(const Matrix& m, const RowIndices& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t t = 0; t < rows.size(); ++t) out.row(static_cast<Index>(t)) = m.row(rows[t]);
    return out;
}

Vector select_rows(const Vector& v, const RowIndices& rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) out[static_cast<Index>(t)] = v[rows[t]];
    return out;
}

Matrix drop_column(const Matrix& m, Index skip) {
    Matrix out(m.rows(), m.cols() - 1);
    for (Index j = 0, c = 0; j < m.cols(); ++j) {
        if (j != skip) out.col(c++) = m.col(j);
    }
    return out;
}

}  // namespace wimpute
