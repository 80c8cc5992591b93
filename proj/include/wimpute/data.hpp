#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace wimpute {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;
using RowIndices = std::vector<Index>;

/// Raised when a CSV cell cannot be ingested. Row and column are zero-based
/// positions in the data section (header excluded).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : std::runtime_error(what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Real-valued n x d table with column names.
struct DataMatrix {
    Matrix values;
    std::vector<std::string> column_names;

    DataMatrix() = default;
    DataMatrix(Matrix v, std::vector<std::string> names);

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }

    bool is_complete() const { return values.allFinite(); }
};

std::vector<std::string> default_column_names(Index d);

/// observed(k, j) == true means cell (k, j) is observed.
struct MaskMatrix {
    BoolMatrix observed;

    Index rows() const { return observed.rows(); }
    Index cols() const { return observed.cols(); }

    Index missing_count(Index column) const;
    Index total_missing() const;

    static MaskMatrix all_observed(Index n, Index d);
};

/// Columns with at least one missing cell, ascending.
std::vector<Index> imputed_columns(const MaskMatrix& mask);

/// Throws std::invalid_argument if a row is entirely missing or a column is
/// entirely missing.
void validate_mask(const MaskMatrix& mask);

/// Ground truth (where known), observedness mask and the current completion.
/// Observed cells of `completed` always equal the corresponding data cells;
/// the only mutator writes missing cells.
class MaskedDataset {
public:
    MaskedDataset(DataMatrix data, MaskMatrix mask);

    const DataMatrix& data() const { return data_; }
    const MaskMatrix& mask() const { return mask_; }
    const Matrix& completed() const { return completed_; }

    Index rows() const { return data_.rows(); }
    Index cols() const { return data_.cols(); }

    /// Writes values into the missing cells of `column` listed in `rows`.
    /// Rejects any row whose cell is observed.
    void set_missing(Index column, const RowIndices& rows, const Vector& values);

    /// Ground truth is available at every cell (e.g. a simulated mask).
    bool has_ground_truth() const { return data_.is_complete(); }

private:
    DataMatrix data_;
    MaskMatrix mask_;
    Matrix completed_;
};

struct RowPartition {
    RowIndices observed;
    RowIndices missing;
};

RowPartition partition_by_column(const MaskMatrix& mask, Index column);
inline RowPartition partition_by_column(const MaskedDataset& ds, Index column) {
    return partition_by_column(ds.mask(), column);
}

struct ColumnStats {
    Vector mean;
    Vector std;  ///< population formula; 0 marks a constant column

    bool is_constant(Index j) const { return std[j] == 0.0; }
};

ColumnStats column_stats(const Matrix& m);
/// Statistics over a subset of rows.
ColumnStats column_stats(const Matrix& m, const RowIndices& rows);

/// Constant columns map to zeros. When `stats` is absent it is computed from m.
std::pair<Matrix, ColumnStats> standardize(const Matrix& m, const std::optional<ColumnStats>& stats = std::nullopt);
std::pair<DataMatrix, ColumnStats> standardize(const DataMatrix& m, const std::optional<ColumnStats>& stats = std::nullopt);
Matrix destandardize(const Matrix& z, const ColumnStats& stats);

// CSV: comma separated, '.' decimal, optional header, empty field = missing.

/// Complete matrix; any empty or non-finite cell is an error.
DataMatrix load_csv(const std::filesystem::path& path, bool has_header = true);

/// Masked table: empty fields become missing cells (NaN in data, mask false).
MaskedDataset load_masked_csv(const std::filesystem::path& path, bool has_header = true);

DataMatrix parse_csv(const std::string& text, bool has_header = true);
MaskedDataset parse_masked_csv(const std::string& text, bool has_header = true);

void save_csv(const std::filesystem::path& path, const Matrix& values, const std::vector<std::string>& names);
/// Cells with mask false are written as empty fields.
void save_masked_csv(const std::filesystem::path& path, const Matrix& values, const MaskMatrix& mask,
                     const std::vector<std::string>& names);

std::string format_csv(const Matrix& values, const std::vector<std::string>& names,
                       const MaskMatrix* mask = nullptr);

/// Rows of m selected by `rows`, in order.
Matrix select_rows(const Matrix& m, const RowIndices& rows);
Vector select_rows(const Vector& v, const RowIndices& rows);
/// m without column `skip`.
Matrix drop_column(const Matrix& m, Index skip);

}  // namespace wimpute
