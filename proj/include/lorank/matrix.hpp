#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace lorank {

/// Numerical failure inside a solver or factorization (non-convergence,
/// divergence, degeneracy). Carries a human-readable diagnostic.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed text input; the message names the offending line.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense real matrix, row-major. The single carrier for Jacobians, Gram
/// matrices, low-rank/sparse factors and bases.
class Matrix {
public:
    Matrix() = default;

    /// Zero-initialized rows x cols.
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    /// From explicit row-major entries. Rejects NaN/Inf and size mismatch.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& entries() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// True when every entry is finite.
    bool is_finite() const;

    static Matrix identity(std::size_t n);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& m);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);

std::vector<double> matvec(const Matrix& m, const std::vector<double>& x);

/// Sum of absolute entries.
double l1_norm(const Matrix& m);
/// Frobenius norm.
double fro_norm(const Matrix& m);
double max_abs(const Matrix& m);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm(const std::vector<double>& v);

/// Text fixture format: first line "rows cols", then one line per row of
/// space-separated decimals at 17 significant digits (lossless round-trip).
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in, std::size_t* line_counter = nullptr);

void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

/// Fixed 17-significant-digit decimal formatting used by every text format
/// in this project, so round-trips are bit-exact.
std::string format_real(double value);

}  // namespace lorank
