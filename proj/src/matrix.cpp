#include "lorank/matrix.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lorank {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_)
        throw std::invalid_argument("Matrix: entries length " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    if (!is_finite())
        throw std::invalid_argument("Matrix: non-finite entry on construction");
}

bool Matrix::is_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()));
    Matrix c(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.data() + i * m;
        const double* ai = a.data() + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ai[l];
            if (av == 0.0) continue;
            const double* bl = b.data() + l * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bl[j];
        }
    }
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix scale(const Matrix& m, double s) {
    Matrix c = m;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
    return c;
}

std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
    if (m.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
    std::vector<double> y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.data() + i * m.cols();
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

double l1_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.entries()) s += std::fabs(v);
    return s;
}

double fro_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.entries()) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Matrix& m) {
    double s = 0.0;
    for (double v : m.entries()) s = std::max(s, std::fabs(v));
    return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ' ';
            out << format_real(m(i, j));
        }
        out << '\n';
    }
}

namespace {

std::string next_line(std::istream& in, std::size_t& line_no, const char* what) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(std::string("line ") + std::to_string(line_no + 1) +
                         ": unexpected end of input, expected " + what);
    ++line_no;
    return line;
}

}  // namespace

Matrix read_matrix(std::istream& in, std::size_t* line_counter) {
    std::size_t local = 0;
    std::size_t& line_no = line_counter ? *line_counter : local;
    std::istringstream header(next_line(in, line_no, "matrix header 'rows cols'"));
    long long rows = -1, cols = -1;
    if (!(header >> rows >> cols) || rows < 0 || cols < 0)
        throw ParseError("line " + std::to_string(line_no) + ": bad matrix header");
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (long long i = 0; i < rows; ++i) {
        std::istringstream row(next_line(in, line_no, "matrix row"));
        for (long long j = 0; j < cols; ++j) {
            double v;
            if (!(row >> v))
                throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(cols) + " entries in matrix row");
            if (!std::isfinite(v))
                throw ParseError("line " + std::to_string(line_no) + ": non-finite entry");
            m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = v;
        }
        double extra;
        if (row >> extra)
            throw ParseError("line " + std::to_string(line_no) + ": trailing entries in row");
    }
    return m;
}

void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_matrix(out, m);
}

Matrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_matrix(in);
}

}  // namespace lorank
