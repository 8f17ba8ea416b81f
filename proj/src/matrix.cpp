#include "madpot/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "madpot/errors.hpp"

namespace madpot {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
    if (r < 0 || c < 0) throw ShapeError("matrix dimensions must be nonnegative");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Matrix m(static_cast<int>(rs.size()), rs.size() ? static_cast<int>(rs.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rs) {
        if (static_cast<int>(row.size()) != m.cols)
            throw ShapeError("from_rows: ragged initializer");
        int c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
    Matrix out(a.rows, b.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: column counts differ");
    Matrix out(a.rows, b.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: row counts differ");
    Matrix out(a.cols, b.cols, 0.0);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("hadamard: shapes differ");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

Matrix add_scaled(const Matrix& a, const Matrix& b, double ca, double cb) {
    if (!a.same_shape(b)) throw ShapeError("add_scaled: shapes differ");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = ca * a.data[i] + cb * b.data[i];
    return out;
}

Matrix affine(const Matrix& a, double scale, double shift) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = scale * a.data[i] + shift;
    return out;
}

double sum(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    return acc;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shapes differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace madpot
