#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace madpot {

// Dense row-major matrix of doubles. Everything in this project is at most a
// few thousand entries, so there is no blocking or BLAS; loops are kept
// cache-friendly and deterministic.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rs);

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const double& operator()(int r, int c) const {
        return data[static_cast<std::size_t>(r) * cols + c];
    }
    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T; both arguments row-major, so this is the dot-product friendly form.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix add_scaled(const Matrix& a, const Matrix& b, double ca, double cb);
Matrix affine(const Matrix& a, double scale, double shift);
double sum(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace madpot
