#pragma once

#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace mcq {

/// Dense row-major matrix of doubles. Row count is the batch dimension
/// throughout the network code.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::size_t size() const { return data.size(); }

    void fill(double v) { data.assign(rows * cols, v); }

    static Mat zeros(std::size_t r, std::size_t c) { return Mat(r, c); }

    /// Entries uniform in [-scale, scale).
    static Mat uniform(std::size_t r, std::size_t c, double scale, Rng& rng) {
        Mat m(r, c);
        for (auto& v : m.data) v = rng.uniform(-scale, scale);
        return m;
    }
};

/// C = A[m x k] * B[k x n].
void matmul(const Mat& a, const Mat& b, Mat& c);

/// C = A^T[m x k]^T=... computes A'[k x m] from A[m x k]: C[k x n] = A^T * B[m x n].
void matmul_at(const Mat& a, const Mat& b, Mat& c);

/// C[m x k] = A[m x n] * B[k x n]^T.
void matmul_bt(const Mat& a, const Mat& b, Mat& c);

/// y += x for equally-shaped matrices.
void add_inplace(Mat& y, const Mat& x);

/// Column-wise concatenation [a | b].
Mat hstack(const Mat& a, const Mat& b);

/// Row-wise concatenation.
Mat vstack(const Mat& a, const Mat& b);

/// Each row of m repeated `times` consecutively.
Mat tile_rows(const Mat& m, std::size_t times);

/// Row-wise broadcast add of a bias vector (1 x cols).
void add_bias(Mat& y, const std::vector<double>& bias);

/// Column sums (used for bias gradients).
std::vector<double> col_sums(const Mat& m);

bool all_finite(const Mat& m);

}  // namespace mcq
