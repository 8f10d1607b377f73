#include "mat.hpp"

#include <cmath>

namespace mcq {

void matmul(const Mat& a, const Mat& b, Mat& c) {
    if (a.cols != b.rows) fail(ErrorKind::shape_mismatch, "matmul inner dims");
    c.rows = a.rows;
    c.cols = b.cols;
    c.data.assign(a.rows * b.cols, 0.0);
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.row(p);
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_at(const Mat& a, const Mat& b, Mat& c) {
    if (a.rows != b.rows) fail(ErrorKind::shape_mismatch, "matmul_at batch dims");
    c.rows = a.cols;
    c.cols = b.cols;
    c.data.assign(a.cols * b.cols, 0.0);
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c.row(p);
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_bt(const Mat& a, const Mat& b, Mat& c) {
    if (a.cols != b.cols) fail(ErrorKind::shape_mismatch, "matmul_bt inner dims");
    c.rows = a.rows;
    c.cols = b.rows;
    c.data.assign(a.rows * b.rows, 0.0);
    const std::size_t m = a.rows, n = a.cols, k = b.rows;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < k; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

void add_inplace(Mat& y, const Mat& x) {
    if (y.rows != x.rows || y.cols != x.cols)
        fail(ErrorKind::shape_mismatch, "add_inplace shapes");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
}

Mat hstack(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) fail(ErrorKind::shape_mismatch, "hstack rows");
    Mat out(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        std::copy(a.row(r), a.row(r) + a.cols, out.row(r));
        std::copy(b.row(r), b.row(r) + b.cols, out.row(r) + a.cols);
    }
    return out;
}

Mat vstack(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) fail(ErrorKind::shape_mismatch, "vstack cols");
    Mat out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

Mat tile_rows(const Mat& m, std::size_t times) {
    Mat out(m.rows * times, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t t = 0; t < times; ++t)
            std::copy(m.row(r), m.row(r) + m.cols, out.row(r * times + t));
    return out;
}

void add_bias(Mat& y, const std::vector<double>& bias) {
    if (bias.size() != y.cols) fail(ErrorKind::shape_mismatch, "bias width");
    for (std::size_t r = 0; r < y.rows; ++r) {
        double* row = y.row(r);
        for (std::size_t c = 0; c < y.cols; ++c) row[c] += bias[c];
    }
}

std::vector<double> col_sums(const Mat& m) {
    std::vector<double> s(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) s[c] += row[c];
    }
    return s;
}

bool all_finite(const Mat& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace mcq
