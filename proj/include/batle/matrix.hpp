#pragma once
// Dense row-major f64 matrix plus the handful of kernels the library needs.
// Loops are ordered for contiguous inner access so -O3 vectorizes them.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace batle {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        Matrix m(rws.size(), rws.size() ? rws.begin()->size() : 0);
        std::size_t i = 0;
        for (const auto& r : rws) {
            if (r.size() != m.cols) throw std::invalid_argument("from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : r) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool empty() const { return rows == 0 || cols == 0; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// C = A(m x k) * B(k x n)
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = ar[k];
            if (av == 0.0) continue;
            const double* br = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

// C = A^T(m x k) * B(k x n) with A stored (k x m): gradient of weights.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: row counts differ");
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* ar = a.row(k);
        const double* br = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            double* cr = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) cr[j] += av * br[j];
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// C = A(m x k) * B^T with B stored (n x k): gradient of layer inputs.
// Transposing B first keeps the inner loop streaming (the O(nk) transpose is
// negligible next to the O(mnk) product).
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: column counts differ");
    return matmul(a, transpose(b));
}

inline std::vector<double> column_means(const Matrix& a) {
    if (a.rows == 0) throw std::invalid_argument("column_means: empty matrix");
    std::vector<double> mu(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) mu[j] += r[j];
    }
    for (double& v : mu) v /= static_cast<double>(a.rows);
    return mu;
}

inline std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> s(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) s[j] += r[j];
    }
    return s;
}

inline double vec_mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("vec_mean: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator; 0 for n < 2).
inline double vec_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = vec_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double vec_variance(const std::vector<double>& v) {
    const double sd = vec_sd(v);
    return sd * sd;
}

// Squared euclidean distance between two length-n rows.
inline double sq_dist(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

}  // namespace batle
