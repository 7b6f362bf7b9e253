#pragma once
// Principal components via eigendecomposition of the covariance matrix.
// For wide data (V > J) the J x J Gram matrix is decomposed instead; both
// routes share the nonzero spectrum. The eigensolver is a cyclic Jacobi
// iteration, which is plenty at the matrix sizes the generators use.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/matrix.hpp"

namespace batle {

struct EigenDecomposition {
    std::vector<double> values;  // descending
    Matrix vectors;              // column k is the eigenvector of values[k]
};

// Cyclic Jacobi for a symmetric matrix. Destroys nothing; works on a copy.
inline EigenDecomposition symmetric_eigen(const Matrix& sym, int max_sweeps = 64) {
    if (sym.rows != sym.cols) throw std::invalid_argument("symmetric_eigen: matrix not square");
    const std::size_t n = sym.rows;
    Matrix a = sym;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26 * static_cast<double>(n * n)) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = diag[order[k]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

struct PcaResult {
    Matrix components;                      // L x V, orthonormal rows, variance-descending
    std::vector<double> column_means;       // V
    std::vector<double> explained_variance; // L eigenvalues of the covariance
};

namespace detail {

// Deterministic sign: largest-magnitude entry of each component is positive.
inline void fix_component_sign(Matrix& components) {
    for (std::size_t i = 0; i < components.rows; ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < components.cols; ++j) {
            if (std::abs(components(i, j)) > std::abs(best)) best = components(i, j);
        }
        if (best < 0.0)
            for (std::size_t j = 0; j < components.cols; ++j) components(i, j) = -components(i, j);
    }
}

}  // namespace detail

inline PcaResult pca_fit(const Matrix& data, std::size_t n_components) {
    const std::size_t j_rows = data.rows;
    const std::size_t v_cols = data.cols;
    if (j_rows < 2) throw std::invalid_argument("pca_fit: need at least 2 rows");
    if (n_components == 0 || n_components > std::min(j_rows, v_cols))
        throw std::invalid_argument("pca_fit: n_components out of range");
    if (!data.all_finite()) throw std::invalid_argument("pca_fit: data contains non-finite values");

    PcaResult out;
    out.column_means = column_means(data);
    Matrix centered = data;
    for (std::size_t i = 0; i < j_rows; ++i) {
        double* r = centered.row(i);
        for (std::size_t j = 0; j < v_cols; ++j) r[j] -= out.column_means[j];
    }
    const double denom = static_cast<double>(j_rows - 1);

    EigenDecomposition eig;
    bool gram_route = v_cols > j_rows;
    if (!gram_route) {
        Matrix cov = matmul_tn(centered, centered);  // V x V
        for (double& x : cov.data) x /= denom;
        eig = symmetric_eigen(cov);
    } else {
        Matrix gram = matmul_nt(centered, centered);  // J x J
        for (double& x : gram.data) x /= denom;
        eig = symmetric_eigen(gram);
    }

    const double lead = std::max(eig.values.empty() ? 0.0 : eig.values.front(), 0.0);
    const double rank_tol = std::max(static_cast<double>(std::max(j_rows, v_cols)) * 1e-12 * lead, 1e-12);
    std::size_t rank = 0;
    for (double lam : eig.values)
        if (lam > rank_tol) ++rank;
    if (rank < n_components)
        throw std::invalid_argument("pca_fit: data rank " + std::to_string(rank) +
                                    " is smaller than requested components " +
                                    std::to_string(n_components));

    out.components = Matrix(n_components, v_cols);
    out.explained_variance.assign(eig.values.begin(), eig.values.begin() + n_components);
    if (!gram_route) {
        for (std::size_t k = 0; k < n_components; ++k)
            for (std::size_t j = 0; j < v_cols; ++j) out.components(k, j) = eig.vectors(j, k);
    } else {
        // Component k = X_c^T u_k / ||X_c^T u_k||.
        for (std::size_t k = 0; k < n_components; ++k) {
            std::vector<double> comp(v_cols, 0.0);
            for (std::size_t i = 0; i < j_rows; ++i) {
                const double u = eig.vectors(i, k);
                if (u == 0.0) continue;
                const double* r = centered.row(i);
                for (std::size_t j = 0; j < v_cols; ++j) comp[j] += u * r[j];
            }
            double norm = 0.0;
            for (double x : comp) norm += x * x;
            norm = std::sqrt(norm);
            for (std::size_t j = 0; j < v_cols; ++j) out.components(k, j) = comp[j] / norm;
        }
    }
    detail::fix_component_sign(out.components);
    return out;
}

// Project rows onto the fitted basis: (X - mean) C^T.
inline Matrix pca_transform(const PcaResult& fit, const Matrix& data) {
    if (data.cols != fit.components.cols)
        throw std::invalid_argument("pca_transform: dimension mismatch");
    Matrix centered = data;
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j) centered(i, j) -= fit.column_means[j];
    return matmul_nt(centered, fit.components);
}

}  // namespace batle
