#pragma once
// Lloyd's k-means with k-means++ seeding from the caller's rng stream.
// Convergence = unchanged assignments, capped at max_iter. An emptied
// cluster is re-seeded with the point farthest from its current centroid.

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "batle/matrix.hpp"
#include "batle/rng.hpp"

namespace batle {

struct KmeansResult {
    std::vector<std::size_t> assignments;  // n, values in [0, k)
    Matrix centroids;                      // k x p
    double inertia = 0.0;                  // within-cluster sum of squares
    std::vector<double> inertia_trace;     // after each update step
    std::size_t iterations = 0;
};

namespace detail {

inline std::size_t nearest_centroid(const double* x, const Matrix& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        const double d = sq_dist(x, centroids.row(c), centroids.cols);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

inline Matrix kmeans_pp_seed(const Matrix& data, std::size_t k, RngStream& rng) {
    const std::size_t n = data.rows;
    Matrix centroids(k, data.cols);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());

    std::size_t first = static_cast<std::size_t>(rng.uniform_index(n));
    for (std::size_t j = 0; j < data.cols; ++j) centroids(0, j) = data(first, j);

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = sq_dist(data.row(i), centroids.row(c - 1), data.cols);
            if (d < min_d[i]) min_d[i] = d;
            total += min_d[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.uniform_index(n));
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        for (std::size_t j = 0; j < data.cols; ++j) centroids(c, j) = data(pick, j);
    }
    return centroids;
}

}  // namespace detail

inline KmeansResult kmeans(const Matrix& data, std::size_t k, RngStream& rng,
                           std::size_t max_iter = 300) {
    const std::size_t n = data.rows;
    const std::size_t p = data.cols;
    if (k == 0 || n < k) throw std::invalid_argument("kmeans: need n >= k >= 1");

    KmeansResult out;
    out.centroids = detail::kmeans_pp_seed(data, k, rng);
    out.assignments.assign(n, 0);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = detail::nearest_centroid(data.row(i), out.centroids);
            if (a != out.assignments[i]) changed = true;
            out.assignments[i] = a;
        }
        if (!changed) break;
        out.iterations = iter + 1;

        Matrix sums(k, p);
        counts.assign(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = out.assignments[i];
            ++counts[a];
            const double* r = data.row(i);
            double* s = sums.row(a);
            for (std::size_t j = 0; j < p; ++j) s[j] += r[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed from the point farthest from its own centroid.
                double worst = -1.0;
                std::size_t far = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d =
                        sq_dist(data.row(i), out.centroids.row(out.assignments[i]), p);
                    if (d > worst) {
                        worst = d;
                        far = i;
                    }
                }
                for (std::size_t j = 0; j < p; ++j) out.centroids(c, j) = data(far, j);
                out.assignments[far] = c;
                continue;
            }
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (std::size_t j = 0; j < p; ++j) out.centroids(c, j) = sums(c, j) * inv;
        }

        double wss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            wss += sq_dist(data.row(i), out.centroids.row(out.assignments[i]), p);
        out.inertia_trace.push_back(wss);
    }

    out.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.inertia += sq_dist(data.row(i), out.centroids.row(out.assignments[i]), p);
    return out;
}

}  // namespace batle
