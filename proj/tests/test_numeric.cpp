#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "batle/kernels.hpp"
#include "batle/matrix.hpp"
#include "batle/rng.hpp"

using namespace batle;

TEST_CASE("sigmoid closed-form values") {
    REQUIRE(sigmoid(0.0) == 0.5);
    // 1 / (1 + e^-0.5) = 0.6224593312018546
    REQUIRE(std::abs(sigmoid(0.5) - 0.6224593312018546) < 1e-15);
    REQUIRE(sigmoid(30.0) < 1.0);
    REQUIRE(sigmoid(-30.0) > 0.0);
}

TEST_CASE("clip bounds") {
    REQUIRE(clip(2.0, -1.4, 1.4) == 1.4);
    REQUIRE(clip(-2.0, -1.4, 1.4) == -1.4);
    REQUIRE(clip(0.3, -1.4, 1.4) == 0.3);
    REQUIRE_THROWS_AS(clip(0.0, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("standardize requires positive sd") {
    REQUIRE(standardize(3.0, 1.0, 2.0) == 1.0);
    REQUIRE_THROWS_AS(standardize(1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("softplus and silu derivatives match finite differences") {
    RngStream rng(1);
    for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(-4.0, 4.0);
        const double h = 1e-6;
        const double fd_sp = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
        REQUIRE(std::abs(fd_sp - softplus_deriv(x)) < 1e-8);
        const double fd_silu = (silu(x + h) - silu(x - h)) / (2.0 * h);
        REQUIRE(std::abs(fd_silu - silu_deriv(x)) < 1e-8);
    }
}

namespace {

// Plain triple loop as the independent multiplication oracle.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("matmul variants agree with the naive oracle") {
    RngStream rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t m = 1 + rng.uniform_index(8);
        const std::size_t k = 1 + rng.uniform_index(8);
        const std::size_t n = 1 + rng.uniform_index(8);
        const Matrix a = random_matrix(m, k, rng);
        const Matrix b = random_matrix(k, n, rng);
        const Matrix ref = naive_matmul(a, b);
        const Matrix got = matmul(a, b);
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(std::abs(got.data[i] - ref.data[i]) < 1e-12);

        const Matrix tn = matmul_tn(transpose(a), b);  // (A^T)^T B = A B
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(std::abs(tn.data[i] - ref.data[i]) < 1e-12);

        const Matrix nt = matmul_nt(a, transpose(b));  // A (B^T)^T = A B
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(std::abs(nt.data[i] - ref.data[i]) < 1e-12);
    }
}

TEST_CASE("matmul rejects mismatched shapes") {
    Matrix a(2, 3), b(4, 2);
    REQUIRE_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("vector statistics") {
    std::vector<double> v{1.0, 2.0, 3.0};
    REQUIRE(vec_mean(v) == 2.0);
    REQUIRE(vec_sd(v) == 1.0);
    REQUIRE(vec_sd(std::vector<double>{5.0}) == 0.0);
}
