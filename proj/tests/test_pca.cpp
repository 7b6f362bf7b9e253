#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "batle/matrix.hpp"
#include "batle/pca.hpp"
#include "batle/rng.hpp"

#ifdef BATLE_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace batle;

TEST_CASE("variance confined to one axis yields that axis") {
    const Matrix data = Matrix::from_rows({{1, 0}, {-1, 0}, {2, 0}, {-2, 0}});
    const PcaResult fit = pca_fit(data, 1);
    REQUIRE(std::abs(std::abs(fit.components(0, 0)) - 1.0) < 1e-12);
    REQUIRE(std::abs(fit.components(0, 1)) < 1e-12);
    REQUIRE(fit.column_means[0] == 0.0);
}

TEST_CASE("constant data is rank deficient") {
    Matrix data(5, 3, 2.5);
    REQUIRE_THROWS_WITH(pca_fit(data, 1), Catch::Matchers::ContainsSubstring("rank 0"));
}

TEST_CASE("preconditions") {
    Matrix one_row(1, 4, 1.0);
    REQUIRE_THROWS_AS(pca_fit(one_row, 1), std::invalid_argument);
    Matrix ok(4, 3, 0.0);
    REQUIRE_THROWS_AS(pca_fit(ok, 4), std::invalid_argument);
}

#ifdef BATLE_HAVE_EIGEN
TEST_CASE("components match an independent dense eigensolver to 1e-8") {
    RngStream rng(17);
    Matrix data(6, 4);
    for (double& v : data.data) v = rng.normal();

    const PcaResult fit = pca_fit(data, 2);

    // Oracle: eigendecomposition of the covariance matrix with Eigen.
    Eigen::MatrixXd x(6, 4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) x(i, j) = data(i, j);
    Eigen::RowVectorXd mu = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - mu;
    Eigen::MatrixXd cov = c.transpose() * c / 5.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    REQUIRE(es.info() == Eigen::Success);

    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd oracle = es.eigenvectors().col(3 - k);  // Eigen sorts ascending
        const double oracle_val = es.eigenvalues()(3 - k);
        REQUIRE(std::abs(fit.explained_variance[k] - oracle_val) < 1e-8);
        double dot = 0.0;
        for (int j = 0; j < 4; ++j) dot += oracle(j) * fit.components(k, j);
        // Sign-insensitive comparison.
        for (int j = 0; j < 4; ++j)
            REQUIRE(std::abs(fit.components(k, j) - (dot < 0 ? -1.0 : 1.0) * oracle(j)) < 1e-8);
    }
}

TEST_CASE("gram-route components (V > J) match the eigensolver oracle") {
    RngStream rng(23);
    Matrix data(5, 9);
    for (double& v : data.data) v = rng.normal();
    const PcaResult fit = pca_fit(data, 3);

    Eigen::MatrixXd x(5, 9);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 9; ++j) x(i, j) = data(i, j);
    Eigen::RowVectorXd mu = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - mu;
    Eigen::MatrixXd cov = c.transpose() * c / 4.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd oracle = es.eigenvectors().col(8 - k);
        REQUIRE(std::abs(fit.explained_variance[k] - es.eigenvalues()(8 - k)) < 1e-8);
        double dot = 0.0;
        for (int j = 0; j < 9; ++j) dot += oracle(j) * fit.components(k, j);
        for (int j = 0; j < 9; ++j)
            REQUIRE(std::abs(fit.components(k, j) - (dot < 0 ? -1.0 : 1.0) * oracle(j)) < 1e-8);
    }
}
#endif

TEST_CASE("components are orthonormal with descending variance") {
    RngStream rng(5);
    Matrix data(12, 6);
    for (double& v : data.data) v = rng.normal();
    const PcaResult fit = pca_fit(data, 4);
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 6; ++j) dot += fit.components(a, j) * fit.components(b, j);
            REQUIRE(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-10);
        }
    }
    REQUIRE(std::is_sorted(fit.explained_variance.rbegin(), fit.explained_variance.rend()));
}

TEST_CASE("full-rank projection reconstructs centered data to 1e-8") {
    RngStream rng(29);
    Matrix data(8, 5);
    for (double& v : data.data) v = rng.normal();
    const std::size_t l = 5;  // min(J, V)
    const PcaResult fit = pca_fit(data, l);
    const Matrix scores = pca_transform(fit, data);          // n x L
    const Matrix back = matmul(scores, fit.components);      // n x V, centered
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j)
            REQUIRE(std::abs(back(i, j) - (data(i, j) - fit.column_means[j])) < 1e-8);
}
