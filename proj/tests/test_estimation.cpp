#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "batle/estimation.hpp"
#include "batle/network.hpp"
#include "batle/rng.hpp"

using namespace batle;

namespace {

NetworkConfig tiny(double dropout) {
    NetworkConfig cfg;
    cfg.input_dim = 4;
    cfg.shared_widths = {6, 4};
    cfg.head_widths = {4};
    cfg.dropout_rate = dropout;
    return cfg;
}

Matrix random_batch(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Matrix m(n, dim);
    RngStream rng(seed);
    for (double& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("dropout rate 0: all passes identical, spread zero, equals dropout-off forward") {
    NetworkConfig cfg = tiny(0.0);
    RngStream rng(1);
    const Parameters p = init_params(cfg, rng);
    const Matrix x = random_batch(7, 4, 2);
    RngStream mc(3);
    const McPrediction pred = predict_mc_dropout(cfg, p, x, 30, mc);
    const ForwardResult off = forward(cfg, p, x, DropoutMode::off);
    for (std::size_t i = 0; i < 7; ++i) {
        REQUIRE(pred.mu0_mean[i] == off.mu0[i]);
        REQUIRE(pred.mu1_mean[i] == off.mu1[i]);
        REQUIRE(pred.mu0_sd[i] == 0.0);
        REQUIRE(pred.mu1_sd[i] == 0.0);
    }
}

TEST_CASE("passes=1 equals a single sampled forward pass") {
    NetworkConfig cfg = tiny(0.4);
    RngStream rng(4);
    const Parameters p = init_params(cfg, rng);
    const Matrix x = random_batch(5, 4, 5);
    RngStream mc1(6), mc2(6);
    const McPrediction pred = predict_mc_dropout(cfg, p, x, 1, mc1);
    const ForwardResult one = forward(cfg, p, x, DropoutMode::sampled, &mc2);
    REQUIRE(pred.mu0_mean == one.mu0);
    REQUIRE(pred.mu1_mean == one.mu1);
}

TEST_CASE("positive dropout yields strictly positive across-pass spread") {
    NetworkConfig cfg = tiny(0.5);
    RngStream rng(7);
    const Parameters p = init_params(cfg, rng);
    const Matrix x = random_batch(6, 4, 8);
    RngStream mc(9);
    const McPrediction pred = predict_mc_dropout(cfg, p, x, 30, mc);
    double total_spread = 0.0;
    for (double s : pred.mu0_sd) total_spread += s;
    for (double s : pred.mu1_sd) total_spread += s;
    REQUIRE(total_spread > 0.0);
}

TEST_CASE("averaging shrinks the spread of the estimate roughly like 1/sqrt(passes)") {
    NetworkConfig cfg = tiny(0.5);
    RngStream rng(10);
    const Parameters p = init_params(cfg, rng);
    const Matrix x = random_batch(1, 4, 11);
    RngStream mc(12);

    // Spread of single-pass predictions vs spread of 30-pass means, over 100
    // repetitions each, on the same fixed model.
    const int reps = 100;
    std::vector<double> singles(reps), means30(reps);
    for (int r = 0; r < reps; ++r) {
        singles[r] = predict_mc_dropout(cfg, p, x, 1, mc).mu0_mean[0];
        means30[r] = predict_mc_dropout(cfg, p, x, 30, mc).mu0_mean[0];
    }
    const double sd1 = vec_sd(singles);
    const double sd30 = vec_sd(means30);
    REQUIRE(sd30 > 0.0);
    const double shrink = sd1 / sd30;
    const double expect = std::sqrt(30.0);
    REQUIRE(shrink > expect / 1.5);
    REQUIRE(shrink < expect * 1.5);
}

TEST_CASE("estimate_ate arithmetic") {
    REQUIRE(estimate_ate({1.0, 2.0}, {1.0, 2.0}).tau_hat == 0.0);
    REQUIRE(estimate_ate({1.0, 2.0}, {4.0, 5.0}).tau_hat == 3.0);  // constant shift
    REQUIRE(std::abs(estimate_ate({1.0, 2.0}, {3.0, 5.0}).tau_hat - 2.5) < 1e-15);
    REQUIRE_THROWS_AS(estimate_ate({}, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_ate({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("tau_hat equals mean(mu1 - mu0) to 1e-12 and survives permutation") {
    RngStream rng(13);
    std::vector<double> mu0(101), mu1(101);
    for (std::size_t i = 0; i < mu0.size(); ++i) {
        mu0[i] = rng.normal();
        mu1[i] = rng.normal();
    }
    const AteEstimate est = estimate_ate(mu0, mu1);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu0.size(); ++i) acc += est.mu1_hat[i] - est.mu0_hat[i];
    REQUIRE(std::abs(est.tau_hat - acc / 101.0) < 1e-12);

    std::vector<double> mu0r(mu0.rbegin(), mu0.rend()), mu1r(mu1.rbegin(), mu1.rend());
    REQUIRE(std::abs(estimate_ate(mu0r, mu1r).tau_hat - est.tau_hat) < 1e-12);
}

TEST_CASE("mae basics") {
    REQUIRE(mae(3.0, 3.0) == 0.0);
    REQUIRE(mae(2.0, 3.0) == 1.0);
    REQUIRE(mae(-1.0, 4.0) == mae(4.0, -1.0));
    REQUIRE_THROWS_AS(mae(std::nan(""), 0.0), std::invalid_argument);
}

TEST_CASE("aggregate closed forms") {
    const AggregateResult same = aggregate({0.7, 0.7, 0.7, 0.7});
    REQUIRE(same.mean_mae == 0.7);
    REQUIRE(same.ci_low == same.ci_high);

    const AggregateResult abc = aggregate({1.0, 2.0, 3.0});
    REQUIRE(abc.mean_mae == 2.0);
    const double half = 1.96 / std::sqrt(3.0);
    REQUIRE(std::abs(abc.ci_low - (2.0 - half)) < 1e-12);
    REQUIRE(std::abs(abc.ci_high - (2.0 + half)) < 1e-12);
    REQUIRE(abc.count == 3);

    REQUIRE_THROWS_AS(aggregate({}), std::invalid_argument);
    REQUIRE_THROWS_AS(aggregate({1.0}, 0.5), std::invalid_argument);
}

TEST_CASE("aggregate equals brute-force recomputation over the raw values") {
    RngStream rng(14);
    std::vector<double> maes(300);  // the b_d=10 x b_m=30 protocol size
    for (double& m : maes) m = std::abs(rng.normal());
    const AggregateResult agg = aggregate(maes);
    double mean = 0.0;
    for (double m : maes) mean += m;
    mean /= 300.0;
    double var = 0.0;
    for (double m : maes) var += (m - mean) * (m - mean);
    const double sd = std::sqrt(var / 299.0);
    REQUIRE(std::abs(agg.mean_mae - mean) < 1e-12);
    REQUIRE(std::abs(agg.ci_high - (mean + 1.96 * sd / std::sqrt(300.0))) < 1e-12);
    REQUIRE(agg.count == 300);
}
