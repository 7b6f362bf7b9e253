#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "batle/losses.hpp"

using namespace batle;

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

TEST_CASE("outcome loss at the mode with unit sigma is half log 2 pi") {
    const std::vector<double> y{1.0, -2.0, 0.5};
    const std::vector<double> t{1.0, 0.0, 1.0};
    const std::vector<std::uint8_t> mask{1, 1, 1};
    // Factual heads predict y exactly; counterfactual heads are garbage.
    const std::vector<double> mu0{9.0, -2.0, 9.0};
    const std::vector<double> mu1{1.0, 9.0, 0.5};
    const std::vector<double> s0{1.0, 1.0, 1.0}, s1{1.0, 1.0, 1.0};
    REQUIRE(std::abs(outcome_loss(y, t, mask, mu0, mu1, s0, s1) - kHalfLog2Pi) < 1e-12);
    REQUIRE(std::abs(kHalfLog2Pi - 0.918939) < 1e-6);
}

TEST_CASE("only the factual head contributes") {
    const std::vector<double> y{1.0};
    const std::vector<double> t{1.0};
    const std::vector<std::uint8_t> mask{1};
    const std::vector<double> mu1{0.3}, s0{1.0}, s1{2.0};
    const double a = outcome_loss(y, t, mask, {0.0}, mu1, s0, s1);
    const double b = outcome_loss(y, t, mask, {123.0}, mu1, s0, s1);  // perturb mu0
    REQUIRE(a == b);
}

TEST_CASE("single row closed form: y=0, mu1=1, sigma1=1, t=1") {
    const double got = outcome_loss({0.0}, {1.0}, {1}, {0.0}, {1.0}, {1.0}, {1.0});
    REQUIRE(std::abs(got - (kHalfLog2Pi + 0.5)) < 1e-12);
}

TEST_CASE("outcome loss requires target rows") {
    REQUIRE_THROWS_AS(outcome_loss({1.0}, {1.0}, {0}, {0.0}, {0.0}, {1.0}, {1.0}),
                      std::invalid_argument);
}

TEST_CASE("propensity loss closed forms") {
    // Perfect prediction has vanishing loss (up to the clip).
    REQUIRE(propensity_loss({1.0, 0.0}, {1, 1}, {1.0 - 1e-12, 1e-12}) < 1e-9);
    // p = 0.5 everywhere -> ln 2.
    REQUIRE(std::abs(propensity_loss({1.0, 0.0, 1.0}, {1, 1, 1}, {0.5, 0.5, 0.5}) -
                     std::log(2.0)) < 1e-12);
    // Hand substitution: -(log 0.8 + log 0.4)/2.
    const double got = propensity_loss({1.0, 0.0}, {1, 1}, {0.8, 0.6});
    REQUIRE(std::abs(got - (-(std::log(0.8) + std::log(0.4)) / 2.0)) < 1e-12);
}

TEST_CASE("discriminator loss closed forms") {
    REQUIRE(discriminator_loss({1, 0}, {1.0, 0.0}) < 1e-9);
    REQUIRE(std::abs(discriminator_loss({1, 0}, {0.5, 0.5}) - std::log(2.0)) < 1e-12);
    const double got = discriminator_loss({1, 0}, {0.9, 0.2});
    REQUIRE(std::abs(got - (-(std::log(0.9) + std::log(0.8)) / 2.0)) < 1e-12);
}

TEST_CASE("adversarial loss closed forms, sign as published") {
    REQUIRE(std::abs(adversarial_loss({0.0, 0.0})) < 1e-9);
    REQUIRE(std::abs(adversarial_loss({0.5, 0.5}) - std::log(0.5)) < 1e-12);
    const double got = adversarial_loss({0.2, 0.8});
    REQUIRE(std::abs(got - (std::log(0.8) + std::log(0.2)) / 2.0) < 1e-12);
    // Clipping keeps the value finite even at D_hat = 1.
    REQUIRE(std::isfinite(adversarial_loss({1.0})));
}

TEST_CASE("reconstruction loss closed forms") {
    Matrix x(1, 2);
    x(0, 0) = 0.0;
    x(0, 1) = 1.0;
    Matrix xh = x;
    REQUIRE(reconstruction_loss(x, xh) == 0.0);
    xh(0, 0) = 1.0;
    REQUIRE(reconstruction_loss(x, xh) == 0.5);
    Matrix xd(2, 3, 0.0), xhd(2, 3, 0.25);  // constant offset delta -> delta^2
    REQUIRE(std::abs(reconstruction_loss(xd, xhd) - 0.0625) < 1e-15);
}

TEST_CASE("total loss composition") {
    LossWeights zero{0, 0, 0, 0, 0};
    REQUIRE(total_loss(1, 2, 3, -1, 0.5, zero, 1, 2).total == 0.0);
    LossWeights only_y{1, 0, 0, 0, 0};
    REQUIRE(total_loss(1.5, 2, 3, -1, 0.5, only_y, 1, 2).total == 1.5);
    LossWeights ones{};
    const LossBreakdown b = total_loss(1, 2, 3, -1, 0.5, ones, 1, 2);
    REQUIRE(std::abs(b.total - 5.5) < 1e-12);
    REQUIRE(std::abs(b.total - (b.l_y + b.l_t + b.l_d + b.l_a + b.l_r)) < 1e-12);
}

TEST_CASE("negative weights are rejected") {
    LossWeights w;
    w.adversarial = -1.0;
    REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("source rows never contribute: bitwise independence from masked labels") {
    const std::vector<std::uint8_t> mask{1, 0, 1, 0};
    std::vector<double> t{1.0, 0.0, 0.0, 1.0};
    std::vector<double> y{0.5, 3.0, -1.0, 2.0};
    const std::vector<double> mu0{0.1, 0.2, 0.3, 0.4}, mu1{1.1, 1.2, 1.3, 1.4};
    const std::vector<double> s0{1.0, 1.0, 1.0, 1.0}, s1{1.5, 1.5, 1.5, 1.5};
    const std::vector<double> prop{0.4, 0.2, 0.7, 0.9};
    const double ly1 = outcome_loss(y, t, mask, mu0, mu1, s0, s1);
    const double lt1 = propensity_loss(t, mask, prop);
    // Corrupt the masked storage.
    t[1] = 1.0;
    y[1] = 1e9;
    t[3] = 0.0;
    y[3] = -1e9;
    REQUIRE(outcome_loss(y, t, mask, mu0, mu1, s0, s1) == ly1);
    REQUIRE(propensity_loss(t, mask, prop) == lt1);
}

TEST_CASE("duplicating every row leaves every loss unchanged") {
    const std::vector<std::uint8_t> mask{1, 0, 1};
    const std::vector<double> t{1.0, 0.0, 0.0};
    const std::vector<double> y{0.5, 0.0, -1.0};
    const std::vector<double> mu0{0.1, 0.2, 0.3}, mu1{1.1, 1.2, 1.3};
    const std::vector<double> s0{1.0, 1.2, 1.4}, s1{1.5, 1.1, 0.9};
    const std::vector<double> prop{0.4, 0.2, 0.7};
    const std::vector<std::uint8_t> dom{1, 0, 1};
    const std::vector<double> dprob{0.6, 0.3, 0.8};
    Matrix x(3, 2), xh(3, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        x.data[i] = 0.1 * static_cast<double>(i);
        xh.data[i] = 0.2 * static_cast<double>(i);
    }

    auto dup = [](auto v) {
        auto out = v;
        out.insert(out.end(), v.begin(), v.end());
        return out;
    };
    Matrix x2(6, 2), xh2(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        x2.data[i] = x.data[i];
        x2.data[i + 6] = x.data[i];
        xh2.data[i] = xh.data[i];
        xh2.data[i + 6] = xh.data[i];
    }

    REQUIRE(std::abs(outcome_loss(dup(y), dup(t), dup(mask), dup(mu0), dup(mu1), dup(s0), dup(s1)) -
                     outcome_loss(y, t, mask, mu0, mu1, s0, s1)) < 1e-12);
    REQUIRE(std::abs(propensity_loss(dup(t), dup(mask), dup(prop)) -
                     propensity_loss(t, mask, prop)) < 1e-12);
    REQUIRE(std::abs(discriminator_loss(dup(dom), dup(dprob)) - discriminator_loss(dom, dprob)) <
            1e-12);
    REQUIRE(std::abs(adversarial_loss(dup(dprob)) - adversarial_loss(dprob)) < 1e-12);
    REQUIRE(std::abs(reconstruction_loss(x2, xh2) - reconstruction_loss(x, xh)) < 1e-12);
}

TEST_CASE("losses stay finite under extreme probabilities") {
    REQUIRE(std::isfinite(propensity_loss({1.0}, {1}, {0.0})));
    REQUIRE(std::isfinite(discriminator_loss({0}, {1.0})));
    REQUIRE(std::isfinite(adversarial_loss({1.0})));
}
