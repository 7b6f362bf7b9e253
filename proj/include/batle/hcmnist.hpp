#pragma once
// HCMNIST benchmark: two digit classes form the labeled target-domain, all
// remaining digits form the unlabeled source-domain. Each target image is
// reduced to a scalar manifold position phi via its average intensity; phi
// drives the treatment probability and the outcome surface.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/dataset.hpp"
#include "batle/kernels.hpp"
#include "batle/matrix.hpp"
#include "batle/mnist_idx.hpp"
#include "batle/rng.hpp"

#include <json.hpp>

namespace batle {

struct DigitStats {
    double mean = 0.0;  // mean of per-image average intensity
    double sd = 0.0;
};

struct HcmnistConfig {
    int digit_low = 3;    // c_i, mapped onto [range_low_min, range_low_max]
    int digit_high = 5;   // c_j, mapped onto [range_high_min, range_high_max]
    double range_low_min = -2.0;
    double range_low_max = 0.0;
    double range_high_min = 0.0;
    double range_high_max = 2.0;
    double clip_bound = 1.4;
    bool literal_phi_map = false;  // reproduce the uncorrected published map
    DigitStats stats_low{};        // filled from data by generate_hcmnist
    DigitStats stats_high{};

    void validate() const {
        if (digit_low == digit_high)
            throw std::invalid_argument("HcmnistConfig: target digits must differ");
        if (digit_low < 0 || digit_low > 9 || digit_high < 0 || digit_high > 9)
            throw std::invalid_argument("HcmnistConfig: digits must lie in 0..9");
        if (clip_bound <= 0.0) throw std::invalid_argument("HcmnistConfig: clip_bound must be positive");
        if (range_low_min >= range_low_max || range_high_min >= range_high_max)
            throw std::invalid_argument("HcmnistConfig: digit ranges must be nonempty");
    }

    const DigitStats& stats_for(int digit) const {
        if (digit == digit_low) return stats_low;
        if (digit == digit_high) return stats_high;
        throw std::invalid_argument("HcmnistConfig: digit " + std::to_string(digit) +
                                    " is not a target digit");
    }

    std::pair<double, double> range_for(int digit) const {
        if (digit == digit_low) return {range_low_min, range_low_max};
        if (digit == digit_high) return {range_high_min, range_high_max};
        throw std::invalid_argument("HcmnistConfig: digit " + std::to_string(digit) +
                                    " is not a target digit");
    }
};

// Scalar manifold position for one digit class. The standardized intensity z
// is clipped to [-b, b] and mapped affinely onto [Min_c, Max_c]; the literal
// flag instead applies (z - Min_c) * (Max_c - Min_c) / (2b), which can leave
// the stated range.
inline std::vector<double> compute_phi(const std::vector<double>& mean_intensities, int digit,
                                       const HcmnistConfig& config) {
    config.validate();
    const DigitStats& st = config.stats_for(digit);
    if (st.sd <= 0.0) throw std::invalid_argument("compute_phi: digit stats sd must be positive");
    const auto [lo, hi] = config.range_for(digit);
    const double b = config.clip_bound;
    std::vector<double> phi(mean_intensities.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double z = clip(standardize(mean_intensities[i], st.mean, st.sd), -b, b);
        phi[i] = config.literal_phi_map ? (z - lo) * (hi - lo) / (2.0 * b)
                                        : (z + b) * (hi - lo) / (2.0 * b) + lo;
    }
    return phi;
}

inline double hcmnist_outcome(double t, double phi, double eps) {
    const double s = 2.0 * t - 1.0;
    return s * phi + s - 2.0 * std::sin(2.0 * s * phi) + 2.0 * (1.0 + 0.5 * phi) + eps;
}

struct HcmnistResult {
    DomainDataset target;
    DomainDataset source;
    std::vector<double> phi;   // per target row
    HcmnistConfig resolved;    // config with digit stats filled in
};

namespace detail {

inline double mean_intensity(const ImageSet& images, std::size_t i) {
    const std::uint8_t* px = images.image(i);
    double s = 0.0;
    for (std::size_t k = 0; k < images.image_size(); ++k) s += px[k];
    return s / (255.0 * static_cast<double>(images.image_size()));
}

}  // namespace detail

inline HcmnistResult generate_hcmnist(const ImageSet& images, const HcmnistConfig& config,
                                      RngStream& rng) {
    config.validate();
    if (images.count == 0 || images.labels.size() != images.count)
        throw std::invalid_argument("generate_hcmnist: image set is empty or unlabeled");

    std::vector<std::size_t> target_idx, source_idx;
    for (std::size_t i = 0; i < images.count; ++i) {
        const int d = images.labels[i];
        if (d == config.digit_low || d == config.digit_high)
            target_idx.push_back(i);
        else
            source_idx.push_back(i);
    }
    auto count_digit = [&](int d) {
        std::size_t c = 0;
        for (std::size_t i : target_idx)
            if (images.labels[i] == d) ++c;
        return c;
    };
    if (count_digit(config.digit_low) < 2 || count_digit(config.digit_high) < 2)
        throw std::invalid_argument("generate_hcmnist: need at least 2 images of each target digit");
    if (source_idx.empty())
        throw std::invalid_argument("generate_hcmnist: need at least one non-target digit for the source-domain");

    // Per-digit stats of average image intensity, over all images of the digit.
    HcmnistResult out;
    out.resolved = config;
    std::vector<double> xbar(target_idx.size());
    for (int which = 0; which < 2; ++which) {
        const int digit = which == 0 ? config.digit_low : config.digit_high;
        std::vector<double> vals;
        for (std::size_t k = 0; k < target_idx.size(); ++k) {
            if (images.labels[target_idx[k]] == digit) {
                xbar[k] = detail::mean_intensity(images, target_idx[k]);
                vals.push_back(xbar[k]);
            }
        }
        DigitStats st{vec_mean(vals), vec_sd(vals)};
        if (st.sd <= 0.0)
            throw std::invalid_argument("generate_hcmnist: digit " + std::to_string(digit) +
                                        " has zero intensity spread");
        (which == 0 ? out.resolved.stats_low : out.resolved.stats_high) = st;
    }

    const std::size_t n_t = target_idx.size();
    const std::size_t dim = images.image_size();
    out.target.is_target = true;
    out.target.covariates = Matrix(n_t, dim);
    out.target.treatments.resize(n_t);
    out.target.outcomes.resize(n_t);
    out.phi.resize(n_t);
    GroundTruth gt;
    gt.mu0.resize(n_t);
    gt.mu1.resize(n_t);

    for (std::size_t k = 0; k < n_t; ++k) {
        const std::size_t i = target_idx[k];
        const std::uint8_t* px = images.image(i);
        double* o = out.target.covariates.row(k);
        for (std::size_t p = 0; p < dim; ++p) o[p] = px[p] / 255.0;

        const std::vector<double> one{xbar[k]};
        const double phi = compute_phi(one, images.labels[i], out.resolved)[0];
        out.phi[k] = phi;

        const double t = rng.bernoulli(sigmoid(2.0 * phi + 0.5)) ? 1.0 : 0.0;
        const double eps = rng.normal();
        out.target.treatments[k] = t;
        out.target.outcomes[k] = hcmnist_outcome(t, phi, eps);
        gt.mu0[k] = hcmnist_outcome(0.0, phi, 0.0);
        gt.mu1[k] = hcmnist_outcome(1.0, phi, 0.0);
    }
    gt.true_ate = vec_mean(gt.mu1) - vec_mean(gt.mu0);
    out.target.ground_truth = std::move(gt);

    out.source.is_target = false;
    out.source.covariates = Matrix(source_idx.size(), dim);
    for (std::size_t k = 0; k < source_idx.size(); ++k) {
        const std::uint8_t* px = images.image(source_idx[k]);
        double* o = out.source.covariates.row(k);
        for (std::size_t p = 0; p < dim; ++p) o[p] = px[p] / 255.0;
    }

    out.target.validate();
    out.source.validate();
    return out;
}

inline nlohmann::json hcmnist_config_json(const HcmnistConfig& c) {
    return nlohmann::json{{"digit_low", c.digit_low},
                          {"digit_high", c.digit_high},
                          {"range_low", {c.range_low_min, c.range_low_max}},
                          {"range_high", {c.range_high_min, c.range_high_max}},
                          {"clip_bound", c.clip_bound},
                          {"literal_phi_map", c.literal_phi_map},
                          {"stats_low", {{"mean", c.stats_low.mean}, {"sd", c.stats_low.sd}}},
                          {"stats_high", {{"mean", c.stats_high.mean}, {"sd", c.stats_high.sd}}}};
}

}  // namespace batle
