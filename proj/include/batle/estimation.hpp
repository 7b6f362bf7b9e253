#pragma once
// MC-dropout prediction of the potential-outcome means, the ATE estimate
// tau_hat = mean(mu1_hat - mu0_hat) over the target-domain covariates, the
// MAE metric, and aggregation of repeated runs into a mean with a normal-
// approximation confidence interval.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "batle/matrix.hpp"
#include "batle/network.hpp"
#include "batle/rng.hpp"

namespace batle {

struct McPrediction {
    std::vector<double> mu0_mean, mu1_mean;  // across-pass averages
    std::vector<double> mu0_sd, mu1_sd;      // across-pass standard deviations
    std::size_t passes = 0;
};

// Averages the outcome-head means over `passes` stochastic forward passes
// with dropout active. With dropout_rate 0 every pass equals the dropout-off
// forward pass exactly.
inline McPrediction predict_mc_dropout(const NetworkConfig& cfg, const Parameters& params,
                                       const Matrix& covariates, std::size_t passes,
                                       RngStream& rng) {
    if (passes < 1) throw std::invalid_argument("predict_mc_dropout: passes must be >= 1");
    const std::size_t n = covariates.rows;
    McPrediction out;
    out.passes = passes;
    if (cfg.dropout_rate == 0.0) {
        // Every pass is bitwise identical; the average is the single pass.
        const ForwardResult fwd = forward(cfg, params, covariates, DropoutMode::off);
        out.mu0_mean = fwd.mu0;
        out.mu1_mean = fwd.mu1;
        out.mu0_sd.assign(n, 0.0);
        out.mu1_sd.assign(n, 0.0);
        return out;
    }
    out.mu0_mean.assign(n, 0.0);
    out.mu1_mean.assign(n, 0.0);
    std::vector<double> sq0(n, 0.0), sq1(n, 0.0);
    for (std::size_t p = 0; p < passes; ++p) {
        const ForwardResult fwd = forward(cfg, params, covariates, DropoutMode::sampled, &rng);
        for (std::size_t i = 0; i < n; ++i) {
            out.mu0_mean[i] += fwd.mu0[i];
            out.mu1_mean[i] += fwd.mu1[i];
            sq0[i] += fwd.mu0[i] * fwd.mu0[i];
            sq1[i] += fwd.mu1[i] * fwd.mu1[i];
        }
    }
    out.mu0_sd.assign(n, 0.0);
    out.mu1_sd.assign(n, 0.0);
    const double np = static_cast<double>(passes);
    for (std::size_t i = 0; i < n; ++i) {
        out.mu0_mean[i] /= np;
        out.mu1_mean[i] /= np;
        if (passes > 1) {
            const double v0 = std::max(0.0, (sq0[i] - np * out.mu0_mean[i] * out.mu0_mean[i]) / (np - 1.0));
            const double v1 = std::max(0.0, (sq1[i] - np * out.mu1_mean[i] * out.mu1_mean[i]) / (np - 1.0));
            out.mu0_sd[i] = std::sqrt(v0);
            out.mu1_sd[i] = std::sqrt(v1);
        }
    }
    return out;
}

struct AteEstimate {
    double tau_hat = 0.0;
    std::vector<double> mu0_hat, mu1_hat;
    std::vector<double> mu0_sd, mu1_sd;  // predictive spreads, diagnostics only
    std::size_t mc_passes = 0;
};

inline AteEstimate estimate_ate(const std::vector<double>& mu0_hat,
                                const std::vector<double>& mu1_hat) {
    if (mu0_hat.empty() || mu0_hat.size() != mu1_hat.size())
        throw std::invalid_argument("estimate_ate: inputs must be nonempty and equal length");
    AteEstimate out;
    out.mu0_hat = mu0_hat;
    out.mu1_hat = mu1_hat;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu0_hat.size(); ++i) acc += mu1_hat[i] - mu0_hat[i];
    out.tau_hat = acc / static_cast<double>(mu0_hat.size());
    return out;
}

inline AteEstimate estimate_ate(const McPrediction& pred) {
    AteEstimate out = estimate_ate(pred.mu0_mean, pred.mu1_mean);
    out.mu0_sd = pred.mu0_sd;
    out.mu1_sd = pred.mu1_sd;
    out.mc_passes = pred.passes;
    return out;
}

inline double mae(double tau_hat, double tau_true) {
    if (!std::isfinite(tau_hat) || !std::isfinite(tau_true))
        throw std::invalid_argument("mae: inputs must be finite");
    return std::abs(tau_hat - tau_true);
}

struct AggregateResult {
    double mean_mae = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t count = 0;  // B
};

// Mean with a normal-approximation CI. The conventional rounded z values are
// pinned so reported intervals match mean +/- 1.96 sd/sqrt(B) at 95%.
inline AggregateResult aggregate(const std::vector<double>& maes, double confidence = 0.95) {
    if (maes.empty()) throw std::invalid_argument("aggregate: need at least one value");
    double z = 0.0;
    if (confidence == 0.95)
        z = 1.96;
    else if (confidence == 0.9)
        z = 1.645;
    else if (confidence == 0.99)
        z = 2.576;
    else
        throw std::invalid_argument("aggregate: supported confidence levels are 0.9, 0.95, 0.99");
    AggregateResult out;
    out.count = maes.size();
    out.mean_mae = vec_mean(maes);
    const double half = z * vec_sd(maes) / std::sqrt(static_cast<double>(maes.size()));
    out.ci_low = out.mean_mae - half;
    out.ci_high = out.mean_mae + half;
    return out;
}

}  // namespace batle
