#pragma once
// Finite-difference gradient oracle shared by the network tests and the
// acceptance suite. Evaluates the five loss terms and the weighted total on
// a replayed-dropout forward pass and compares central differences against
// the analytic backward pass, parameter by parameter.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "batle/losses.hpp"
#include "batle/network.hpp"
#include "batle/rng.hpp"

namespace gradcheck {

using namespace batle;

struct CheckBatch {
    Matrix x;
    std::vector<double> t, y;
    std::vector<std::uint8_t> domain, mask;
};

inline CheckBatch random_batch(std::size_t rows, std::size_t dim, RngStream& rng) {
    CheckBatch b;
    b.x = Matrix(rows, dim);
    for (double& v : b.x.data) v = rng.normal();
    b.t.resize(rows);
    b.y.resize(rows);
    b.domain.resize(rows);
    b.mask.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        // Guarantee at least one target row; the rest mix both domains.
        const bool target = i == 0 || rng.bernoulli(0.6);
        b.domain[i] = target;
        b.mask[i] = target;
        b.t[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        b.y[i] = rng.normal();
    }
    return b;
}

inline std::vector<double*> flatten(Parameters& p) {
    std::vector<double*> out;
    for (auto member : parameter_blocks()) {
        for (Linear& l : p.*member) {
            for (double& v : l.w.data) out.push_back(&v);
            for (double& v : l.b) out.push_back(&v);
        }
    }
    return out;
}

inline std::vector<double> flatten_copy(const Parameters& p) {
    std::vector<double> out;
    for (auto member : parameter_blocks()) {
        for (const Linear& l : p.*member) {
            out.insert(out.end(), l.w.data.begin(), l.w.data.end());
            out.insert(out.end(), l.b.begin(), l.b.end());
        }
    }
    return out;
}

// The six objectives: l_y, l_t, l_d, l_a, l_r, and the weighted total.
inline std::vector<double> loss_values(const NetworkConfig& cfg, const CheckBatch& b,
                                       const ForwardResult& fwd, const LossWeights& w) {
    const double l_y = cfg.outcome_head == OutcomeHeadKind::gaussian
                           ? outcome_loss(b.y, b.t, b.mask, fwd.mu0, fwd.mu1, fwd.sigma0, fwd.sigma1)
                           : outcome_loss_mse(b.y, b.t, b.mask, fwd.mu0, fwd.mu1);
    const double l_t = propensity_loss(b.t, b.mask, fwd.propensity);
    const double l_d = cfg.discriminator_enabled ? discriminator_loss(b.domain, fwd.disc_prob) : 0.0;
    const double l_a = cfg.discriminator_enabled ? adversarial_loss(fwd.disc_prob) : 0.0;
    const double l_r = cfg.reconstruction_enabled ? reconstruction_loss(b.x, fwd.reconstruction) : 0.0;
    const LossBreakdown total = total_loss(l_y, l_t, l_d, l_a, l_r, w, 0, b.mask.size());
    return {l_y, l_t, l_d, l_a, l_r, total.total};
}

inline HeadGradients term_gradient(const NetworkConfig& cfg, const CheckBatch& b,
                                   const ForwardResult& fwd, std::size_t term,
                                   const LossWeights& w) {
    HeadGradients up;
    switch (term) {
        case 0:
            if (cfg.outcome_head == OutcomeHeadKind::gaussian)
                add_outcome_loss_grad(b.y, b.t, b.mask, fwd, 1.0, up);
            else
                add_outcome_loss_mse_grad(b.y, b.t, b.mask, fwd, 1.0, up);
            break;
        case 1:
            add_propensity_loss_grad(b.t, b.mask, fwd, 1.0, up);
            break;
        case 2:
            if (cfg.discriminator_enabled) add_discriminator_loss_grad(b.domain, fwd, 1.0, up);
            break;
        case 3:
            if (cfg.discriminator_enabled) add_adversarial_loss_grad(fwd, 1.0, up);
            break;
        case 4:
            if (cfg.reconstruction_enabled) add_reconstruction_loss_grad(b.x, fwd, 1.0, up);
            break;
        case 5:
            if (cfg.outcome_head == OutcomeHeadKind::gaussian)
                add_outcome_loss_grad(b.y, b.t, b.mask, fwd, w.outcome, up);
            else
                add_outcome_loss_mse_grad(b.y, b.t, b.mask, fwd, w.outcome, up);
            add_propensity_loss_grad(b.t, b.mask, fwd, w.propensity, up);
            if (cfg.discriminator_enabled) {
                add_discriminator_loss_grad(b.domain, fwd, w.discriminator, up);
                add_adversarial_loss_grad(fwd, w.adversarial, up);
            }
            if (cfg.reconstruction_enabled)
                add_reconstruction_loss_grad(b.x, fwd, w.reconstruction, up);
            break;
    }
    return up;
}

struct CheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_term = 0;
    std::size_t params_checked = 0;
};

// Central differences at h with a relative-error floor of 1e-5 in the
// denominator (the FD noise floor is ~1e-10 for these loss scales).
inline CheckResult check_gradients(const NetworkConfig& cfg, Parameters params,
                                   const CheckBatch& batch, const LossWeights& w,
                                   const DropoutMasks* masks, double h = 1e-5) {
    const ForwardResult base = forward(cfg, params, batch.x, DropoutMode::fixed, nullptr, masks);

    std::vector<std::vector<double>> analytic(6);
    for (std::size_t term = 0; term < 6; ++term) {
        const HeadGradients up = term_gradient(cfg, batch, base, term, w);
        const Gradients g = backward(cfg, params, base, up);
        analytic[term] = flatten_copy(g);
    }

    CheckResult res;
    std::vector<double*> slots = flatten(params);
    res.params_checked = slots.size();
    for (std::size_t pi = 0; pi < slots.size(); ++pi) {
        const double saved = *slots[pi];
        *slots[pi] = saved + h;
        const ForwardResult fp = forward(cfg, params, batch.x, DropoutMode::fixed, nullptr, masks);
        const auto lp = loss_values(cfg, batch, fp, w);
        *slots[pi] = saved - h;
        const ForwardResult fm = forward(cfg, params, batch.x, DropoutMode::fixed, nullptr, masks);
        const auto lm = loss_values(cfg, batch, fm, w);
        *slots[pi] = saved;
        for (std::size_t term = 0; term < 6; ++term) {
            const double fd = (lp[term] - lm[term]) / (2.0 * h);
            const double an = analytic[term][pi];
            const double rel =
                std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-5});
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_term = term;
            }
        }
    }
    return res;
}

}  // namespace gradcheck
