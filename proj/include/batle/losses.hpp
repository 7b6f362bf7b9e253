#pragma once
// The five training losses and their weighted total. Outcome and propensity
// terms average over the n_t mask-selected target rows; discriminator,
// adversarial, and reconstruction terms average over all n rows. Every
// probability is clipped to [1e-12, 1-1e-12] before a log, and the gradient
// of a clipped probability is zero, so analytic and finite-difference
// gradients agree everywhere.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "batle/matrix.hpp"
#include "batle/network.hpp"

namespace batle {

inline constexpr double kProbEps = 1e-12;

inline double clip_prob(double p) {
    return p < kProbEps ? kProbEps : (p > 1.0 - kProbEps ? 1.0 - kProbEps : p);
}

struct LossWeights {
    double outcome = 1.0;        // alpha_0
    double propensity = 1.0;     // alpha_1
    double discriminator = 1.0;  // alpha_2
    double adversarial = 1.0;    // alpha_3
    double reconstruction = 1.0; // alpha_4

    void validate() const {
        for (double a : {outcome, propensity, discriminator, adversarial, reconstruction})
            if (!(a >= 0.0) || !std::isfinite(a))
                throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
    }
};

struct LossBreakdown {
    double l_y = 0.0, l_t = 0.0, l_d = 0.0, l_a = 0.0, l_r = 0.0;
    double total = 0.0;
    std::size_t n_target = 0;
    std::size_t n = 0;
};

namespace detail {

inline std::size_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::size_t c = 0;
    for (auto m : mask) c += m != 0;
    return c;
}

}  // namespace detail

// Gaussian negative log likelihood on the factual head, averaged over target
// rows:  -(1/n_t) sum [ t log N(y | mu1, s1^2) + (1-t) log N(y | mu0, s0^2) ].
inline double outcome_loss(const std::vector<double>& y, const std::vector<double>& t,
                           const std::vector<std::uint8_t>& target_mask,
                           const std::vector<double>& mu0, const std::vector<double>& mu1,
                           const std::vector<double>& sigma0, const std::vector<double>& sigma1) {
    const std::size_t n_t = detail::mask_count(target_mask);
    if (n_t == 0) throw std::invalid_argument("outcome_loss: no target rows in batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < target_mask.size(); ++i) {
        if (!target_mask[i]) continue;
        const bool treated = t[i] > 0.5;
        const double mu = treated ? mu1[i] : mu0[i];
        const double sg = treated ? sigma1[i] : sigma0[i];
        const double d = y[i] - mu;
        acc += 0.5 * std::log(2.0 * std::numbers::pi * sg * sg) + d * d / (2.0 * sg * sg);
    }
    return acc / static_cast<double>(n_t);
}

inline void add_outcome_loss_grad(const std::vector<double>& y, const std::vector<double>& t,
                                  const std::vector<std::uint8_t>& target_mask,
                                  const ForwardResult& fwd, double weight, HeadGradients& up) {
    const std::size_t n = target_mask.size();
    const std::size_t n_t = detail::mask_count(target_mask);
    if (n_t == 0) throw std::invalid_argument("outcome_loss: no target rows in batch");
    if (up.mu0.empty()) up.mu0.assign(n, 0.0);
    if (up.mu1.empty()) up.mu1.assign(n, 0.0);
    if (up.sigma0.empty()) up.sigma0.assign(n, 0.0);
    if (up.sigma1.empty()) up.sigma1.assign(n, 0.0);
    const double inv = weight / static_cast<double>(n_t);
    for (std::size_t i = 0; i < n; ++i) {
        if (!target_mask[i]) continue;
        const bool treated = t[i] > 0.5;
        const double mu = treated ? fwd.mu1[i] : fwd.mu0[i];
        const double sg = treated ? fwd.sigma1[i] : fwd.sigma0[i];
        const double d = mu - y[i];
        const double dmu = inv * d / (sg * sg);
        const double dsg = inv * (1.0 / sg - d * d / (sg * sg * sg));
        if (treated) {
            up.mu1[i] += dmu;
            up.sigma1[i] += dsg;
        } else {
            up.mu0[i] += dmu;
            up.sigma0[i] += dsg;
        }
    }
}

// Point-head variant: mean squared error on the factual head.
inline double outcome_loss_mse(const std::vector<double>& y, const std::vector<double>& t,
                               const std::vector<std::uint8_t>& target_mask,
                               const std::vector<double>& mu0, const std::vector<double>& mu1) {
    const std::size_t n_t = detail::mask_count(target_mask);
    if (n_t == 0) throw std::invalid_argument("outcome_loss_mse: no target rows in batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < target_mask.size(); ++i) {
        if (!target_mask[i]) continue;
        const double d = y[i] - (t[i] > 0.5 ? mu1[i] : mu0[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(n_t);
}

inline void add_outcome_loss_mse_grad(const std::vector<double>& y, const std::vector<double>& t,
                                      const std::vector<std::uint8_t>& target_mask,
                                      const ForwardResult& fwd, double weight, HeadGradients& up) {
    const std::size_t n = target_mask.size();
    const std::size_t n_t = detail::mask_count(target_mask);
    if (n_t == 0) throw std::invalid_argument("outcome_loss_mse: no target rows in batch");
    if (up.mu0.empty()) up.mu0.assign(n, 0.0);
    if (up.mu1.empty()) up.mu1.assign(n, 0.0);
    const double inv = 2.0 * weight / static_cast<double>(n_t);
    for (std::size_t i = 0; i < n; ++i) {
        if (!target_mask[i]) continue;
        if (t[i] > 0.5)
            up.mu1[i] += inv * (fwd.mu1[i] - y[i]);
        else
            up.mu0[i] += inv * (fwd.mu0[i] - y[i]);
    }
}

// Bernoulli log likelihood of the treatment on target rows.
inline double propensity_loss(const std::vector<double>& t,
                              const std::vector<std::uint8_t>& target_mask,
                              const std::vector<double>& propensity) {
    const std::size_t n_t = detail::mask_count(target_mask);
    if (n_t == 0) throw std::invalid_argument("propensity_loss: no target rows in batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < target_mask.size(); ++i) {
        if (!target_mask[i]) continue;
        const double p = clip_prob(propensity[i]);
        acc -= t[i] > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    return acc / static_cast<double>(n_t);
}

inline void add_propensity_loss_grad(const std::vector<double>& t,
                                     const std::vector<std::uint8_t>& target_mask,
                                     const ForwardResult& fwd, double weight, HeadGradients& up) {
    const std::size_t n = target_mask.size();
    const std::size_t n_t = detail::mask_count(target_mask);
    if (n_t == 0) throw std::invalid_argument("propensity_loss: no target rows in batch");
    if (up.propensity.empty()) up.propensity.assign(n, 0.0);
    const double inv = weight / static_cast<double>(n_t);
    for (std::size_t i = 0; i < n; ++i) {
        if (!target_mask[i]) continue;
        const double p = fwd.propensity[i];
        if (p <= kProbEps || p >= 1.0 - kProbEps) continue;  // clipped: flat
        up.propensity[i] += inv * (t[i] > 0.5 ? -1.0 / p : 1.0 / (1.0 - p));
    }
}

// Binary cross entropy of the domain flag over all rows.
inline double discriminator_loss(const std::vector<std::uint8_t>& domain,
                                 const std::vector<double>& disc_prob) {
    if (domain.empty()) throw std::invalid_argument("discriminator_loss: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < domain.size(); ++i) {
        const double q = clip_prob(disc_prob[i]);
        acc -= domain[i] ? std::log(q) : std::log(1.0 - q);
    }
    return acc / static_cast<double>(domain.size());
}

inline void add_discriminator_loss_grad(const std::vector<std::uint8_t>& domain,
                                        const ForwardResult& fwd, double weight,
                                        HeadGradients& up) {
    const std::size_t n = domain.size();
    if (up.disc.empty()) up.disc.assign(n, 0.0);
    const double inv = weight / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = fwd.disc_prob[i];
        if (q <= kProbEps || q >= 1.0 - kProbEps) continue;
        up.disc[i] += inv * (domain[i] ? -1.0 / q : 1.0 / (1.0 - q));
    }
}

// Adversarial term, sign as published: (1/n) sum log(1 - D_hat).
inline double adversarial_loss(const std::vector<double>& disc_prob) {
    if (disc_prob.empty()) throw std::invalid_argument("adversarial_loss: empty batch");
    double acc = 0.0;
    for (double q : disc_prob) acc += std::log(1.0 - clip_prob(q));
    return acc / static_cast<double>(disc_prob.size());
}

inline void add_adversarial_loss_grad(const ForwardResult& fwd, double weight, HeadGradients& up) {
    const std::size_t n = fwd.disc_prob.size();
    if (up.disc.empty()) up.disc.assign(n, 0.0);
    const double inv = weight / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q = fwd.disc_prob[i];
        if (q <= kProbEps || q >= 1.0 - kProbEps) continue;
        up.disc[i] += inv * (-1.0 / (1.0 - q));
    }
}

// Mean squared error over all entries of the reconstruction.
inline double reconstruction_loss(const Matrix& x, const Matrix& x_hat) {
    if (!x.same_shape(x_hat)) throw std::invalid_argument("reconstruction_loss: shape mismatch");
    if (x.size() == 0) throw std::invalid_argument("reconstruction_loss: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data[i] - x_hat.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

inline void add_reconstruction_loss_grad(const Matrix& x, const ForwardResult& fwd, double weight,
                                         HeadGradients& up) {
    const Matrix& x_hat = fwd.reconstruction;
    if (!x.same_shape(x_hat)) throw std::invalid_argument("reconstruction_loss: shape mismatch");
    if (up.reconstruction.empty()) up.reconstruction = Matrix(x.rows, x.cols);
    const double inv = 2.0 * weight / static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        up.reconstruction.data[i] += inv * (x_hat.data[i] - x.data[i]);
}

// Weighted composition: total = a0 l_y + a1 l_t + a2 l_d + a3 l_a + a4 l_r.
inline LossBreakdown total_loss(double l_y, double l_t, double l_d, double l_a, double l_r,
                                const LossWeights& w, std::size_t n_target, std::size_t n) {
    w.validate();
    LossBreakdown b;
    b.l_y = l_y;
    b.l_t = l_t;
    b.l_d = l_d;
    b.l_a = l_a;
    b.l_r = l_r;
    b.total = w.outcome * l_y + w.propensity * l_t + w.discriminator * l_d + w.adversarial * l_a +
              w.reconstruction * l_r;
    b.n_target = n_target;
    b.n = n;
    return b;
}

}  // namespace batle
