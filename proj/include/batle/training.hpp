#pragma once
// Mini-batch training with GAN-style alternating updates: per batch, the
// discriminator head is updated alone on its loss, then every other block is
// updated on the remaining weighted terms with the discriminator frozen (the
// adversarial term still backpropagates through the frozen head into the
// encoder). The literal joint minimization of the full weighted objective is
// available behind `routing = joint`.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/dataset.hpp"
#include "batle/io_util.hpp"
#include "batle/losses.hpp"
#include "batle/matrix.hpp"
#include "batle/network.hpp"
#include "batle/rng.hpp"

namespace batle {

enum class GradientRouting { alternating, joint };

struct TrainConfig {
    LossWeights weights{};
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    std::size_t disc_steps_per_batch = 1;
    std::uint64_t seed = 0;  // informational; the caller provides the stream
    std::optional<std::size_t> patience;  // early stop on a held-out target slice
    double validation_fraction = 0.1;
    GradientRouting routing = GradientRouting::alternating;

    void validate() const {
        weights.validate();
        if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("TrainConfig: moment parameters must lie in [0,1)");
        if (adam_epsilon <= 0.0) throw std::invalid_argument("TrainConfig: adam_epsilon must be positive");
        if (patience && !(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw std::invalid_argument("TrainConfig: validation_fraction must lie in (0,1)");
    }
};

enum class BlockFilter { all, disc_only, except_disc };

// First/second-moment adaptive update with bias correction, restricted to the
// selected parameter blocks. The discriminator gets its own instance so its
// step count advances only in its own phase.
class Adam {
public:
    Adam(const Parameters& shape, double lr, double b1, double b2, double eps, BlockFilter filter)
        : m_(zeros_like(shape)), v_(zeros_like(shape)), lr_(lr), b1_(b1), b2_(b2), eps_(eps),
          filter_(filter) {}

    void step(Parameters& params, const Gradients& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        auto blocks = parameter_blocks();
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            if (!selected(bi)) continue;
            LayerStack& p = params.*blocks[bi];
            const LayerStack& g = grads.*blocks[bi];
            LayerStack& m = m_.*blocks[bi];
            LayerStack& v = v_.*blocks[bi];
            for (std::size_t l = 0; l < p.size(); ++l) {
                update(p[l].w.data, g[l].w.data, m[l].w.data, v[l].w.data, bc1, bc2);
                update(p[l].b, g[l].b, m[l].b, v[l].b, bc1, bc2);
            }
        }
    }

    std::size_t steps() const { return t_; }

private:
    bool selected(std::size_t block_index) const {
        const bool is_disc = block_index == 4;  // parameter_blocks() order
        if (filter_ == BlockFilter::all) return true;
        return filter_ == BlockFilter::disc_only ? is_disc : !is_disc;
    }

    void update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double bc1, double bc2) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
            v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

    Parameters m_, v_;
    std::size_t t_ = 0;
    double lr_, b1_, b2_, eps_;
    BlockFilter filter_;
};

struct BatchView {
    Matrix x;
    std::vector<double> t, y;
    std::vector<std::uint8_t> domain, mask;
};

inline BatchView gather_batch(const CombinedDataset& data, const std::vector<std::size_t>& rows) {
    BatchView b;
    b.x = Matrix(rows.size(), data.dim());
    b.t.resize(rows.size());
    b.y.resize(rows.size());
    b.domain.resize(rows.size());
    b.mask.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t i = rows[k];
        const double* r = data.covariates.row(i);
        double* o = b.x.row(k);
        for (std::size_t j = 0; j < data.dim(); ++j) o[j] = r[j];
        b.domain[k] = data.domain[i];
        b.mask[k] = data.label_mask[i];
        if (data.label_mask[i]) {
            b.t[k] = data.treatment_at(i);
            b.y[k] = data.outcome_at(i);
        }
    }
    return b;
}

inline BatchView full_batch(const CombinedDataset& data) {
    std::vector<std::size_t> rows(data.n());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return gather_batch(data, rows);
}

namespace detail {

inline LossBreakdown batch_breakdown(const NetworkConfig& nc, const TrainConfig& tc,
                                     const BatchView& b, const ForwardResult& fwd) {
    const double l_y = nc.outcome_head == OutcomeHeadKind::gaussian
                           ? outcome_loss(b.y, b.t, b.mask, fwd.mu0, fwd.mu1, fwd.sigma0, fwd.sigma1)
                           : outcome_loss_mse(b.y, b.t, b.mask, fwd.mu0, fwd.mu1);
    const double l_t = propensity_loss(b.t, b.mask, fwd.propensity);
    const double l_d = nc.discriminator_enabled ? discriminator_loss(b.domain, fwd.disc_prob) : 0.0;
    const double l_a = nc.discriminator_enabled ? adversarial_loss(fwd.disc_prob) : 0.0;
    const double l_r = nc.reconstruction_enabled ? reconstruction_loss(b.x, fwd.reconstruction) : 0.0;
    std::size_t n_t = 0;
    for (auto m : b.mask) n_t += m != 0;
    return total_loss(l_y, l_t, l_d, l_a, l_r, tc.weights, n_t, b.mask.size());
}

}  // namespace detail

// Phase (a): one update of the discriminator block on alpha_2 * l_d. Only
// the trunk and the d head are evaluated; trunk gradients are not formed
// since every non-d block is frozen here.
inline void discriminator_step(const NetworkConfig& nc, const TrainConfig& tc, Parameters& params,
                               Adam& adam_disc, const BatchView& batch, RngStream& rng) {
    const ForwardResult fwd = forward(nc, params, batch.x, DropoutMode::sampled, &rng, nullptr,
                                      ForwardScope::discriminator);
    HeadGradients up;
    add_discriminator_loss_grad(batch.domain, fwd, tc.weights.discriminator, up);
    const Gradients grads = backward(nc, params, fwd, up, /*include_shared=*/false);
    adam_disc.step(params, grads);
}

// Phase (b): one update of every non-discriminator block on
// alpha_0 l_y + alpha_1 l_t + alpha_3 l_a + alpha_4 l_r; in joint routing the
// discriminator term joins in and all blocks move together.
inline LossBreakdown main_step(const NetworkConfig& nc, const TrainConfig& tc, Parameters& params,
                               Adam& adam_main, const BatchView& batch, RngStream& rng) {
    const ForwardResult fwd = forward(nc, params, batch.x, DropoutMode::sampled, &rng);
    HeadGradients up;
    if (nc.outcome_head == OutcomeHeadKind::gaussian)
        add_outcome_loss_grad(batch.y, batch.t, batch.mask, fwd, tc.weights.outcome, up);
    else
        add_outcome_loss_mse_grad(batch.y, batch.t, batch.mask, fwd, tc.weights.outcome, up);
    add_propensity_loss_grad(batch.t, batch.mask, fwd, tc.weights.propensity, up);
    if (nc.discriminator_enabled) {
        add_adversarial_loss_grad(fwd, tc.weights.adversarial, up);
        if (tc.routing == GradientRouting::joint)
            add_discriminator_loss_grad(batch.domain, fwd, tc.weights.discriminator, up);
    }
    if (nc.reconstruction_enabled)
        add_reconstruction_loss_grad(batch.x, fwd, tc.weights.reconstruction, up);
    const Gradients grads = backward(nc, params, fwd, up);
    adam_main.step(params, grads);
    return detail::batch_breakdown(nc, tc, batch, fwd);
}

struct EpochRecord {
    LossBreakdown train;
    std::optional<double> validation;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    Parameters params;
    TrainHistory history;
};

inline TrainResult train(const TrainConfig& tc, const NetworkConfig& nc_in,
                         const CombinedDataset& data, RngStream& rng) {
    tc.validate();
    NetworkConfig nc = nc_in;
    if (nc.input_dim == 0) nc.input_dim = data.dim();
    if (nc.input_dim != data.dim())
        throw std::invalid_argument("train: network input_dim does not match data dimension");
    nc.validate();
    if (data.n() == 0) throw std::invalid_argument("train: empty dataset");

    std::vector<std::size_t> target_rows, source_rows;
    std::size_t treated = 0, control = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.label_mask[i]) {
            target_rows.push_back(i);
            (data.treatment_at(i) > 0.5 ? treated : control) += 1;
        } else {
            source_rows.push_back(i);
        }
    }
    if (treated == 0 || control == 0)
        throw std::invalid_argument("train: target rows must include both treatment arms");

    Parameters params = init_params(nc, rng);

    // Optional validation slice, held out from the target rows.
    std::vector<std::size_t> val_rows;
    bool early_stop = tc.patience.has_value();
    if (early_stop) {
        std::vector<std::size_t> shuffled = target_rows;
        rng.shuffle(shuffled);
        std::size_t n_val = static_cast<std::size_t>(
            static_cast<double>(shuffled.size()) * tc.validation_fraction);
        if (n_val == 0 || shuffled.size() - n_val < 2) {
            early_stop = false;  // too little target data to hold anything out
        } else {
            val_rows.assign(shuffled.begin(), shuffled.begin() + n_val);
            target_rows.assign(shuffled.begin() + n_val, shuffled.end());
            std::size_t tr = 0, co = 0;
            for (std::size_t i : target_rows) (data.treatment_at(i) > 0.5 ? tr : co) += 1;
            if (tr == 0 || co == 0) {
                // Both arms must stay in the training slice.
                target_rows = shuffled;
                val_rows.clear();
                early_stop = false;
            }
        }
    }

    Adam adam_disc(params, tc.learning_rate, tc.beta1, tc.beta2, tc.adam_epsilon,
                   BlockFilter::disc_only);
    Adam adam_main(params, tc.learning_rate, tc.beta1, tc.beta2, tc.adam_epsilon,
                   tc.routing == GradientRouting::joint ? BlockFilter::all
                                                        : BlockFilter::except_disc);

    const BatchView val_batch = val_rows.empty() ? BatchView{} : gather_batch(data, val_rows);
    TrainResult out;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    Parameters best_params = params;

    const bool run_disc_phase = tc.routing == GradientRouting::alternating &&
                                nc.discriminator_enabled && tc.disc_steps_per_batch > 0;

    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(target_rows);
        rng.shuffle(source_rows);
        const std::size_t n_train = target_rows.size() + source_rows.size();
        std::size_t n_batches = (n_train + tc.batch_size - 1) / tc.batch_size;
        n_batches = std::min(std::max<std::size_t>(n_batches, 1), target_rows.size());

        LossBreakdown epoch_sum;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            // Contiguous per-domain chunks keep the global target:source ratio.
            auto chunk = [&](const std::vector<std::size_t>& rows, std::size_t k) {
                const std::size_t base = rows.size() / n_batches;
                const std::size_t extra = rows.size() % n_batches;
                const std::size_t begin = k * base + std::min(k, extra);
                const std::size_t len = base + (k < extra ? 1 : 0);
                return std::vector<std::size_t>(rows.begin() + begin, rows.begin() + begin + len);
            };
            std::vector<std::size_t> rows = chunk(target_rows, bi);
            const auto src = chunk(source_rows, bi);
            rows.insert(rows.end(), src.begin(), src.end());
            const BatchView batch = gather_batch(data, rows);

            if (run_disc_phase)
                for (std::size_t s = 0; s < tc.disc_steps_per_batch; ++s)
                    discriminator_step(nc, tc, params, adam_disc, batch, rng);
            const LossBreakdown b = main_step(nc, tc, params, adam_main, batch, rng);
            if (!std::isfinite(b.total))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            epoch_sum.l_y += b.l_y;
            epoch_sum.l_t += b.l_t;
            epoch_sum.l_d += b.l_d;
            epoch_sum.l_a += b.l_a;
            epoch_sum.l_r += b.l_r;
            epoch_sum.total += b.total;
        }
        const double inv = 1.0 / static_cast<double>(n_batches);
        EpochRecord rec;
        rec.train = total_loss(epoch_sum.l_y * inv, epoch_sum.l_t * inv, epoch_sum.l_d * inv,
                               epoch_sum.l_a * inv, epoch_sum.l_r * inv, tc.weights,
                               target_rows.size(), data.n());

        if (early_stop) {
            const ForwardResult vf = forward(nc, params, val_batch.x, DropoutMode::off);
            const double vy = nc.outcome_head == OutcomeHeadKind::gaussian
                                  ? outcome_loss(val_batch.y, val_batch.t, val_batch.mask, vf.mu0,
                                                 vf.mu1, vf.sigma0, vf.sigma1)
                                  : outcome_loss_mse(val_batch.y, val_batch.t, val_batch.mask,
                                                     vf.mu0, vf.mu1);
            const double vt = propensity_loss(val_batch.t, val_batch.mask, vf.propensity);
            const double val = tc.weights.outcome * vy + tc.weights.propensity * vt;
            rec.validation = val;
            if (val < best_val - 1e-12) {
                best_val = val;
                best_params = params;
                since_best = 0;
            } else if (++since_best > *tc.patience) {
                out.history.epochs.push_back(rec);
                params = best_params;
                break;
            }
        }
        out.history.epochs.push_back(rec);
    }

    out.params = std::move(params);
    return out;
}

inline void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::string out = "epoch,l_y,l_t,l_d,l_a,l_r,total\n";
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const LossBreakdown& b = history.epochs[e].train;
        out += std::to_string(e) + "," + format_double(b.l_y) + "," + format_double(b.l_t) + "," +
               format_double(b.l_d) + "," + format_double(b.l_a) + "," + format_double(b.l_r) +
               "," + format_double(b.total) + "\n";
    }
    write_text_file(path, out);
}

}  // namespace batle
