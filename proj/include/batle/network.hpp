#pragma once
// Multi-head feedforward network: shared representation f, propensity head g,
// two outcome heads (Gaussian mean/scale or plain point heads), an optional
// domain discriminator d, and an optional reconstruction decoder r that
// mirrors f. Forward supports inference, sampled inverted dropout, and exact
// replay of stored dropout masks; backward produces analytic gradients for
// every parameter, which the test suite checks against finite differences.

#include <array>
#include <cstddef>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/kernels.hpp"
#include "batle/matrix.hpp"
#include "batle/rng.hpp"

#include <json.hpp>

namespace batle {

enum class Activation { silu, tanh };
enum class OutcomeHeadKind { gaussian, point };
enum class DropoutMode { off, sampled, fixed };

// The discriminator training phase only needs the trunk and the d head;
// scoping the forward pass there skips the other heads entirely.
enum class ForwardScope { full, discriminator };

struct NetworkConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> shared_widths{200, 200, 200};
    std::vector<std::size_t> head_widths{100, 100};
    double dropout_rate = 0.1;
    bool discriminator_enabled = true;
    bool reconstruction_enabled = true;
    double sigma_floor = 1e-3;
    Activation activation = Activation::silu;
    OutcomeHeadKind outcome_head = OutcomeHeadKind::gaussian;

    std::size_t repr_dim() const { return shared_widths.back(); }

    // Decoder mirrors f: hidden widths are the shared widths minus the last,
    // reversed, followed by a linear layer back to input_dim.
    std::vector<std::size_t> decoder_hidden() const {
        std::vector<std::size_t> h(shared_widths.rbegin() + 1, shared_widths.rend());
        return h;
    }

    void validate() const {
        if (input_dim == 0) throw std::invalid_argument("NetworkConfig: input_dim must be positive");
        if (shared_widths.empty()) throw std::invalid_argument("NetworkConfig: shared_widths empty");
        for (std::size_t w : shared_widths)
            if (w == 0) throw std::invalid_argument("NetworkConfig: zero shared width");
        for (std::size_t w : head_widths)
            if (w == 0) throw std::invalid_argument("NetworkConfig: zero head width");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("NetworkConfig: dropout_rate must lie in [0,1)");
        if (sigma_floor <= 0.0) throw std::invalid_argument("NetworkConfig: sigma_floor must be positive");
    }
};

struct Linear {
    Matrix w;               // fan_in x fan_out
    std::vector<double> b;  // fan_out
};
using LayerStack = std::vector<Linear>;

struct Parameters {
    LayerStack shared;
    LayerStack propensity;
    LayerStack outcome0;
    LayerStack outcome1;
    LayerStack discriminator;  // empty when the head is disabled
    LayerStack decoder;        // empty when the head is disabled
};
using Gradients = Parameters;

inline std::array<LayerStack Parameters::*, 6> parameter_blocks() {
    return {&Parameters::shared,     &Parameters::propensity, &Parameters::outcome0,
            &Parameters::outcome1,   &Parameters::discriminator, &Parameters::decoder};
}

inline Parameters zeros_like(const Parameters& p) {
    Parameters z;
    for (auto member : parameter_blocks()) {
        const LayerStack& src = p.*member;
        LayerStack& dst = z.*member;
        dst.resize(src.size());
        for (std::size_t l = 0; l < src.size(); ++l) {
            dst[l].w = Matrix(src[l].w.rows, src[l].w.cols);
            dst[l].b.assign(src[l].b.size(), 0.0);
        }
    }
    return z;
}

namespace detail {

inline LayerStack make_stack(std::size_t in, const std::vector<std::size_t>& hidden,
                             std::size_t out, RngStream& rng) {
    LayerStack stack;
    std::size_t prev = in;
    auto push = [&](std::size_t width) {
        Linear layer;
        layer.w = Matrix(prev, width);
        const double sd = std::sqrt(2.0 / static_cast<double>(prev));
        for (double& v : layer.w.data) v = sd * rng.normal();
        layer.b.assign(width, 0.0);
        stack.push_back(std::move(layer));
        prev = width;
    };
    for (std::size_t w : hidden) push(w);
    if (out > 0) push(out);
    return stack;
}

}  // namespace detail

// He-normal weights (variance 2/fan_in), zero biases. Heads for disabled
// components draw nothing, so toggling them never shifts the other draws.
inline Parameters init_params(const NetworkConfig& cfg, RngStream& rng) {
    cfg.validate();
    Parameters p;
    std::vector<std::size_t> shared_hidden(cfg.shared_widths.begin(), cfg.shared_widths.end() - 1);
    p.shared = detail::make_stack(cfg.input_dim, shared_hidden, cfg.shared_widths.back(), rng);
    const std::size_t repr = cfg.repr_dim();
    const std::size_t out_width = cfg.outcome_head == OutcomeHeadKind::gaussian ? 2 : 1;
    p.propensity = detail::make_stack(repr, cfg.head_widths, 1, rng);
    p.outcome0 = detail::make_stack(repr, cfg.head_widths, out_width, rng);
    p.outcome1 = detail::make_stack(repr, cfg.head_widths, out_width, rng);
    if (cfg.discriminator_enabled) p.discriminator = detail::make_stack(repr, cfg.head_widths, 1, rng);
    if (cfg.reconstruction_enabled)
        p.decoder = detail::make_stack(repr, cfg.decoder_hidden(), cfg.input_dim, rng);
    return p;
}

struct DropoutMasks {
    std::vector<Matrix> shared, propensity, outcome0, outcome1, discriminator, decoder;
};

struct StackTrace {
    std::vector<Matrix> inputs;  // inputs[l] = batch fed into layer l
    std::vector<Matrix> preact;  // affine outputs, pre-activation
};

struct ForwardResult {
    Matrix z;  // representation after the final shared activation (+dropout)
    std::vector<double> prop_logit, propensity;
    std::vector<double> mu0, s0, sigma0;  // s = pre-softplus scale (gaussian heads)
    std::vector<double> mu1, s1, sigma1;
    std::vector<double> disc_logit, disc_prob;  // empty when the head is off
    Matrix reconstruction;                      // empty when the head is off
    DropoutMasks masks;                         // empty when dropout was inactive
    StackTrace tr_shared, tr_prop, tr_out0, tr_out1, tr_disc, tr_dec;
};

namespace detail {

inline double activate(Activation a, double x) {
    return a == Activation::silu ? silu(x) : std::tanh(x);
}
inline double activate_deriv(Activation a, double x) {
    if (a == Activation::silu) return silu_deriv(x);
    const double t = std::tanh(x);
    return 1.0 - t * t;
}

inline void affine(const Matrix& x, const Linear& layer, Matrix& out) {
    out = matmul(x, layer.w);
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* r = out.row(i);
        for (std::size_t j = 0; j < out.cols; ++j) r[j] += layer.b[j];
    }
}

inline void check_finite(const Matrix& m, const char* stack, std::size_t layer) {
    if (!m.all_finite())
        throw std::runtime_error(std::string("forward: non-finite activation in ") + stack +
                                 " layer " + std::to_string(layer));
}

// Runs one stack. Hidden layers get activation + dropout; the final layer is
// activated (and dropped) only when `final_activated` (the shared trunk).
inline Matrix run_stack(const LayerStack& stack, const char* name, const Matrix& input,
                        bool final_activated, const NetworkConfig& cfg, DropoutMode mode,
                        RngStream* rng, const std::vector<Matrix>* fixed_masks,
                        std::vector<Matrix>* masks_out, StackTrace* trace) {
    const bool dropout_on = mode != DropoutMode::off && cfg.dropout_rate > 0.0;
    const double keep = 1.0 - cfg.dropout_rate;
    Matrix cur = input;
    for (std::size_t l = 0; l < stack.size(); ++l) {
        if (trace) trace->inputs.push_back(cur);
        Matrix u;
        affine(cur, stack[l], u);
        check_finite(u, name, l);
        if (trace) trace->preact.push_back(u);
        const bool activated = (l + 1 < stack.size()) || final_activated;
        if (!activated) {
            cur = std::move(u);
            continue;
        }
        for (double& v : u.data) v = activate(cfg.activation, v);
        if (dropout_on) {
            Matrix mask(u.rows, u.cols);
            if (mode == DropoutMode::sampled) {
                for (double& m : mask.data) m = rng->bernoulli(cfg.dropout_rate) ? 0.0 : 1.0;
            } else {
                mask = fixed_masks->at(l);
            }
            for (std::size_t i = 0; i < u.size(); ++i) u.data[i] *= mask.data[i] / keep;
            if (masks_out) masks_out->push_back(std::move(mask));
        }
        cur = std::move(u);
    }
    return cur;
}

inline std::vector<double> col0(const Matrix& m) {
    std::vector<double> v(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) v[i] = m(i, 0);
    return v;
}

}  // namespace detail

// `rng` is required for sampled mode; `replay` for fixed mode.
inline ForwardResult forward(const NetworkConfig& cfg, const Parameters& params,
                             const Matrix& batch, DropoutMode mode, RngStream* rng = nullptr,
                             const DropoutMasks* replay = nullptr,
                             ForwardScope scope = ForwardScope::full) {
    cfg.validate();
    if (batch.cols != cfg.input_dim)
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols) +
                                    " != input_dim " + std::to_string(cfg.input_dim));
    if (mode == DropoutMode::sampled && rng == nullptr)
        throw std::invalid_argument("forward: sampled dropout needs an rng");
    if (mode == DropoutMode::fixed && replay == nullptr && cfg.dropout_rate > 0.0)
        throw std::invalid_argument("forward: fixed dropout needs masks");
    if (scope == ForwardScope::discriminator && !cfg.discriminator_enabled)
        throw std::invalid_argument("forward: discriminator scope with the head disabled");

    ForwardResult out;
    auto masks_of = [&](std::vector<Matrix> DropoutMasks::*m) {
        return replay ? &(replay->*m) : nullptr;
    };

    out.z = detail::run_stack(params.shared, "shared", batch, true, cfg, mode, rng,
                              masks_of(&DropoutMasks::shared), &out.masks.shared, &out.tr_shared);

    if (scope == ForwardScope::discriminator) {
        Matrix d = detail::run_stack(params.discriminator, "discriminator", out.z, false, cfg, mode,
                                     rng, masks_of(&DropoutMasks::discriminator),
                                     &out.masks.discriminator, &out.tr_disc);
        out.disc_logit = detail::col0(d);
        out.disc_prob.resize(out.disc_logit.size());
        for (std::size_t i = 0; i < out.disc_logit.size(); ++i)
            out.disc_prob[i] = sigmoid(out.disc_logit[i]);
        return out;
    }

    Matrix prop = detail::run_stack(params.propensity, "propensity", out.z, false, cfg, mode, rng,
                                    masks_of(&DropoutMasks::propensity), &out.masks.propensity,
                                    &out.tr_prop);
    out.prop_logit = detail::col0(prop);
    out.propensity.resize(out.prop_logit.size());
    for (std::size_t i = 0; i < out.prop_logit.size(); ++i)
        out.propensity[i] = sigmoid(out.prop_logit[i]);

    Matrix o0 = detail::run_stack(params.outcome0, "outcome0", out.z, false, cfg, mode, rng,
                                  masks_of(&DropoutMasks::outcome0), &out.masks.outcome0, &out.tr_out0);
    Matrix o1 = detail::run_stack(params.outcome1, "outcome1", out.z, false, cfg, mode, rng,
                                  masks_of(&DropoutMasks::outcome1), &out.masks.outcome1, &out.tr_out1);
    out.mu0 = detail::col0(o0);
    out.mu1 = detail::col0(o1);
    if (cfg.outcome_head == OutcomeHeadKind::gaussian) {
        out.s0.resize(o0.rows);
        out.s1.resize(o1.rows);
        out.sigma0.resize(o0.rows);
        out.sigma1.resize(o1.rows);
        for (std::size_t i = 0; i < o0.rows; ++i) {
            out.s0[i] = o0(i, 1);
            out.s1[i] = o1(i, 1);
            out.sigma0[i] = softplus(out.s0[i]) + cfg.sigma_floor;
            out.sigma1[i] = softplus(out.s1[i]) + cfg.sigma_floor;
        }
    }

    if (cfg.discriminator_enabled) {
        Matrix d = detail::run_stack(params.discriminator, "discriminator", out.z, false, cfg, mode,
                                     rng, masks_of(&DropoutMasks::discriminator),
                                     &out.masks.discriminator, &out.tr_disc);
        out.disc_logit = detail::col0(d);
        out.disc_prob.resize(out.disc_logit.size());
        for (std::size_t i = 0; i < out.disc_logit.size(); ++i)
            out.disc_prob[i] = sigmoid(out.disc_logit[i]);
    }
    if (cfg.reconstruction_enabled) {
        out.reconstruction =
            detail::run_stack(params.decoder, "decoder", out.z, false, cfg, mode, rng,
                              masks_of(&DropoutMasks::decoder), &out.masks.decoder, &out.tr_dec);
    }
    return out;
}

// Loss gradients with respect to the head outputs, per batch row. An empty
// vector means "no gradient for this output".
struct HeadGradients {
    std::vector<double> mu0, mu1;
    std::vector<double> sigma0, sigma1;  // w.r.t. the post-softplus sigma
    std::vector<double> propensity;      // w.r.t. p in (0,1)
    std::vector<double> disc;            // w.r.t. the discriminator probability
    Matrix reconstruction;               // w.r.t. x_hat
};

namespace detail {

inline Matrix backward_stack(const LayerStack& stack, const StackTrace& trace,
                             const std::vector<Matrix>& masks, bool final_activated,
                             const NetworkConfig& cfg, Matrix d_out, LayerStack& grads) {
    const bool dropout_on = !masks.empty();
    const double keep = 1.0 - cfg.dropout_rate;
    for (std::size_t li = stack.size(); li-- > 0;) {
        const bool activated = (li + 1 < stack.size()) || final_activated;
        Matrix d_u;
        if (activated) {
            d_u = std::move(d_out);
            if (dropout_on) {
                const Matrix& m = masks[li];
                for (std::size_t i = 0; i < d_u.size(); ++i) d_u.data[i] *= m.data[i] / keep;
            }
            const Matrix& pre = trace.preact[li];
            for (std::size_t i = 0; i < d_u.size(); ++i)
                d_u.data[i] *= activate_deriv(cfg.activation, pre.data[i]);
        } else {
            d_u = std::move(d_out);
        }
        Matrix gw = matmul_tn(trace.inputs[li], d_u);
        for (std::size_t i = 0; i < gw.size(); ++i) grads[li].w.data[i] += gw.data[i];
        const auto bsum = column_sums(d_u);
        for (std::size_t j = 0; j < bsum.size(); ++j) grads[li].b[j] += bsum[j];
        d_out = matmul_nt(d_u, stack[li].w);
    }
    return d_out;  // gradient w.r.t. the stack input
}

inline bool any_nonempty(const std::vector<double>& v) { return !v.empty(); }

}  // namespace detail

// Analytic gradients of a loss whose head-output gradients are `up`. The
// forward result must have been produced with retained traces (any mode; for
// dropout use the masks it recorded). `include_shared = false` stops the
// backward pass at the representation, for updates that freeze the trunk.
inline Gradients backward(const NetworkConfig& cfg, const Parameters& params,
                          const ForwardResult& fwd, const HeadGradients& up,
                          bool include_shared = true) {
    Gradients grads = zeros_like(params);
    const std::size_t b = fwd.tr_shared.inputs.empty() ? 0 : fwd.tr_shared.inputs[0].rows;
    Matrix dz(fwd.z.rows, fwd.z.cols);
    bool touched = false;

    if (detail::any_nonempty(up.mu0) || detail::any_nonempty(up.sigma0)) {
        const std::size_t w = cfg.outcome_head == OutcomeHeadKind::gaussian ? 2 : 1;
        Matrix d_out(b, w);
        for (std::size_t i = 0; i < b; ++i) {
            if (!up.mu0.empty()) d_out(i, 0) = up.mu0[i];
            if (w == 2 && !up.sigma0.empty())
                d_out(i, 1) = up.sigma0[i] * softplus_deriv(fwd.s0[i]);
        }
        Matrix d = detail::backward_stack(params.outcome0, fwd.tr_out0, fwd.masks.outcome0, false,
                                          cfg, std::move(d_out), grads.outcome0);
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data[i] += d.data[i];
        touched = true;
    }
    if (detail::any_nonempty(up.mu1) || detail::any_nonempty(up.sigma1)) {
        const std::size_t w = cfg.outcome_head == OutcomeHeadKind::gaussian ? 2 : 1;
        Matrix d_out(b, w);
        for (std::size_t i = 0; i < b; ++i) {
            if (!up.mu1.empty()) d_out(i, 0) = up.mu1[i];
            if (w == 2 && !up.sigma1.empty())
                d_out(i, 1) = up.sigma1[i] * softplus_deriv(fwd.s1[i]);
        }
        Matrix d = detail::backward_stack(params.outcome1, fwd.tr_out1, fwd.masks.outcome1, false,
                                          cfg, std::move(d_out), grads.outcome1);
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data[i] += d.data[i];
        touched = true;
    }
    if (detail::any_nonempty(up.propensity)) {
        Matrix d_out(b, 1);
        for (std::size_t i = 0; i < b; ++i) {
            const double p = fwd.propensity[i];
            d_out(i, 0) = up.propensity[i] * p * (1.0 - p);
        }
        Matrix d = detail::backward_stack(params.propensity, fwd.tr_prop, fwd.masks.propensity,
                                          false, cfg, std::move(d_out), grads.propensity);
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data[i] += d.data[i];
        touched = true;
    }
    if (detail::any_nonempty(up.disc)) {
        if (!cfg.discriminator_enabled)
            throw std::invalid_argument("backward: discriminator gradient with the head disabled");
        Matrix d_out(b, 1);
        for (std::size_t i = 0; i < b; ++i) {
            const double q = fwd.disc_prob[i];
            d_out(i, 0) = up.disc[i] * q * (1.0 - q);
        }
        Matrix d = detail::backward_stack(params.discriminator, fwd.tr_disc, fwd.masks.discriminator,
                                          false, cfg, std::move(d_out), grads.discriminator);
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data[i] += d.data[i];
        touched = true;
    }
    if (!up.reconstruction.empty()) {
        if (!cfg.reconstruction_enabled)
            throw std::invalid_argument("backward: reconstruction gradient with the head disabled");
        Matrix d = detail::backward_stack(params.decoder, fwd.tr_dec, fwd.masks.decoder, false, cfg,
                                          Matrix(up.reconstruction), grads.decoder);
        for (std::size_t i = 0; i < dz.size(); ++i) dz.data[i] += d.data[i];
        touched = true;
    }

    if (touched && include_shared)
        detail::backward_stack(params.shared, fwd.tr_shared, fwd.masks.shared, true, cfg,
                               std::move(dz), grads.shared);
    return grads;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON with the config and exact weight arrays.
// ---------------------------------------------------------------------------

inline nlohmann::json network_config_json(const NetworkConfig& c) {
    return nlohmann::json{
        {"input_dim", c.input_dim},
        {"shared_widths", c.shared_widths},
        {"head_widths", c.head_widths},
        {"dropout_rate", c.dropout_rate},
        {"discriminator_enabled", c.discriminator_enabled},
        {"reconstruction_enabled", c.reconstruction_enabled},
        {"sigma_floor", c.sigma_floor},
        {"activation", c.activation == Activation::silu ? "silu" : "tanh"},
        {"outcome_head", c.outcome_head == OutcomeHeadKind::gaussian ? "gaussian" : "point"}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
    NetworkConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.shared_widths = j.at("shared_widths").get<std::vector<std::size_t>>();
    c.head_widths = j.at("head_widths").get<std::vector<std::size_t>>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.discriminator_enabled = j.at("discriminator_enabled").get<bool>();
    c.reconstruction_enabled = j.at("reconstruction_enabled").get<bool>();
    c.sigma_floor = j.at("sigma_floor").get<double>();
    const std::string act = j.at("activation").get<std::string>();
    if (act == "silu")
        c.activation = Activation::silu;
    else if (act == "tanh")
        c.activation = Activation::tanh;
    else
        throw std::runtime_error("checkpoint: unknown activation '" + act + "'");
    const std::string oh = j.at("outcome_head").get<std::string>();
    if (oh == "gaussian")
        c.outcome_head = OutcomeHeadKind::gaussian;
    else if (oh == "point")
        c.outcome_head = OutcomeHeadKind::point;
    else
        throw std::runtime_error("checkpoint: unknown outcome head '" + oh + "'");
    return c;
}

inline void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                            const Parameters& params) {
    nlohmann::json j;
    j["format"] = "batle-checkpoint";
    j["version"] = 1;
    j["network"] = network_config_json(cfg);
    const char* names[] = {"shared", "propensity", "outcome0", "outcome1", "discriminator", "decoder"};
    auto blocks = parameter_blocks();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        nlohmann::json stack = nlohmann::json::array();
        for (const Linear& l : params.*blocks[bi]) {
            stack.push_back(nlohmann::json{
                {"rows", l.w.rows}, {"cols", l.w.cols}, {"w", l.w.data}, {"b", l.b}});
        }
        j["weights"][names[bi]] = std::move(stack);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
    out << j.dump();
}

inline std::pair<NetworkConfig, Parameters> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "batle-checkpoint" || j.value("version", 0) != 1)
        throw std::runtime_error("checkpoint: unsupported format in " + path);
    NetworkConfig cfg = network_config_from_json(j.at("network"));
    Parameters params;
    const char* names[] = {"shared", "propensity", "outcome0", "outcome1", "discriminator", "decoder"};
    auto blocks = parameter_blocks();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        LayerStack& stack = params.*blocks[bi];
        for (const auto& lj : j.at("weights").at(names[bi])) {
            Linear l;
            l.w.rows = lj.at("rows").get<std::size_t>();
            l.w.cols = lj.at("cols").get<std::size_t>();
            l.w.data = lj.at("w").get<std::vector<double>>();
            l.b = lj.at("b").get<std::vector<double>>();
            if (l.w.data.size() != l.w.rows * l.w.cols)
                throw std::runtime_error("checkpoint: corrupt weight block");
            stack.push_back(std::move(l));
        }
    }
    return {std::move(cfg), std::move(params)};
}

}  // namespace batle
