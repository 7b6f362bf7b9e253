#pragma once
// Baselines sharing the evaluation harness.
//
//   causal_batle        full network, MC-dropout prediction (30 passes)
//   bayesian_dragonnet  causal_batle minus the transfer components: both
//                       transfer heads disabled, alpha_2=alpha_3=alpha_4=0
//   dragonnet           bayesian_dragonnet with point outcome heads, squared
//                       error outcome loss, and single-pass dropout-off
//                       prediction
//   aipw                closed-form doubly robust estimator with cross-fitted
//                       ridge outcome models and an L2 logistic propensity
//
// The preset table is documented in the README.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "batle/estimation.hpp"
#include "batle/kernels.hpp"
#include "batle/losses.hpp"
#include "batle/matrix.hpp"
#include "batle/network.hpp"
#include "batle/rng.hpp"

namespace batle {

struct ModelPreset {
    std::string name;
    NetworkConfig network;
    LossWeights weights;
    std::size_t mc_passes = 30;
    bool mc_dropout = true;  // dropout active at prediction time
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"causal_batle", "bayesian_dragonnet", "dragonnet"};
    return names;
}

inline ModelPreset make_preset(const std::string& name, const NetworkConfig& base,
                               const LossWeights& base_weights) {
    ModelPreset p;
    p.name = name;
    p.network = base;
    p.weights = base_weights;
    if (name == "causal_batle") return p;
    if (name == "bayesian_dragonnet" || name == "dragonnet") {
        p.network.discriminator_enabled = false;
        p.network.reconstruction_enabled = false;
        p.weights.discriminator = 0.0;
        p.weights.adversarial = 0.0;
        p.weights.reconstruction = 0.0;
        if (name == "dragonnet") {
            p.network.outcome_head = OutcomeHeadKind::point;
            p.mc_passes = 1;
            p.mc_dropout = false;
        }
        return p;
    }
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("make_preset: unknown preset '" + name + "' (valid: " + valid + ")");
}

// ---------------------------------------------------------------------------
// AIPW
// ---------------------------------------------------------------------------

struct AipwOptions {
    std::size_t folds = 2;
    double ridge_lambda = 1.0;    // L2 penalty of the outcome regressions
    double logistic_l2 = 1.0;     // L2 penalty of the propensity regression
    double propensity_clip = 0.01;
    std::size_t logistic_max_iter = 100;

    void validate() const {
        if (folds < 2) throw std::invalid_argument("AipwOptions: folds must be >= 2");
        if (ridge_lambda < 0.0 || logistic_l2 < 0.0)
            throw std::invalid_argument("AipwOptions: penalties must be >= 0");
        if (!(propensity_clip > 0.0 && propensity_clip < 0.5))
            throw std::invalid_argument("AipwOptions: propensity_clip must lie in (0, 0.5)");
    }
};

namespace detail {

// Solves A x = b for symmetric positive definite A (in-place Cholesky).
inline std::vector<double> cholesky_solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) throw std::invalid_argument("cholesky_solve: shape mismatch");
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (d <= 0.0) throw std::runtime_error("cholesky_solve: matrix not positive definite");
        a(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / a(j, j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
        b[i] = s / a(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a(k, i) * b[k];
        b[i] = s / a(i, i);
    }
    return b;
}

struct LinearModel {
    std::vector<double> beta;  // beta[0] is the intercept
    double predict(const double* x, std::size_t dim) const {
        double s = beta[0];
        for (std::size_t j = 0; j < dim; ++j) s += beta[j + 1] * x[j];
        return s;
    }
};

// Ridge regression on the given rows; the intercept is unpenalized.
inline LinearModel ridge_fit(const Matrix& x, const std::vector<double>& y,
                             const std::vector<std::size_t>& rows, double lambda) {
    const std::size_t p = x.cols + 1;
    Matrix xtx(p, p);
    std::vector<double> xty(p, 0.0);
    for (std::size_t r : rows) {
        const double* xi = x.row(r);
        auto at = [&](std::size_t j) { return j == 0 ? 1.0 : xi[j - 1]; };
        for (std::size_t a = 0; a < p; ++a) {
            xty[a] += at(a) * y[r];
            for (std::size_t b = a; b < p; ++b) xtx(a, b) += at(a) * at(b);
        }
    }
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < a; ++b) xtx(a, b) = xtx(b, a);
    for (std::size_t a = 1; a < p; ++a) xtx(a, a) += lambda;
    xtx(0, 0) += 1e-12;  // guards the all-zero-row corner
    LinearModel m;
    m.beta = cholesky_solve(std::move(xtx), std::move(xty));
    return m;
}

struct LogisticModel {
    std::vector<double> beta;
    double final_grad_norm = 0.0;
    double predict(const double* x, std::size_t dim) const {
        double s = beta[0];
        for (std::size_t j = 0; j < dim; ++j) s += beta[j + 1] * x[j];
        return sigmoid(s);
    }
};

// Newton/IRLS with an L2 penalty on the non-intercept weights.
inline LogisticModel logistic_fit(const Matrix& x, const std::vector<double>& t,
                                  const std::vector<std::size_t>& rows, double l2,
                                  std::size_t max_iter) {
    const std::size_t p = x.cols + 1;
    LogisticModel m;
    m.beta.assign(p, 0.0);
    std::vector<double> grad(p), prob(rows.size());
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        Matrix hess(p, p);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const std::size_t r = rows[k];
            const double* xi = x.row(r);
            prob[k] = m.predict(xi, x.cols);
            const double resid = prob[k] - t[r];
            const double w = std::max(prob[k] * (1.0 - prob[k]), 1e-10);
            auto at = [&](std::size_t j) { return j == 0 ? 1.0 : xi[j - 1]; };
            for (std::size_t a = 0; a < p; ++a) {
                grad[a] += at(a) * resid;
                for (std::size_t b = a; b < p; ++b) hess(a, b) += w * at(a) * at(b);
            }
        }
        for (std::size_t a = 1; a < p; ++a) {
            grad[a] += l2 * m.beta[a];
            hess(a, a) += l2;
        }
        hess(0, 0) += 1e-10;
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < a; ++b) hess(a, b) = hess(b, a);

        double gn = 0.0;
        for (double g : grad) gn += g * g;
        m.final_grad_norm = std::sqrt(gn);
        if (m.final_grad_norm < 1e-8) break;

        const auto delta = cholesky_solve(std::move(hess), grad);
        for (std::size_t a = 0; a < p; ++a) m.beta[a] -= delta[a];
    }
    return m;
}

}  // namespace detail

// Doubly robust score with given nuisances; e_hat is clipped. The returned
// per-sample potentials are the augmented components, so tau_hat stays the
// mean of their difference.
inline AteEstimate aipw_formula(const std::vector<double>& t, const std::vector<double>& y,
                                const std::vector<double>& e_hat,
                                const std::vector<double>& mu0_hat,
                                const std::vector<double>& mu1_hat, double clip_at = 0.01) {
    const std::size_t n = t.size();
    if (n == 0 || y.size() != n || e_hat.size() != n || mu0_hat.size() != n || mu1_hat.size() != n)
        throw std::invalid_argument("aipw_formula: length mismatch");
    std::vector<double> m0(n), m1(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = clip(e_hat[i], clip_at, 1.0 - clip_at);
        m1[i] = mu1_hat[i] + (t[i] > 0.5 ? (y[i] - mu1_hat[i]) / e : 0.0);
        m0[i] = mu0_hat[i] + (t[i] > 0.5 ? 0.0 : (y[i] - mu0_hat[i]) / (1.0 - e));
    }
    return estimate_ate(m0, m1);
}

// Cross-fitted AIPW: per fold, nuisances are fitted on the complement and
// evaluated on the fold.
inline AteEstimate aipw_estimate(const Matrix& covariates, const std::vector<double>& t,
                                 const std::vector<double>& y, const AipwOptions& opt,
                                 RngStream& rng) {
    opt.validate();
    const std::size_t n = covariates.rows;
    if (n < 20) throw std::invalid_argument("aipw_estimate: need at least 20 rows");
    if (t.size() != n || y.size() != n) throw std::invalid_argument("aipw_estimate: length mismatch");
    std::size_t treated = 0;
    for (double ti : t) treated += ti > 0.5;
    if (treated == 0 || treated == n)
        throw std::invalid_argument("aipw_estimate: both treatment arms are required");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<double> e_hat(n), mu0_hat(n), mu1_hat(n);
    for (std::size_t f = 0; f < opt.folds; ++f) {
        std::vector<std::size_t> fit_rows, eval_rows, fit0, fit1;
        for (std::size_t k = 0; k < n; ++k) {
            if (k % opt.folds == f)
                eval_rows.push_back(order[k]);
            else
                fit_rows.push_back(order[k]);
        }
        for (std::size_t r : fit_rows) (t[r] > 0.5 ? fit1 : fit0).push_back(r);
        if (fit0.empty() || fit1.empty())
            throw std::runtime_error("aipw_estimate: a training fold lost one treatment arm");

        const auto prop = detail::logistic_fit(covariates, t, fit_rows, opt.logistic_l2,
                                               opt.logistic_max_iter);
        const auto m0 = detail::ridge_fit(covariates, y, fit0, opt.ridge_lambda);
        const auto m1 = detail::ridge_fit(covariates, y, fit1, opt.ridge_lambda);
        for (std::size_t r : eval_rows) {
            const double* xi = covariates.row(r);
            e_hat[r] = prop.predict(xi, covariates.cols);
            mu0_hat[r] = m0.predict(xi, covariates.cols);
            mu1_hat[r] = m1.predict(xi, covariates.cols);
        }
    }
    return aipw_formula(t, y, e_hat, mu0_hat, mu1_hat, opt.propensity_clip);
}

}  // namespace batle
