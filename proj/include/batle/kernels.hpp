#pragma once
// Scalar kernels shared by the generators and the network.

#include <cmath>
#include <stdexcept>

namespace batle {

// Numerically stable logistic sigmoid. Saturates to exactly 0/1 beyond
// |x| ~ 37 in f64; loss code clips probabilities before taking logs.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double clip(double x, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("clip: lo > hi");
    return x < lo ? lo : (x > hi ? hi : x);
}

inline double standardize(double v, double mu, double sd) {
    if (sd <= 0.0) throw std::invalid_argument("standardize: sd must be positive");
    return (v - mu) / sd;
}

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

// d softplus / dx
inline double softplus_deriv(double x) { return sigmoid(x); }

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_deriv(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

}  // namespace batle
