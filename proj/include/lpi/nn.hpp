#pragma once

#include "lpi/common.hpp"

#include <cmath>
#include <numbers>
#include <random>

// Small dense-layer helpers shared by the encoders and the prediction head.
namespace lpi::nn {

// Exact (erf) GELU.
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

inline Matrix gelu(const Matrix& x) { return x.unaryExpr([](double v) { return gelu(v); }); }
inline Matrix gelu_grad(const Matrix& x) { return x.unaryExpr([](double v) { return gelu_grad(v); }); }

// Row-wise numerically stable softmax.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        RowVector e = (logits.row(r).array() - m).exp().matrix();
        out.row(r) = e / e.sum();
    }
    return out;
}

inline Vector softmax(const Vector& logits) {
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

// Uniform(-bound, bound) entries from a seeded engine.
inline Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    // Fill in row-major order so the layout of the draw is independent of
    // Eigen's storage order.
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    }
    return m;
}

// Glorot-uniform weights for a (fan_out x fan_in) map.
inline Matrix glorot(Eigen::Index fan_out, Eigen::Index fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform(fan_out, fan_in, bound, rng);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace lpi::nn
