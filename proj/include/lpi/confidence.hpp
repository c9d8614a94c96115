#pragma once

#include "lpi/common.hpp"
#include "lpi/head.hpp"
#include "lpi/service.hpp"

#include <span>
#include <vector>

namespace lpi::confidence {

inline constexpr int kDefaultTokens = 50;

// -sum p ln p with 0 ln 0 = 0.
double token_entropy(std::span<const double> probs);

// grads[i] is the k x d gradient of output i; returns the k x L column-softmax
// of per-token L2 norms.
Matrix saliency(const std::vector<Matrix>& grads);
Matrix saliency_from_norms(const Matrix& norms);

// C_i = -sum_j H_j S_ji
Vector confidence(const Vector& entropies, const Matrix& saliency);

struct Scan {
    Vector scores;
    Matrix saliency;
    Vector entropies;
};

// Uses the last min(k, available) states and their entropies.
Scan scan(const ReservoirOutput& output, const head::HeadParams& params, int k = kDefaultTokens);

// Rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace lpi::confidence
