#include "lpi/confidence.hpp"

#include "lpi/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lpi::confidence {

double token_entropy(std::span<const double> probs) {
    if (probs.empty()) throw ArgumentError("token_entropy: empty distribution");
    double total = 0.0, h = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw ArgumentError("token_entropy: negative or non-finite probability");
        total += p;
        if (p > 0.0) h -= p * std::log(p);
    }
    if (std::abs(total - 1.0) > 1e-6) throw ArgumentError("token_entropy: probabilities do not sum to 1");
    return h;
}

Matrix saliency_from_norms(const Matrix& norms) {
    if (norms.rows() == 0) throw ArgumentError("saliency: no tokens");
    Matrix s(norms.rows(), norms.cols());
    for (Eigen::Index i = 0; i < norms.cols(); ++i) s.col(i) = nn::softmax(norms.col(i));
    return s;
}

Matrix saliency(const std::vector<Matrix>& grads) {
    if (grads.empty()) throw ArgumentError("saliency: no outputs");
    const Eigen::Index k = grads.front().rows();
    Matrix norms(k, static_cast<Eigen::Index>(grads.size()));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].rows() != k) throw ArgumentError("saliency: gradient blocks differ in token count");
        norms.col(static_cast<Eigen::Index>(i)) = grads[i].rowwise().norm();
    }
    return saliency_from_norms(norms);
}

Vector confidence(const Vector& entropies, const Matrix& saliency) {
    if (entropies.size() != saliency.rows()) {
        throw ArgumentError("confidence: " + std::to_string(entropies.size()) + " entropies for " +
                            std::to_string(saliency.rows()) + " saliency rows");
    }
    return -(saliency.transpose() * entropies);
}

Scan scan(const ReservoirOutput& output, const head::HeadParams& params, int k) {
    if (output.k() == 0) throw ArgumentError("scan: reservoir output has no states");
    if (k < 1) throw ArgumentError("scan: k must be positive");
    if (output.entropies.size() != output.states.rows()) throw ArgumentError("scan: entropy count mismatch");
    const int used = std::min(k, output.k());
    Scan out;
    const Matrix states = output.states.bottomRows(used);
    out.entropies = output.entropies.tail(used);
    out.saliency = saliency(head::output_jacobian(params, states));
    out.scores = confidence(out.entropies, out.saliency);
    return out;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ArgumentError("spearman: length mismatch");
    if (a.size() < 2) return 0.0;
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace lpi::confidence
