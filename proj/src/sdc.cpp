#include "lpi/sdc.hpp"

#include "lpi/nn.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace lpi::sdc {

void PatchConfig::validate() const {
    if (window_len <= 0 || horizon <= 0) throw ConfigError("patch: window_len and horizon must be positive");
    if (patch_size <= 0 || stride <= 0 || d_tmp <= 0) {
        throw ConfigError("patch: patch_size, stride and d_tmp must be positive");
    }
    if (stride > patch_size) throw ConfigError("patch: stride larger than patch_size leaves gaps");
}

Patches window_patch(const Vector& series, const PatchConfig& cfg) {
    cfg.validate();
    const int t = static_cast<int>(series.size());
    if (t == 0) throw ArgumentError("window_patch: empty series");
    const int n = (t + cfg.stride - 1) / cfg.stride;
    const int padded = (n - 1) * cfg.stride + cfg.patch_size;
    const int pad = padded - t;

    Patches out;
    out.pad = pad;
    out.values.resize(n, cfg.patch_size);
    out.starts.resize(n);
    for (int p = 0; p < n; ++p) {
        out.starts[p] = p * cfg.stride - pad;
        for (int j = 0; j < cfg.patch_size; ++j) {
            const int src = out.starts[p] + j;
            out.values(p, j) = series(std::max(src, 0));
        }
    }
    return out;
}

void TemporalConfig::validate() const {
    if (patch_size <= 0 || d_model <= 0 || d_tmp <= 0 || blocks < 0) {
        throw ConfigError("temporal encoder: sizes must be positive");
    }
}

Matrix positional_encoding(int count, int width) {
    Matrix pe(count, width);
    for (int pos = 0; pos < count; ++pos) {
        for (int i = 0; i < width; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / width);
            pe(pos, i) = i % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
        }
    }
    return pe;
}

Matrix layer_norm_rows(const Matrix& x, double eps) {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        out.row(r) = (x.row(r).array() - mean) / std::sqrt(var + eps);
    }
    return out;
}

TemporalEncoder::TemporalEncoder(TemporalConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const int d = cfg_.d_model;
    embed_w = nn::glorot(d, cfg_.patch_size, rng);
    embed_b = Vector::Zero(d);
    for (int b = 0; b < cfg_.blocks; ++b) {
        EncoderBlock blk;
        blk.wq = nn::glorot(d, d, rng);
        blk.wk = nn::glorot(d, d, rng);
        blk.wv = nn::glorot(d, d, rng);
        blk.wo = nn::glorot(d, d, rng);
        blk.w1 = nn::glorot(2 * d, d, rng);
        blk.b1 = Vector::Zero(2 * d);
        blk.w2 = nn::glorot(d, 2 * d, rng);
        blk.b2 = Vector::Zero(d);
        blocks.push_back(std::move(blk));
    }
    out_w = nn::glorot(cfg_.d_tmp, d, rng);
    out_b = Vector::Zero(cfg_.d_tmp);
}

Matrix TemporalEncoder::features(const Matrix& patches) const {
    if (patches.cols() != cfg_.patch_size) {
        throw ConfigError("temporal encoder: patch width " + std::to_string(patches.cols()) + ", expected " +
                          std::to_string(cfg_.patch_size));
    }
    const auto n = static_cast<int>(patches.rows());
    Matrix x = (patches * embed_w.transpose()).rowwise() + embed_b.transpose();
    if (cfg_.positional) x += positional_encoding(n, cfg_.d_model);

    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
    for (const auto& blk : blocks) {
        const Matrix h = layer_norm_rows(x);
        const Matrix q = h * blk.wq.transpose();
        const Matrix k = h * blk.wk.transpose();
        const Matrix v = h * blk.wv.transpose();
        const Matrix a = nn::softmax_rows(q * k.transpose() * scale);
        x += (a * v) * blk.wo.transpose();

        const Matrix h2 = layer_norm_rows(x);
        const Matrix mid = nn::gelu(Matrix((h2 * blk.w1.transpose()).rowwise() + blk.b1.transpose()));
        x += (mid * blk.w2.transpose()).rowwise() + blk.b2.transpose();
    }
    return layer_norm_rows(x);
}

Matrix TemporalEncoder::encode(const Matrix& patches) const {
    return (features(patches) * out_w.transpose()).rowwise() + out_b.transpose();
}

Attention cross_attention(const Matrix& queries, const Matrix& keys, const Matrix& values) {
    if (keys.rows() == 0) throw ArgumentError("cross_attention: no keys");
    if (queries.cols() != keys.cols()) throw ConfigError("cross_attention: query/key width mismatch");
    if (keys.rows() != values.rows()) throw ConfigError("cross_attention: key/value count mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
    Attention out;
    out.weights = nn::softmax_rows(queries * keys.transpose() * scale);
    out.output = out.weights * values;
    return out;
}

SpatialEncoder::SpatialEncoder(int term_dim, int d_tmp, std::uint64_t seed) {
    if (term_dim <= 0 || d_tmp <= 0) throw ConfigError("spatial encoder: sizes must be positive");
    std::mt19937_64 rng(seed);
    key_w = nn::glorot(d_tmp, term_dim, rng);
    value_w = nn::glorot(d_tmp, term_dim, rng);
}

Matrix SpatialEncoder::encode(const Matrix& e_tmp, const Matrix& terms, Cache* cache) const {
    if (terms.rows() == 0) throw ArgumentError("spatial_encode: no context terms");
    if (terms.cols() != key_w.cols()) {
        throw ConfigError("spatial_encode: term width " + std::to_string(terms.cols()) + ", expected " +
                          std::to_string(key_w.cols()));
    }
    if (e_tmp.cols() != key_w.rows()) throw ConfigError("spatial_encode: temporal token width mismatch");
    Matrix keys = terms * key_w.transpose();
    Matrix values = terms * value_w.transpose();
    Attention att = cross_attention(e_tmp, keys, values);
    if (cache) {
        cache->queries = e_tmp;
        cache->terms = terms;
        cache->keys = std::move(keys);
        cache->values = std::move(values);
        cache->weights = att.weights;
    }
    return att.output;
}

SpatialEncoder::Grads SpatialEncoder::backward(const Matrix& d_out, const Cache& c) const {
    if (d_out.rows() != c.weights.rows() || d_out.cols() != c.values.cols()) {
        throw StateError("spatial backward: gradient does not match cached forward pass");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.queries.cols()));
    const Matrix d_values = c.weights.transpose() * d_out;
    const Matrix d_weights = d_out * c.values.transpose();
    const Vector row_dot = (d_weights.array() * c.weights.array()).rowwise().sum();
    const Matrix d_logits = (c.weights.array() * (d_weights.colwise() - row_dot).array()).matrix();
    const Matrix d_keys = d_logits.transpose() * c.queries * scale;

    Grads g;
    g.queries = d_logits * c.keys * scale;
    g.key_w = d_keys.transpose() * c.terms;
    g.value_w = d_values.transpose() * c.terms;
    g.terms = d_keys * key_w + d_values * value_w;
    return g;
}

Matrix fuse_channels(const Matrix& e_tmp, const Matrix& e_spt) {
    if (e_tmp.rows() != e_spt.rows()) {
        throw ArgumentError("fuse_channels: token counts differ (" + std::to_string(e_tmp.rows()) + " vs " +
                            std::to_string(e_spt.rows()) + ")");
    }
    Matrix out(e_tmp.rows(), e_tmp.cols() + e_spt.cols());
    out << e_tmp, e_spt;
    return out;
}

const std::vector<std::string>& default_terms() {
    static const std::vector<std::string> terms{"pulse", "picket", "ramp", "peak", "compression", "trailing"};
    return terms;
}

std::vector<std::string> load_terms(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open term list " + path.string());
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        terms.push_back(line.substr(b, e - b + 1));
    }
    if (terms.empty()) throw ConfigError("term list " + path.string() + " is empty");
    return terms;
}

Channels::Channels(PatchConfig patch_cfg, const Matrix& terms, std::uint64_t seed, bool positional)
    : patch(patch_cfg),
      temporal(TemporalConfig{patch_cfg.patch_size, 32, patch_cfg.d_tmp, 2, positional, mix64(seed ^ 0x51)}),
      spatial(static_cast<int>(terms.cols()), patch_cfg.d_tmp, mix64(seed ^ 0x52)),
      term_vectors(terms) {
    patch.validate();
}

Matrix Channels::augment(const Vector& laser) const {
    const Matrix e_tmp = temporal.encode(window_patch(laser, patch).values);
    return fuse_channels(e_tmp, spatial.encode(e_tmp, term_vectors));
}

}  // namespace lpi::sdc
