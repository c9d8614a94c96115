#pragma once

#include "lpi/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Signal-digesting channels: patching, temporal and spatial encoders, fusion.
namespace lpi::sdc {

struct PatchConfig {
    int window_len = 400;
    int horizon = 400;
    int patch_size = 32;
    int stride = 32;
    int d_tmp = 16;

    void validate() const;
};

struct Patches {
    Matrix values;           // one patch per row
    std::vector<int> starts;  // first step of each patch; negative inside the padding
    int pad = 0;
};

// Left-pads with the first value so that ceil(T/stride) patches cover the series.
Patches window_patch(const Vector& series, const PatchConfig& cfg);

struct TemporalConfig {
    int patch_size = 32;
    int d_model = 32;
    int d_tmp = 16;
    int blocks = 2;
    bool positional = true;
    std::uint64_t seed = 0x7e3a;

    void validate() const;
};

// Pre-LN self-attention block with a GELU feed-forward; frozen after seeding.
struct EncoderBlock {
    Matrix wq, wk, wv, wo;  // d_model x d_model
    Matrix w1;              // 2*d_model x d_model
    Vector b1;
    Matrix w2;              // d_model x 2*d_model
    Vector b2;
};

class TemporalEncoder {
public:
    explicit TemporalEncoder(TemporalConfig cfg = {});

    const TemporalConfig& config() const noexcept { return cfg_; }

    // Frozen trunk: patch embedding, positional code, blocks, final norm.
    Matrix features(const Matrix& patches) const;
    // features() followed by the trainable last linear; one token per patch.
    Matrix encode(const Matrix& patches) const;

    Matrix embed_w;  // d_model x patch_size
    Vector embed_b;
    std::vector<EncoderBlock> blocks;
    Matrix out_w;    // d_tmp x d_model, trainable
    Vector out_b;

private:
    TemporalConfig cfg_;
};

Matrix positional_encoding(int count, int width);
Matrix layer_norm_rows(const Matrix& x, double eps = 1e-5);

struct Attention {
    Matrix output;   // queries x value width
    Matrix weights;  // queries x keys, rows sum to 1
};

// Single-head scaled dot-product attention; the scale uses the query width.
Attention cross_attention(const Matrix& queries, const Matrix& keys, const Matrix& values);

// Keys and values come from context-term vectors, queries from temporal tokens.
class SpatialEncoder {
public:
    SpatialEncoder() = default;
    SpatialEncoder(int term_dim, int d_tmp, std::uint64_t seed);

    struct Cache {
        Matrix queries, terms, keys, values, weights;
    };
    struct Grads {
        Matrix key_w, value_w, queries, terms;
    };

    Matrix encode(const Matrix& e_tmp, const Matrix& terms, Cache* cache = nullptr) const;
    Grads backward(const Matrix& d_out, const Cache& cache) const;

    Matrix key_w;    // d_tmp x term_dim
    Matrix value_w;  // d_tmp x term_dim
};

// Per-token concatenation, temporal half first.
Matrix fuse_channels(const Matrix& e_tmp, const Matrix& e_spt);

const std::vector<std::string>& default_terms();
// One term per non-blank line; '#' starts a comment line.
std::vector<std::string> load_terms(const std::filesystem::path& path);

// Laser series -> fused tokens, given the term vectors from the service.
struct Channels {
    PatchConfig patch;
    TemporalEncoder temporal;
    SpatialEncoder spatial;
    Matrix term_vectors;

    Channels() = default;
    Channels(PatchConfig patch_cfg, const Matrix& terms, std::uint64_t seed, bool positional = true);

    Matrix augment(const Vector& laser) const;
    int width() const noexcept { return 2 * patch.d_tmp; }
};

}  // namespace lpi::sdc
