#pragma once

#include "lpi/common.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lpi::head {

inline constexpr double kBnEps = 1e-8;

struct HeadConfig {
    int in_width = 33;   // channels per step: laser plus fused tokens
    int kernel = 32;     // conv kernel and stride
    int hidden_dim = 64; // reservoir width
    int head_dim = 128;
    int pred_len = 400;

    int conv_fan_in() const noexcept { return kernel * in_width; }
    void validate() const;
};

struct NamedTensor {
    std::string name;
    double* data;
    Eigen::Index rows, cols;
};

struct HeadParams {
    Matrix conv_w;  // hidden x (kernel * in_width), step-major within a window
    Vector conv_b;
    Vector bn_gamma, bn_beta;
    Vector bn_mean, bn_var;  // running statistics, not trained
    Matrix w1;               // head_dim x hidden
    Vector b1;
    Matrix w2;               // pred_len x head_dim
    Vector b2;

    static HeadParams init(const HeadConfig& cfg, std::uint64_t seed);
    static HeadParams zeros_like(const HeadParams& p);

    std::vector<NamedTensor> trainable();
    std::vector<NamedTensor> post();
    std::vector<NamedTensor> all();
    bool all_finite() const;
};

// Conv windows for one series: row p holds steps [p*kernel, (p+1)*kernel)
// of the edge-padded input, each step contributing in_width values. Step t
// carries [laser(t), tokens.row(patch of t)]; tokens may be empty.
Matrix conv_windows(std::span<const double> laser, const Matrix& tokens, int kernel);

enum class BnMode { train, eval };

struct ProjectionCache {
    Matrix x, z, x_hat, y;
    Vector mean, inv_std;
    BnMode mode = BnMode::eval;
};

// Conv (one matmul over windows), batch norm, GELU. x stacks the windows of a batch.
Matrix project_input(const HeadParams& p, const Matrix& x, BnMode mode, ProjectionCache* cache = nullptr);
// Accumulates into g; returns d loss / d x.
Matrix project_backward(const HeadParams& p, const Matrix& d_out, const ProjectionCache& cache, HeadParams& g);
// Sets running statistics to the population statistics of the conv outputs of x.
void calibrate_batch_norm(HeadParams& p, const Matrix& x);

struct PostCache {
    Matrix states;
    Matrix pre;     // k x head_dim
    Vector pooled;  // mean of GELU(pre) rows
};

// P = W2 mean_j GELU(W1 e_j + b1) + b2
Vector predict_post(const HeadParams& p, const Matrix& states, PostCache* cache = nullptr);
// Accumulates into g; returns dP-weighted gradient w.r.t. each state row.
Matrix post_backward(const HeadParams& p, const Vector& d_pred, const PostCache& cache, HeadParams& g);
// dP_i / d states for every output i; element i is k x hidden.
std::vector<Matrix> output_jacobian(const HeadParams& p, const Matrix& states);

// Subgradient of sum |p - y| with sign(0) = 0.
Vector sum_abs_grad(const Vector& pred, const Vector& target);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 5;
    double lr = 0.0004;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

class Adam {
public:
    Adam() = default;
    explicit Adam(const TrainConfig& cfg) : cfg_(cfg) {}

    // One bias-corrected update of every tensor in params using the same-named grads.
    void step(std::vector<NamedTensor> params, const std::vector<NamedTensor>& grads);
    int steps() const noexcept { return t_; }

private:
    TrainConfig cfg_;
    int t_ = 0;
    std::vector<Vector> m_, v_;
};

struct Sample {
    Matrix states;
    Vector target;
};

struct TrainTrace {
    std::vector<double> train_loss;  // mean batch loss over each epoch
    std::vector<double> val_loss;    // mean per-shot loss after each epoch
    int best_epoch = 0;
};

// Mean per-sample sum-abs loss of the post-head.
double post_loss(const HeadParams& p, const std::vector<Sample>& samples);

// Trains W1, b1, W2, b2 on cached reservoir states; leaves the best-on-val
// parameters in p (last epoch when val is empty).
TrainTrace train_post_head(HeadParams& p, const std::vector<Sample>& train, const std::vector<Sample>& val,
                           const TrainConfig& cfg);

}  // namespace lpi::head
