#include "lpi/head.hpp"

#include "lpi/nn.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace lpi::head {

void HeadConfig::validate() const {
    if (in_width <= 0 || kernel <= 0 || hidden_dim <= 0 || head_dim <= 0 || pred_len <= 0) {
        throw ConfigError("head: all sizes must be positive");
    }
}

HeadParams HeadParams::init(const HeadConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    HeadParams p;
    p.conv_w = nn::glorot(cfg.hidden_dim, cfg.conv_fan_in(), rng);
    p.conv_b = Vector::Zero(cfg.hidden_dim);
    p.bn_gamma = Vector::Ones(cfg.hidden_dim);
    p.bn_beta = Vector::Zero(cfg.hidden_dim);
    p.bn_mean = Vector::Zero(cfg.hidden_dim);
    p.bn_var = Vector::Ones(cfg.hidden_dim);
    p.w1 = nn::glorot(cfg.head_dim, cfg.hidden_dim, rng);
    p.b1 = Vector::Zero(cfg.head_dim);
    p.w2 = nn::glorot(cfg.pred_len, cfg.head_dim, rng);
    p.b2 = Vector::Zero(cfg.pred_len);
    return p;
}

HeadParams HeadParams::zeros_like(const HeadParams& p) {
    HeadParams g;
    g.conv_w = Matrix::Zero(p.conv_w.rows(), p.conv_w.cols());
    g.conv_b = Vector::Zero(p.conv_b.size());
    g.bn_gamma = Vector::Zero(p.bn_gamma.size());
    g.bn_beta = Vector::Zero(p.bn_beta.size());
    g.bn_mean = Vector::Zero(p.bn_mean.size());
    g.bn_var = Vector::Zero(p.bn_var.size());
    g.w1 = Matrix::Zero(p.w1.rows(), p.w1.cols());
    g.b1 = Vector::Zero(p.b1.size());
    g.w2 = Matrix::Zero(p.w2.rows(), p.w2.cols());
    g.b2 = Vector::Zero(p.b2.size());
    return g;
}

namespace {

template <typename M>
NamedTensor named(const char* name, M& m) {
    return {name, m.data(), m.rows(), m.cols()};
}

}  // namespace

std::vector<NamedTensor> HeadParams::post() {
    return {named("post.w1", w1), named("post.b1", b1), named("post.w2", w2), named("post.b2", b2)};
}

std::vector<NamedTensor> HeadParams::trainable() {
    std::vector<NamedTensor> out{named("conv.w", conv_w), named("conv.b", conv_b), named("bn.gamma", bn_gamma),
                                 named("bn.beta", bn_beta)};
    for (auto& t : post()) out.push_back(t);
    return out;
}

std::vector<NamedTensor> HeadParams::all() {
    auto out = trainable();
    out.push_back(named("bn.running_mean", bn_mean));
    out.push_back(named("bn.running_var", bn_var));
    return out;
}

bool HeadParams::all_finite() const {
    return conv_w.allFinite() && conv_b.allFinite() && bn_gamma.allFinite() && bn_beta.allFinite() &&
           bn_mean.allFinite() && bn_var.allFinite() && w1.allFinite() && b1.allFinite() && w2.allFinite() &&
           b2.allFinite();
}

Matrix conv_windows(std::span<const double> laser, const Matrix& tokens, int kernel) {
    if (laser.empty()) throw ArgumentError("conv_windows: empty series");
    if (kernel <= 0) throw ConfigError("conv_windows: kernel must be positive");
    const int t = static_cast<int>(laser.size());
    const int n = (t + kernel - 1) / kernel;
    const int pad = n * kernel - t;
    const bool with_tokens = tokens.size() > 0;
    if (with_tokens && tokens.rows() != n) {
        throw ConfigError("conv_windows: " + std::to_string(tokens.rows()) + " tokens for " + std::to_string(n) +
                          " windows");
    }
    const auto width = 1 + (with_tokens ? tokens.cols() : 0);
    Matrix x(n, kernel * width);
    for (int p = 0; p < n; ++p) {
        for (int j = 0; j < kernel; ++j) {
            const int src = std::max(p * kernel + j - pad, 0);
            x(p, j * width) = laser[src];
            if (with_tokens) x.block(p, j * width + 1, 1, width - 1) = tokens.row(p);
        }
    }
    return x;
}

Matrix project_input(const HeadParams& p, const Matrix& x, BnMode mode, ProjectionCache* cache) {
    if (x.cols() != p.conv_w.cols()) {
        throw ConfigError("project_input: window width " + std::to_string(x.cols()) + ", conv expects " +
                          std::to_string(p.conv_w.cols()));
    }
    if (x.rows() == 0) throw ArgumentError("project_input: no windows");
    const double eps = kBnEps;
    Matrix z = (x * p.conv_w.transpose()).rowwise() + p.conv_b.transpose();

    Vector mean, inv_std;
    if (mode == BnMode::train) {
        mean = z.colwise().mean().transpose();
        const Vector var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        inv_std = (var.array() + eps).rsqrt().matrix();
    } else {
        mean = p.bn_mean;
        inv_std = (p.bn_var.array() + eps).rsqrt().matrix();
    }
    Matrix x_hat = ((z.rowwise() - mean.transpose()).array().rowwise() * inv_std.transpose().array()).matrix();
    Matrix y = ((x_hat.array().rowwise() * p.bn_gamma.transpose().array()).rowwise() + p.bn_beta.transpose().array())
                   .matrix();
    Matrix out = nn::gelu(y);
    if (cache) {
        cache->x = x;
        cache->z = std::move(z);
        cache->x_hat = std::move(x_hat);
        cache->y = std::move(y);
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
        cache->mode = mode;
    }
    return out;
}

Matrix project_backward(const HeadParams& p, const Matrix& d_out, const ProjectionCache& c, HeadParams& g) {
    if (d_out.rows() != c.y.rows() || d_out.cols() != c.y.cols()) {
        throw StateError("project_backward: gradient does not match cached forward pass");
    }
    const Matrix d_y = (d_out.array() * nn::gelu_grad(c.y).array()).matrix();
    g.bn_gamma += (d_y.array() * c.x_hat.array()).colwise().sum().transpose().matrix();
    g.bn_beta += d_y.colwise().sum().transpose();
    const Matrix d_xhat = (d_y.array().rowwise() * p.bn_gamma.transpose().array()).matrix();

    Matrix d_z;
    if (c.mode == BnMode::train) {
        const double n = static_cast<double>(d_xhat.rows());
        const RowVector sum_d = d_xhat.colwise().sum();
        const RowVector sum_dx = (d_xhat.array() * c.x_hat.array()).colwise().sum().matrix();
        d_z = ((n * d_xhat.array()).rowwise() - sum_d.array() - (c.x_hat.array().rowwise() * sum_dx.array())).matrix();
        d_z = (d_z.array().rowwise() * (c.inv_std.transpose().array() / n)).matrix();
    } else {
        d_z = (d_xhat.array().rowwise() * c.inv_std.transpose().array()).matrix();
    }
    g.conv_w += d_z.transpose() * c.x;
    g.conv_b += d_z.colwise().sum().transpose();
    return d_z * p.conv_w;
}

void calibrate_batch_norm(HeadParams& p, const Matrix& x) {
    if (x.rows() == 0) throw ArgumentError("calibrate_batch_norm: no windows");
    const Matrix z = (x * p.conv_w.transpose()).rowwise() + p.conv_b.transpose();
    p.bn_mean = z.colwise().mean().transpose();
    p.bn_var = (z.rowwise() - p.bn_mean.transpose()).array().square().colwise().mean().transpose();
}

Vector predict_post(const HeadParams& p, const Matrix& states, PostCache* cache) {
    if (states.rows() == 0) throw ArgumentError("predict_post: no states");
    if (states.cols() != p.w1.cols()) {
        throw ConfigError("predict_post: state width " + std::to_string(states.cols()) + ", head expects " +
                          std::to_string(p.w1.cols()));
    }
    Matrix pre = (states * p.w1.transpose()).rowwise() + p.b1.transpose();
    Vector pooled = nn::gelu(pre).colwise().mean().transpose();
    Vector out = p.w2 * pooled + p.b2;
    if (cache) {
        cache->states = states;
        cache->pre = std::move(pre);
        cache->pooled = std::move(pooled);
    }
    return out;
}

Matrix post_backward(const HeadParams& p, const Vector& d_pred, const PostCache& c, HeadParams& g) {
    if (c.pre.size() == 0) throw StateError("post_backward: no cached forward pass");
    if (d_pred.size() != p.w2.rows()) throw ConfigError("post_backward: gradient length mismatch");
    const double k = static_cast<double>(c.pre.rows());
    g.w2 += d_pred * c.pooled.transpose();
    g.b2 += d_pred;
    const Vector d_pooled = p.w2.transpose() * d_pred;
    const Matrix d_pre = (nn::gelu_grad(c.pre).array().rowwise() * (d_pooled.transpose().array() / k)).matrix();
    g.w1 += d_pre.transpose() * c.states;
    g.b1 += d_pre.colwise().sum().transpose();
    return d_pre * p.w1;
}

std::vector<Matrix> output_jacobian(const HeadParams& p, const Matrix& states) {
    PostCache c;
    predict_post(p, states, &c);
    const double k = static_cast<double>(states.rows());
    const Matrix slope = nn::gelu_grad(c.pre) / k;  // k x head_dim
    std::vector<Matrix> out(static_cast<std::size_t>(p.w2.rows()));
    for (Eigen::Index i = 0; i < p.w2.rows(); ++i) {
        const Matrix d_pre = (slope.array().rowwise() * p.w2.row(i).array()).matrix();
        out[static_cast<std::size_t>(i)] = d_pre * p.w1;
    }
    return out;
}

Vector sum_abs_grad(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size()) throw ArgumentError("sum_abs_grad: length mismatch");
    return (pred - target).unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
}

void TrainConfig::validate() const {
    if (epochs <= 0) throw ConfigError("train: epochs must be positive");
    if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
    if (!(lr >= 0.0)) throw ConfigError("train: lr must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: betas must be in [0,1)");
    if (!(eps > 0.0)) throw ConfigError("train: eps must be positive");
}

void Adam::step(std::vector<NamedTensor> params, const std::vector<NamedTensor>& grads) {
    if (params.size() != grads.size()) throw ConfigError("adam: parameter and gradient lists differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != grads[i].name || params[i].rows != grads[i].rows || params[i].cols != grads[i].cols) {
            throw ConfigError("adam: gradient for " + params[i].name + " does not match");
        }
        const auto n = params[i].rows * params[i].cols;
        if (!Eigen::Map<const Vector>(grads[i].data, n).allFinite()) {
            throw NumericError("adam: non-finite gradient for " + params[i].name);
        }
    }
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.push_back(Vector::Zero(p.rows * p.cols));
            v_.push_back(Vector::Zero(p.rows * p.cols));
        }
    }
    if (m_.size() != params.size()) throw StateError("adam: parameter set changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto n = params[i].rows * params[i].cols;
        Eigen::Map<Vector> w(params[i].data, n);
        Eigen::Map<const Vector> g(grads[i].data, n);
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
        w.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }
}

double post_loss(const HeadParams& p, const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : samples) total += (predict_post(p, s.states) - s.target).cwiseAbs().sum();
    return total / static_cast<double>(samples.size());
}

TrainTrace train_post_head(HeadParams& p, const std::vector<Sample>& train, const std::vector<Sample>& val,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw ArgumentError("train: empty training set");
    Adam adam(cfg);
    TrainTrace trace;
    HeadParams best = p;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(train.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed ^ mix64(static_cast<std::uint64_t>(epoch) + 1));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(end - start);
            HeadParams g = HeadParams::zeros_like(p);
            double loss = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = train[order[b]];
                PostCache cache;
                const Vector pred = predict_post(p, s.states, &cache);
                loss += (pred - s.target).cwiseAbs().sum() * scale;
                post_backward(p, sum_abs_grad(pred, s.target) * scale, cache, g);
            }
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(batches + 1));
            }
            adam.step(p.post(), g.post());
            epoch_loss += loss;
            ++batches;
        }
        trace.train_loss.push_back(epoch_loss / batches);

        const double v = val.empty() ? trace.train_loss.back() : post_loss(p, val);
        if (!std::isfinite(v)) throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch + 1));
        trace.val_loss.push_back(v);
        if (val.empty() || v < best_val) {
            best_val = v;
            best = p;
            trace.best_epoch = epoch + 1;
        }
    }
    p = best;
    return trace;
}

}  // namespace lpi::head
