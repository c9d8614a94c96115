#include "lpi/pipeline.hpp"

#include "lpi/metrics.hpp"

#include <numeric>

namespace lpi {

ReservoirKind parse_reservoir_kind(std::string_view text) {
    if (text == "esn") return ReservoirKind::esn;
    if (text == "ngrc") return ReservoirKind::ngrc;
    if (text == "llm") return ReservoirKind::llm;
    throw ConfigError("unknown reservoir '" + std::string(text) + "' (expected esn, ngrc or llm)");
}

std::string to_string(ReservoirKind kind) {
    switch (kind) {
        case ReservoirKind::esn: return "esn";
        case ReservoirKind::ngrc: return "ngrc";
        case ReservoirKind::llm: return "llm";
    }
    return "?";
}

void ModelConfig::validate() const {
    patch.validate();
    train.validate();
    esn.validate();
    ngrc.validate();
    if (head_dim <= 0) throw ConfigError("head_dim must be positive");
    if (k <= 0) throw ConfigError("k must be positive");
    if (use_sdc && terms.empty()) throw ConfigError("context term list is empty");
    if (kind == ReservoirKind::llm && patch.stride != patch.patch_size) {
        throw ConfigError("llm backend needs stride == patch_size so tokens align with conv windows");
    }
}

namespace {

Vector as_vector(std::span<const double> v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

double mean_loss(const Forecaster& f, const std::vector<Shot>& shots) {
    double total = 0.0;
    for (const auto& s : shots) total += sum_abs_loss(f.predict(s), s.hxr);
    return shots.empty() ? 0.0 : total / static_cast<double>(shots.size());
}

template <typename Block, typename F>
void visit_block(Block& b, F&& f) {
    f("wq", b.wq);
    f("wk", b.wk);
    f("wv", b.wv);
    f("wo", b.wo);
    f("w1", b.w1);
    f("b1", b.b1);
    f("w2", b.w2);
    f("b2", b.b2);
}

const Matrix& need(const TensorMap& t, const std::string& name) {
    const auto it = t.find(name);
    if (it == t.end()) throw SchemaError("checkpoint is missing tensor '" + name + "'");
    return it->second;
}

template <typename Dst>
void assign(Dst& dst, const Matrix& src, const std::string& name) {
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
        throw SchemaError("tensor '" + name + "' has shape " + std::to_string(src.rows()) + "x" +
                          std::to_string(src.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                          std::to_string(dst.cols()));
    }
    dst = src;
}

class EsnModel final : public Forecaster {
public:
    explicit EsnModel(const ModelConfig& cfg) : f_(cfg.esn) {}

    FitReport fit(const std::vector<Shot>& train, const std::vector<Shot>&) override {
        f_.fit(train);
        FitReport r;
        // Teacher-forced: the readout sees the measured previous output.
        for (const auto& s : train) r.train_loss += sum_abs_loss(f_.teacher_forced(s), s.hxr);
        r.train_loss /= static_cast<double>(train.size());
        return r;
    }
    std::vector<double> predict(const Shot& shot) const override { return f_.forecast(shot.laser); }
    TensorMap tensors() const override {
        if (!f_.trained()) throw StateError("esn forecaster is not trained");
        return {{"esn.readout", f_.readout()}};
    }
    void load(const TensorMap& t) override { f_.set_readout(need(t, "esn.readout")); }

private:
    reservoir::EsnForecaster f_;
};

class NgrcModel final : public Forecaster {
public:
    explicit NgrcModel(const ModelConfig& cfg) : f_(cfg.ngrc) {}

    FitReport fit(const std::vector<Shot>& train, const std::vector<Shot>&) override {
        f_.fit(train);
        return {{}, mean_loss(*this, train)};
    }
    std::vector<double> predict(const Shot& shot) const override { return f_.forecast(shot.laser); }
    TensorMap tensors() const override {
        if (!f_.trained()) throw StateError("ngrc forecaster is not trained");
        return {{"ngrc.readout", f_.readout()}};
    }
    void load(const TensorMap& t) override { f_.set_readout(need(t, "ngrc.readout")); }

private:
    reservoir::NgrcForecaster f_;
};

}  // namespace

std::unique_ptr<Forecaster> make_forecaster(const ModelConfig& cfg, ReservoirService* service) {
    cfg.validate();
    switch (cfg.kind) {
        case ReservoirKind::esn: return std::make_unique<EsnModel>(cfg);
        case ReservoirKind::ngrc: return std::make_unique<NgrcModel>(cfg);
        case ReservoirKind::llm:
            if (!service) throw ConfigError("llm backend needs a reservoir service endpoint");
            return std::make_unique<LlmForecaster>(cfg, *service);
    }
    throw ConfigError("unknown reservoir kind");
}

LlmForecaster::LlmForecaster(const ModelConfig& cfg, ReservoirService& service) : cfg_(cfg), service_(&service) {
    cfg_.validate();
    const ServerInfo info = service_->info();
    if (cfg_.use_sdc) {
        channels_.emplace(cfg_.patch, service_->embed_terms(cfg_.terms), cfg_.seed, cfg_.positional);
    }
    head_cfg_.in_width = 1 + (cfg_.use_sdc ? 2 * cfg_.patch.d_tmp : 0);
    head_cfg_.kernel = cfg_.patch.patch_size;
    head_cfg_.hidden_dim = info.hidden_dim;
    head_cfg_.head_dim = cfg_.head_dim;
    head_cfg_.pred_len = cfg_.patch.horizon;
    params_ = head::HeadParams::init(head_cfg_, mix64(cfg_.seed ^ 0x4eadull));
}

Matrix LlmForecaster::windows(const Shot& shot) const {
    if (static_cast<int>(shot.steps()) != cfg_.patch.window_len) {
        throw ArgumentError("shot " + shot.shot_id + " has " + std::to_string(shot.steps()) + " steps, expected " +
                            std::to_string(cfg_.patch.window_len));
    }
    const Matrix tokens = channels_ ? channels_->augment(as_vector(shot.laser)) : Matrix();
    return head::conv_windows(shot.laser, tokens, head_cfg_.kernel);
}

FusionPrompt LlmForecaster::prompt(const Shot& shot) const {
    const Bindings b = input_bindings(input_stats(shot.laser), static_cast<int>(shot.steps()), cfg_.patch.horizon,
                                      shot.phase_plate);
    return assemble_prompt(cfg_.descriptors, b);
}

ReservoirOutput LlmForecaster::reservoir_output(const Shot& shot) const {
    const Matrix projected = head::project_input(params_, windows(shot), head::BnMode::eval);
    return reservoir::llm_reservoir_run(prompt(shot), projected, *service_, cfg_.k);
}

FitReport LlmForecaster::fit(const std::vector<Shot>& train, const std::vector<Shot>& val) {
    if (train.empty()) throw ArgumentError("train: empty training set");
    std::vector<Matrix> parts;
    Eigen::Index rows = 0;
    for (const auto& s : train) {
        parts.push_back(windows(s));
        rows += parts.back().rows();
    }
    Matrix all(rows, parts.front().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        all.middleRows(at, p.rows()) = p;
        at += p.rows();
    }
    // The service returns no gradients, so everything before it stays at its
    // seeded values; batch norm is set to the training population statistics.
    head::calibrate_batch_norm(params_, all);

    auto samples = [&](const std::vector<Shot>& shots) {
        std::vector<head::Sample> out;
        for (const auto& s : shots) {
            if (static_cast<int>(s.hxr.size()) != head_cfg_.pred_len) {
                throw ArgumentError("shot " + s.shot_id + " target length does not match pred_len");
            }
            out.push_back({reservoir_output(s).states, as_vector(s.hxr)});
        }
        return out;
    };
    const auto train_samples = samples(train);
    const auto val_samples = samples(val);

    Vector mean = Vector::Zero(head_cfg_.pred_len);
    for (const auto& s : train_samples) mean += s.target;
    params_.b2 = mean / static_cast<double>(train_samples.size());

    head::TrainConfig tc = cfg_.train;
    tc.seed = mix64(cfg_.seed ^ tc.seed ^ 0x7a11ull);
    FitReport r;
    r.trace = head::train_post_head(params_, train_samples, val_samples, tc);
    r.train_loss = head::post_loss(params_, train_samples);
    return r;
}

std::vector<double> LlmForecaster::predict(const Shot& shot) const {
    const Vector p = head::predict_post(params_, reservoir_output(shot).states);
    return {p.data(), p.data() + p.size()};
}

std::optional<confidence::Scan> LlmForecaster::scan(const Shot& shot) const {
    return confidence::scan(reservoir_output(shot), params_, cfg_.k);
}

TensorMap LlmForecaster::tensors() const {
    TensorMap out;
    head::HeadParams copy = params_;
    for (const auto& t : copy.all()) out.emplace(t.name, Eigen::Map<const Matrix>(t.data, t.rows, t.cols));
    if (channels_) {
        const auto& te = channels_->temporal;
        out.emplace("sdc.temporal.embed_w", te.embed_w);
        out.emplace("sdc.temporal.embed_b", te.embed_b);
        for (std::size_t i = 0; i < te.blocks.size(); ++i) {
            visit_block(te.blocks[i], [&](const char* name, const auto& m) {
                out.emplace("sdc.temporal.block" + std::to_string(i) + "." + name, m);
            });
        }
        out.emplace("sdc.temporal.out_w", channels_->temporal.out_w);
        out.emplace("sdc.temporal.out_b", channels_->temporal.out_b);
        out.emplace("sdc.spatial.key_w", channels_->spatial.key_w);
        out.emplace("sdc.spatial.value_w", channels_->spatial.value_w);
        out.emplace("sdc.terms", channels_->term_vectors);
    }
    return out;
}

void LlmForecaster::load(const TensorMap& t) {
    head::HeadParams p = params_;
    for (auto& dst : p.all()) {
        const Matrix& src = need(t, dst.name);
        Eigen::Map<Matrix> view(dst.data, dst.rows, dst.cols);
        assign(view, src, dst.name);
    }
    if (channels_) {
        sdc::Channels c = *channels_;
        assign(c.temporal.embed_w, need(t, "sdc.temporal.embed_w"), "sdc.temporal.embed_w");
        assign(c.temporal.embed_b, need(t, "sdc.temporal.embed_b"), "sdc.temporal.embed_b");
        for (std::size_t i = 0; i < c.temporal.blocks.size(); ++i) {
            visit_block(c.temporal.blocks[i], [&](const char* name, auto& m) {
                const std::string key = "sdc.temporal.block" + std::to_string(i) + "." + name;
                assign(m, need(t, key), key);
            });
        }
        assign(c.temporal.out_w, need(t, "sdc.temporal.out_w"), "sdc.temporal.out_w");
        assign(c.temporal.out_b, need(t, "sdc.temporal.out_b"), "sdc.temporal.out_b");
        assign(c.spatial.key_w, need(t, "sdc.spatial.key_w"), "sdc.spatial.key_w");
        assign(c.spatial.value_w, need(t, "sdc.spatial.value_w"), "sdc.spatial.value_w");
        assign(c.term_vectors, need(t, "sdc.terms"), "sdc.terms");
        channels_ = std::move(c);
    }
    params_ = std::move(p);
}

Baseline parse_baseline(std::string_view text) {
    if (text == "truth") return Baseline::truth;
    if (text == "train-mean") return Baseline::train_mean;
    if (text == "copy-laser") return Baseline::copy_laser;
    throw ArgumentError("unknown baseline '" + std::string(text) + "' (expected truth, train-mean or copy-laser)");
}

std::vector<double> train_mean_profile(const std::vector<Shot>& train) {
    if (train.empty()) throw ArgumentError("train-mean baseline: empty training set");
    std::vector<double> mean(train.front().hxr.size(), 0.0);
    for (const auto& s : train) {
        if (s.hxr.size() != mean.size()) throw ArgumentError("train-mean baseline: shots differ in length");
        for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += s.hxr[t];
    }
    for (auto& v : mean) v /= static_cast<double>(train.size());
    return mean;
}

CopyLaser CopyLaser::fit(const std::vector<Shot>& train) {
    if (train.empty()) throw ArgumentError("copy-laser baseline: empty training set");
    double n = 0, sx = 0, sy = 0;
    for (const auto& s : train) {
        for (std::size_t t = 0; t < s.steps(); ++t) {
            n += 1;
            sx += s.laser[t];
            sy += s.hxr[t];
        }
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (const auto& s : train) {
        for (std::size_t t = 0; t < s.steps(); ++t) {
            sxx += (s.laser[t] - mx) * (s.laser[t] - mx);
            sxy += (s.laser[t] - mx) * (s.hxr[t] - my);
        }
    }
    CopyLaser c;
    c.slope = sxx > 0 ? sxy / sxx : 0.0;
    c.intercept = my - c.slope * mx;
    return c;
}

std::vector<double> CopyLaser::predict(std::span<const double> laser) const {
    std::vector<double> out(laser.size());
    for (std::size_t t = 0; t < laser.size(); ++t) out[t] = slope * laser[t] + intercept;
    return out;
}

std::vector<std::vector<double>> baseline_predictions(Baseline which, const std::vector<Shot>& train,
                                                      const std::vector<Shot>& test) {
    std::vector<std::vector<double>> out;
    switch (which) {
        case Baseline::truth:
            for (const auto& s : test) out.push_back(s.hxr);
            break;
        case Baseline::train_mean: {
            const auto mean = train_mean_profile(train);
            for (std::size_t i = 0; i < test.size(); ++i) out.push_back(mean);
            break;
        }
        case Baseline::copy_laser: {
            const auto c = CopyLaser::fit(train);
            for (const auto& s : test) out.push_back(c.predict(s.laser));
            break;
        }
    }
    return out;
}

}  // namespace lpi
