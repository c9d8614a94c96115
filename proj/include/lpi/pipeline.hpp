#pragma once

#include "lpi/confidence.hpp"
#include "lpi/data.hpp"
#include "lpi/head.hpp"
#include "lpi/prompt.hpp"
#include "lpi/reservoir.hpp"
#include "lpi/sdc.hpp"
#include "lpi/service.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lpi {

enum class ReservoirKind { esn, ngrc, llm };

ReservoirKind parse_reservoir_kind(std::string_view text);
std::string to_string(ReservoirKind kind);

struct ModelConfig {
    ReservoirKind kind = ReservoirKind::llm;
    sdc::PatchConfig patch;
    bool use_sdc = true;
    bool positional = true;
    std::vector<std::string> terms = sdc::default_terms();
    int head_dim = 128;
    int k = 50;
    head::TrainConfig train;
    reservoir::EsnConfig esn;
    reservoir::NgrcConfig ngrc;
    PromptDescriptors descriptors = default_descriptors();
    std::uint64_t seed = 0;

    void validate() const;
};

using TensorMap = std::map<std::string, Matrix>;

struct FitReport {
    head::TrainTrace trace;
    double train_loss = 0.0;  // mean per-shot sum-abs loss on the training set
};

class Forecaster {
public:
    virtual ~Forecaster() = default;

    virtual FitReport fit(const std::vector<Shot>& train, const std::vector<Shot>& val) = 0;
    virtual std::vector<double> predict(const Shot& shot) const = 0;
    virtual std::optional<confidence::Scan> scan(const Shot&) const { return std::nullopt; }

    virtual TensorMap tensors() const = 0;
    virtual void load(const TensorMap& tensors) = 0;
};

// The service is required for the llm backend and must outlive the result.
std::unique_ptr<Forecaster> make_forecaster(const ModelConfig& cfg, ReservoirService* service);

class LlmForecaster final : public Forecaster {
public:
    LlmForecaster(const ModelConfig& cfg, ReservoirService& service);

    FitReport fit(const std::vector<Shot>& train, const std::vector<Shot>& val) override;
    std::vector<double> predict(const Shot& shot) const override;
    std::optional<confidence::Scan> scan(const Shot& shot) const override;
    TensorMap tensors() const override;
    void load(const TensorMap& tensors) override;

    Matrix windows(const Shot& shot) const;
    FusionPrompt prompt(const Shot& shot) const;
    ReservoirOutput reservoir_output(const Shot& shot) const;

    const head::HeadParams& params() const noexcept { return params_; }
    const head::HeadConfig& head_config() const noexcept { return head_cfg_; }

private:
    ModelConfig cfg_;
    ReservoirService* service_;
    head::HeadConfig head_cfg_;
    head::HeadParams params_;
    std::optional<sdc::Channels> channels_;
};

enum class Baseline { truth, train_mean, copy_laser };

Baseline parse_baseline(std::string_view text);

// Per-step mean of the training targets.
std::vector<double> train_mean_profile(const std::vector<Shot>& train);

// Least-squares hxr ~ a * laser + b over all training steps.
struct CopyLaser {
    double slope = 0.0, intercept = 0.0;

    static CopyLaser fit(const std::vector<Shot>& train);
    std::vector<double> predict(std::span<const double> laser) const;
};

std::vector<std::vector<double>> baseline_predictions(Baseline which, const std::vector<Shot>& train,
                                                      const std::vector<Shot>& test);

}  // namespace lpi
