#pragma once

#include "lpi/common.hpp"
#include "lpi/data.hpp"
#include "lpi/prompt.hpp"
#include "lpi/service.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lpi::reservoir {

struct EsnConfig {
    int n_units = 200;
    double spectral_radius = 0.9;
    double input_scale = 1.0;
    double leak = 1.0;
    double density = 0.1;
    std::uint64_t seed = 42;
    double ridge = 1e-6;
    int washout = 20;

    void validate() const;
};

struct NgrcConfig {
    int taps = 8;
    int degree = 2;
    double ridge = 1e-6;

    void validate() const;
};

// s' = (1 - leak) s + leak tanh(W s + W_in u + b)
Vector esn_step(const Vector& s, const Vector& u, const Matrix& w, const Matrix& w_in, const Vector& b, double leak);

double spectral_radius(const Matrix& w);

class Esn {
public:
    Esn(const EsnConfig& cfg, int n_inputs);

    const EsnConfig& config() const noexcept { return cfg_; }
    int inputs() const noexcept { return static_cast<int>(w_in.cols()); }

    Vector step(const Vector& s, const Vector& u) const;
    // One state row per input row, starting from s0.
    Matrix run(const Matrix& inputs, const Vector& s0) const;

    Matrix w;
    Matrix w_in;
    Vector b;

private:
    EsnConfig cfg_;
};

int ngrc_feature_len(int taps, int channels, int degree);
// window: one row per tap, newest first. Output is [1, taps (lag-major), x_i x_j for i <= j].
Vector ngrc_features(const Matrix& window, int taps, int degree);

// Minimises |S W - Y|^2 + lambda |W|^2 without forming S^T S.
Matrix ridge_fit(const Matrix& s, const Matrix& y, double lambda);

// Sends the prompt and the projected tokens to the service.
ReservoirOutput llm_reservoir_run(const FusionPrompt& prompt, const Matrix& projected, ReservoirService& service,
                                  int k);

// Classical forecasters over normalized shots: one scalar output per step.
class EsnForecaster {
public:
    explicit EsnForecaster(EsnConfig cfg = {});

    // Teacher-forced fit; input at step t is [laser(t), hxr(t-1)].
    void fit(const std::vector<Shot>& shots);
    // Free-running forecast that feeds back its own previous output.
    std::vector<double> forecast(std::span<const double> laser) const;
    std::vector<double> teacher_forced(const Shot& shot) const;

    bool trained() const noexcept { return readout_.size() > 0; }
    const Esn& esn() const noexcept { return esn_; }
    const Matrix& readout() const noexcept { return readout_; }
    void set_readout(Matrix readout);

private:
    Matrix features(const Matrix& inputs) const;

    EsnConfig cfg_;
    Esn esn_;
    Matrix readout_;
};

class NgrcForecaster {
public:
    explicit NgrcForecaster(NgrcConfig cfg = {});

    void fit(const std::vector<Shot>& shots);
    std::vector<double> forecast(std::span<const double> laser) const;

    bool trained() const noexcept { return readout_.size() > 0; }
    const NgrcConfig& config() const noexcept { return cfg_; }
    const Matrix& readout() const noexcept { return readout_; }
    void set_readout(Matrix readout);

private:
    Matrix features(std::span<const double> laser) const;

    NgrcConfig cfg_;
    Matrix readout_;
};

}  // namespace lpi::reservoir
