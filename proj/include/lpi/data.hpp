#pragma once

#include "lpi/common.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lpi {

inline constexpr double kDefaultDtNs = 0.025;
inline constexpr int kDefaultSteps = 400;

// One shot: paired laser-intensity and HXR series plus metadata.
struct Shot {
    std::string shot_id;
    double dt_ns = kDefaultDtNs;
    std::vector<double> laser;
    std::vector<double> hxr;
    double target_size_um = 860.0;
    std::string phase_plate = "SG4";

    std::size_t steps() const noexcept { return laser.size(); }
    bool operator==(const Shot&) const = default;
};

// Throws SchemaError when the shot violates its invariants.
void validate(const Shot& shot);

enum class SplitTag { train, val, test, unsplit };

struct ShotSet {
    std::vector<Shot> shots;
    SplitTag split_tag = SplitTag::unsplit;

    std::size_t size() const noexcept { return shots.size(); }
    bool empty() const noexcept { return shots.empty(); }
    bool operator==(const ShotSet&) const = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double at(double u) const noexcept { return lo + u * (hi - lo); }
};

// Parameters of the synthetic LPI generator. Amplitudes are in arbitrary
// laser units, times and widths in steps.
struct GeneratorConfig {
    int n_shots = 100;
    int steps = kDefaultSteps;
    double dt_ns = kDefaultDtNs;
    std::uint64_t seed = 2024;

    Interval picket_amplitude{0.10, 0.30};
    Interval ramp_duration{60.0, 140.0};
    Interval peak_amplitude{0.60, 1.40};
    Interval peak_time{180.0, 300.0};
    Interval trailing_decay{15.0, 60.0};
    Interval target_size_um{800.0, 900.0};

    double picket_time = 20.0;
    double picket_width = 5.0;
    double peak_width = 25.0;
    double ramp_fraction = 0.3;  // ramp plateau relative to the peak amplitude

    double lpi_threshold = 0.5;
    double lpi_exponent = 2.0;
    int response_kernel_width = 12;
    double noise_std = 0.005;

    std::vector<std::string> phase_plates{"SG4", "SG5"};

    // Highest laser amplitude any draw can reach.
    double max_reachable_amplitude() const noexcept;
    // Throws ConfigError on unordered intervals or out-of-range values.
    void validate() const;
};

// The per-shot pulse parameters drawn by the generator.
struct PulseParams {
    double picket_amplitude = 0;
    double ramp_duration = 0;
    double peak_amplitude = 0;
    double peak_time = 0;
    double trailing_decay = 0;
};

PulseParams draw_pulse(const GeneratorConfig& config, int index);
std::vector<double> laser_profile(const GeneratorConfig& config, const PulseParams& pulse);

// Causal triangular kernel (length response_kernel_width, sums to one)
// applied to relu(laser - threshold)^exponent, plus Gaussian noise from
// `noise_seed` clipped at zero.
std::vector<double> lpi_response(std::span<const double> laser, const GeneratorConfig& config,
                                 std::uint64_t noise_seed);

Shot synth_shot(const GeneratorConfig& config, int index);
ShotSet synth_shots(const GeneratorConfig& config);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitSizes {
    std::size_t train = 0, val = 0, test = 0;
    bool operator==(const SplitSizes&) const = default;
};

// Split boundaries sit at round(n * cumulative ratio) (half away from zero);
// the train split absorbs whatever remains before the first boundary.
SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios);

struct SplitResult {
    ShotSet train, val, test;
};

SplitResult split_shots(const ShotSet& set, const SplitRatios& ratios, std::uint64_t seed);

struct InputStats {
    double min = 0, max = 0, median = 0;
};

InputStats input_stats(std::span<const double> series);

// y = (x - offset) / scale
struct AffineParams {
    double scale = 1.0;
    double offset = 0.0;

    double apply(double x) const noexcept { return (x - offset) / scale; }
    double invert(double y) const noexcept { return y * scale + offset; }
    bool operator==(const AffineParams&) const = default;
};

struct Normalization {
    AffineParams laser;
    AffineParams hxr;
    bool operator==(const Normalization&) const = default;
};

// Min-max parameters computed on `set` only. A constant channel gets
// scale 1 and offset equal to its value.
Normalization fit_normalization(const ShotSet& set);
ShotSet apply_normalization(const ShotSet& set, const Normalization& params);
ShotSet invert_normalization(const ShotSet& set, const Normalization& params);

struct NormalizeResult {
    ShotSet set;
    Normalization params;
};
NormalizeResult normalize(const ShotSet& set);

// Newline-delimited JSON records, one shot per line.
ShotSet load_shots(const std::filesystem::path& path);
void save_shots(const ShotSet& set, const std::filesystem::path& path);
ShotSet parse_shots(std::string_view text);
std::string format_shot(const Shot& shot);

}  // namespace lpi
