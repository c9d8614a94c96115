#include "lpi/data.hpp"

#include "lpi/wire.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace lpi {

void validate(const Shot& shot) {
    if (shot.laser.size() != shot.hxr.size()) {
        throw SchemaError("shot '" + shot.shot_id + "': laser length " +
                          std::to_string(shot.laser.size()) + " != hxr length " +
                          std::to_string(shot.hxr.size()));
    }
    if (!(shot.dt_ns > 0.0) || !std::isfinite(shot.dt_ns)) {
        throw SchemaError("shot '" + shot.shot_id + "': dt_ns must be positive");
    }
    if (!(shot.target_size_um > 0.0)) {
        throw SchemaError("shot '" + shot.shot_id + "': target_size_um must be positive");
    }
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(shot.laser) || !finite(shot.hxr)) {
        throw SchemaError("shot '" + shot.shot_id + "': non-finite sample");
    }
}

// ---------------------------------------------------------------------------
// Generator

double GeneratorConfig::max_reachable_amplitude() const noexcept {
    return picket_amplitude.hi + peak_amplitude.hi * (1.0 + ramp_fraction);
}

void GeneratorConfig::validate() const {
    auto check_interval = [](const Interval& iv, const char* name, bool positive) {
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
            throw ConfigError(std::string("generator: interval '") + name + "' is not ordered");
        }
        if (iv.lo < 0.0 || (positive && iv.lo <= 0.0)) {
            throw ConfigError(std::string("generator: interval '") + name + "' out of range");
        }
    };
    check_interval(picket_amplitude, "picket_amplitude", false);
    check_interval(ramp_duration, "ramp_duration", true);
    check_interval(peak_amplitude, "peak_amplitude", false);
    check_interval(peak_time, "peak_time", false);
    check_interval(trailing_decay, "trailing_decay", true);
    check_interval(target_size_um, "target_size_um", true);

    if (n_shots <= 0) throw ConfigError("generator: n_shots must be positive");
    if (steps <= 0) throw ConfigError("generator: steps must be positive");
    if (!(dt_ns > 0.0)) throw ConfigError("generator: dt_ns must be positive");
    if (!(picket_width > 0.0) || !(peak_width > 0.0)) {
        throw ConfigError("generator: pulse widths must be positive");
    }
    if (ramp_fraction < 0.0) throw ConfigError("generator: ramp_fraction must be non-negative");
    if (!(lpi_exponent >= 1.0)) throw ConfigError("generator: lpi_exponent must be >= 1");
    if (response_kernel_width < 1) throw ConfigError("generator: response_kernel_width must be >= 1");
    if (!(noise_std >= 0.0)) throw ConfigError("generator: noise_std must be non-negative");
    if (phase_plates.empty()) throw ConfigError("generator: phase_plates must not be empty");
    if (!(lpi_threshold > 0.0)) throw ConfigError("generator: lpi_threshold must be positive");
    // A collapsed [0,0] peak range is the zero-drive calibration mode; the
    // threshold then only has to be positive.
    const bool zero_drive = peak_amplitude.lo == 0.0 && peak_amplitude.hi == 0.0;
    if (!zero_drive && !(lpi_threshold < max_reachable_amplitude())) {
        throw ConfigError("generator: lpi_threshold lies above the reachable laser amplitude");
    }
}

namespace {

std::uint64_t shot_seed(std::uint64_t seed, int index, std::uint64_t stream) {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(index) * 0x9e3779b97f4a7c15ULL + stream));
}

}  // namespace

PulseParams draw_pulse(const GeneratorConfig& config, int index) {
    std::mt19937_64 rng(shot_seed(config.seed, index, 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // Uniforms are drawn before touching the intervals so that changing an
    // interval never shifts the other draws.
    double u[5];
    for (double& x : u) x = unit(rng);
    PulseParams p;
    p.picket_amplitude = config.picket_amplitude.at(u[0]);
    p.ramp_duration = config.ramp_duration.at(u[1]);
    p.peak_amplitude = config.peak_amplitude.at(u[2]);
    p.peak_time = config.peak_time.at(u[3]);
    p.trailing_decay = config.trailing_decay.at(u[4]);
    return p;
}

std::vector<double> laser_profile(const GeneratorConfig& config, const PulseParams& pulse) {
    std::vector<double> laser(static_cast<std::size_t>(config.steps));
    const double ramp_amp = config.ramp_fraction * pulse.peak_amplitude;
    for (int i = 0; i < config.steps; ++i) {
        const double t = i;
        const double zp = (t - config.picket_time) / config.picket_width;
        double v = pulse.picket_amplitude * std::exp(-0.5 * zp * zp);
        if (t <= pulse.peak_time) {
            const double z = (t - pulse.peak_time) / config.peak_width;
            v += pulse.peak_amplitude * std::exp(-0.5 * z * z);
            const double r = (t - (pulse.peak_time - pulse.ramp_duration)) / pulse.ramp_duration;
            v += ramp_amp * std::clamp(r, 0.0, 1.0);
        } else {
            const double decay = std::exp(-(t - pulse.peak_time) / pulse.trailing_decay);
            v += (pulse.peak_amplitude + ramp_amp) * decay;
        }
        laser[static_cast<std::size_t>(i)] = v;
    }
    return laser;
}

std::vector<double> lpi_response(std::span<const double> laser, const GeneratorConfig& config,
                                 std::uint64_t noise_seed) {
    const std::size_t n = laser.size();
    const auto width = static_cast<std::size_t>(config.response_kernel_width);
    std::vector<double> kernel(width);
    const double norm = 0.5 * static_cast<double>(width * (width + 1));
    for (std::size_t j = 0; j < width; ++j) kernel[j] = static_cast<double>(width - j) / norm;

    std::vector<double> drive(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double excess = std::max(0.0, laser[t] - config.lpi_threshold);
        drive[t] = excess > 0.0 ? std::pow(excess, config.lpi_exponent) : 0.0;
    }

    std::vector<double> hxr(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < width && j <= t; ++j) acc += kernel[j] * drive[t - j];
        hxr[t] = acc;
    }

    if (config.noise_std > 0.0) {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> noise(0.0, config.noise_std);
        for (double& v : hxr) v += noise(rng);
    }
    for (double& v : hxr) v = std::max(0.0, v);
    return hxr;
}

Shot synth_shot(const GeneratorConfig& config, int index) {
    config.validate();
    if (index < 0 || index >= config.n_shots) {
        throw ArgumentError("synth_shot: index " + std::to_string(index) + " out of range");
    }
    const PulseParams pulse = draw_pulse(config, index);

    Shot shot;
    char id[32];
    std::snprintf(id, sizeof id, "shot-%04d", index);
    shot.shot_id = id;
    shot.dt_ns = config.dt_ns;
    shot.laser = laser_profile(config, pulse);
    shot.hxr = lpi_response(shot.laser, config, shot_seed(config.seed, index, 2));

    std::mt19937_64 meta(shot_seed(config.seed, index, 3));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    shot.target_size_um = config.target_size_um.at(unit(meta));
    shot.phase_plate = config.phase_plates[meta() % config.phase_plates.size()];
    return shot;
}

ShotSet synth_shots(const GeneratorConfig& config) {
    config.validate();
    ShotSet set;
    set.shots.reserve(static_cast<std::size_t>(config.n_shots));
    for (int i = 0; i < config.n_shots; ++i) set.shots.push_back(synth_shot(config, i));
    return set;
}

// ---------------------------------------------------------------------------
// Splitting

SplitSizes split_sizes(std::size_t n, const SplitRatios& r) {
    if (r.train < 0 || r.val < 0 || r.test < 0 ||
        std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
        throw ArgumentError("split ratios must be non-negative and sum to 1");
    }
    const double dn = static_cast<double>(n);
    auto boundary = [&](double cum) {
        const auto b = static_cast<std::size_t>(std::llround(dn * cum));
        return std::min(b, n);
    };
    const std::size_t b1 = boundary(r.train);
    const std::size_t b2 = std::max(b1, boundary(r.train + r.val));
    return {b1, b2 - b1, n - b2};
}

SplitResult split_shots(const ShotSet& set, const SplitRatios& ratios, std::uint64_t seed) {
    if (set.empty()) throw ArgumentError("split_shots: empty set");
    const SplitSizes sizes = split_sizes(set.size(), ratios);

    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SplitResult out;
    out.train.split_tag = SplitTag::train;
    out.val.split_tag = SplitTag::val;
    out.test.split_tag = SplitTag::test;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Shot& s = set.shots[order[i]];
        if (i < sizes.train) out.train.shots.push_back(s);
        else if (i < sizes.train + sizes.val) out.val.shots.push_back(s);
        else out.test.shots.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Statistics and normalization

InputStats input_stats(std::span<const double> series) {
    if (series.empty()) throw ArgumentError("input_stats: empty series");
    std::vector<double> v(series.begin(), series.end());
    for (double x : v) {
        if (!std::isfinite(x)) throw ArgumentError("input_stats: non-finite value");
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return {v.front(), v.back(), median};
}

namespace {

AffineParams fit_channel(const ShotSet& set, std::vector<double> Shot::*channel) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Shot& s : set.shots) {
        for (double x : s.*channel) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (!(lo <= hi)) throw ArgumentError("normalize: channel has no samples");
    if (hi == lo) return {1.0, lo};
    return {hi - lo, lo};
}

ShotSet transform(const ShotSet& set, const Normalization& p, bool inverse) {
    ShotSet out = set;
    for (Shot& s : out.shots) {
        for (double& x : s.laser) x = inverse ? p.laser.invert(x) : p.laser.apply(x);
        for (double& x : s.hxr) x = inverse ? p.hxr.invert(x) : p.hxr.apply(x);
    }
    return out;
}

}  // namespace

Normalization fit_normalization(const ShotSet& set) {
    if (set.empty()) throw ArgumentError("normalize: empty set");
    return {fit_channel(set, &Shot::laser), fit_channel(set, &Shot::hxr)};
}

ShotSet apply_normalization(const ShotSet& set, const Normalization& params) {
    return transform(set, params, false);
}

ShotSet invert_normalization(const ShotSet& set, const Normalization& params) {
    return transform(set, params, true);
}

NormalizeResult normalize(const ShotSet& set) {
    const Normalization params = fit_normalization(set);
    return {apply_normalization(set, params), params};
}

// ---------------------------------------------------------------------------
// Shot files

std::string format_shot(const Shot& shot) {
    std::string out = "{\"shot_id\":" + wire::json(shot.shot_id).dump() + ",\"dt_ns\":";
    wire::append_number(out, shot.dt_ns);
    out += ",\"target_size_um\":";
    wire::append_number(out, shot.target_size_um);
    out += ",\"phase_plate\":" + wire::json(shot.phase_plate).dump();
    auto array = [&out](const char* name, const std::vector<double>& v) {
        out += ",\"";
        out += name;
        out += "\":[";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out.push_back(',');
            wire::append_number(out, v[i]);
        }
        out.push_back(']');
    };
    array("laser", shot.laser);
    array("hxr", shot.hxr);
    out.push_back('}');
    return out;
}

namespace {

Shot parse_record(const std::string& line, std::size_t line_no) {
    const std::string where = "line " + std::to_string(line_no);
    wire::json j;
    try {
        j = wire::json::parse(line);
    } catch (const wire::json::parse_error& e) {
        throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": record is not an object");

    auto field = [&](const char* name) -> const wire::json& {
        auto it = j.find(name);
        if (it == j.end()) throw ParseError(where + ": missing field '" + name + "'");
        return *it;
    };
    auto string_field = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_string()) throw ParseError(where + ": field '" + name + "' must be a string");
        return v.get<std::string>();
    };
    auto number_field = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_number()) throw ParseError(where + ": field '" + name + "' must be a number");
        return v.get<double>();
    };
    auto array_field = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_array()) throw ParseError(where + ": field '" + name + "' must be an array");
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto& e : v) {
            if (!e.is_number()) {
                throw ParseError(where + ": field '" + name + "' has a non-numeric element");
            }
            out.push_back(e.get<double>());
        }
        return out;
    };

    Shot s;
    s.shot_id = string_field("shot_id");
    s.dt_ns = number_field("dt_ns");
    s.target_size_um = number_field("target_size_um");
    s.phase_plate = string_field("phase_plate");
    s.laser = array_field("laser");
    s.hxr = array_field("hxr");
    validate(s);
    return s;
}

}  // namespace

ShotSet parse_shots(std::string_view text) {
    ShotSet set;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string line(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Shot s = parse_record(line, line_no);
        if (!ids.insert(s.shot_id).second) {
            throw SchemaError("duplicate shot_id '" + s.shot_id + "' at line " +
                              std::to_string(line_no));
        }
        set.shots.push_back(std::move(s));
    }
    return set;
}

ShotSet load_shots(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open shot file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_shots(buf.str());
}

void save_shots(const ShotSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write shot file: " + path.string());
    for (const Shot& s : set.shots) out << format_shot(s) << '\n';
    if (!out) throw ArgumentError("write failed: " + path.string());
}

}  // namespace lpi
