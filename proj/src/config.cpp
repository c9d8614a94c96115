#include "lpi/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace lpi {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ConfigError("config: '" + key + "' has invalid value '" + text + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "yes" || text == "1" || text == "on") return true;
    if (text == "false" || text == "no" || text == "0" || text == "off") return false;
    throw ConfigError("config: '" + key + "' expects true or false, got '" + text + "'");
}

struct Field {
    std::string section, key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

template <typename T>
Field num(const char* section, const char* key, T& ref) {
    const std::string name = std::string(section) + "." + key;
    return {section, key,
            [&ref] {
                if constexpr (std::is_floating_point_v<T>) return fmt(ref);
                else return std::to_string(ref);
            },
            [&ref, name](const std::string& s) { ref = parse_number<T>(name, s); }};
}

Field flag(const char* section, const char* key, bool& ref) {
    const std::string name = std::string(section) + "." + key;
    return {section, key, [&ref] { return std::string(ref ? "true" : "false"); },
            [&ref, name](const std::string& s) { ref = parse_bool(name, s); }};
}

Field text(const char* section, const char* key, std::string& ref) {
    return {section, key, [&ref] { return ref; }, [&ref](const std::string& s) { ref = s; }};
}

Field path(const char* section, const char* key, std::filesystem::path& ref) {
    return {section, key, [&ref] { return ref.string(); }, [&ref](const std::string& s) { ref = s; }};
}

std::vector<Field> fields(RunConfig& c) {
    auto& g = c.generator;
    auto& m = c.model;
    return {
        path("data", "shots", c.shots_path),
        num("data", "split_train", c.split.train),
        num("data", "split_val", c.split.val),
        num("data", "split_test", c.split.test),
        num("data", "split_seed", c.split_seed),
        num("data", "train_limit", c.train_limit),

        num("generator", "n_shots", g.n_shots),
        num("generator", "steps", g.steps),
        num("generator", "dt_ns", g.dt_ns),
        num("generator", "seed", g.seed),
        num("generator", "lpi_threshold", g.lpi_threshold),
        num("generator", "lpi_exponent", g.lpi_exponent),
        num("generator", "noise_std", g.noise_std),
        num("generator", "peak_amplitude_min", g.peak_amplitude.lo),
        num("generator", "peak_amplitude_max", g.peak_amplitude.hi),
        num("generator", "peak_time_min", g.peak_time.lo),
        num("generator", "peak_time_max", g.peak_time.hi),

        {"reservoir", "kind", [&m] { return to_string(m.kind); },
         [&m](const std::string& s) { m.kind = parse_reservoir_kind(s); }},
        num("reservoir", "k", m.k),

        num("esn", "n_units", m.esn.n_units),
        num("esn", "spectral_radius", m.esn.spectral_radius),
        num("esn", "input_scale", m.esn.input_scale),
        num("esn", "leak", m.esn.leak),
        num("esn", "density", m.esn.density),
        num("esn", "seed", m.esn.seed),
        num("esn", "ridge", m.esn.ridge),
        num("esn", "washout", m.esn.washout),

        num("ngrc", "taps", m.ngrc.taps),
        num("ngrc", "degree", m.ngrc.degree),
        num("ngrc", "ridge", m.ngrc.ridge),

        flag("sdc", "enabled", m.use_sdc),
        flag("sdc", "positional", m.positional),
        num("sdc", "window_len", m.patch.window_len),
        num("sdc", "horizon", m.patch.horizon),
        num("sdc", "patch_size", m.patch.patch_size),
        num("sdc", "stride", m.patch.stride),
        num("sdc", "d_tmp", m.patch.d_tmp),
        path("sdc", "terms_file", c.terms_file),

        num("head", "head_dim", m.head_dim),

        num("train", "epochs", m.train.epochs),
        num("train", "batch_size", m.train.batch_size),
        num("train", "lr", m.train.lr),
        num("train", "beta1", m.train.beta1),
        num("train", "beta2", m.train.beta2),
        num("train", "eps", m.train.eps),
        num("train", "seed", m.seed),

        path("prompt", "template_dir", c.template_dir),

        text("service", "endpoint", c.endpoint),
        {"service", "deadline_ms", [&c] { return std::to_string(c.client.deadline.count()); },
         [&c](const std::string& s) {
             c.client.deadline = std::chrono::milliseconds(parse_number<long>("service.deadline_ms", s));
         }},
        num("service", "retries", c.client.retries),

        text("mock", "model_id", c.mock.model_id),
        num("mock", "hidden_dim", c.mock.hidden_dim),
        num("mock", "vocab_size", c.mock.vocab_size),
        num("mock", "max_positions", c.mock.max_positions),
        num("mock", "seed", c.mock.seed),
        num("mock", "spectral_radius", c.mock.spectral_radius),
        num("mock", "input_scale", c.mock.input_scale),

        num("metrics", "floor", c.metric_floor),
    };
}

}  // namespace

void RunConfig::validate() const {
    generator.validate();
    model.validate();
    const double total = split.train + split.val + split.test;
    if (split.train < 0 || split.val < 0 || split.test < 0 || std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split ratios must be non-negative and sum to 1");
    }
    if (train_limit < 0) throw ConfigError("data.train_limit must be non-negative");
    if (client.deadline.count() <= 0) throw ConfigError("service.deadline_ms must be positive");
    if (client.retries < 0) throw ConfigError("service.retries must be non-negative");
    if (mock.hidden_dim <= 0 || mock.vocab_size <= 1 || mock.max_positions <= 0) {
        throw ConfigError("mock sizes must be positive");
    }
    if (!(metric_floor >= 0.0)) throw ConfigError("metrics.floor must be non-negative");
    if (model.patch.window_len != generator.steps) {
        throw ConfigError("sdc.window_len (" + std::to_string(model.patch.window_len) + ") must equal generator.steps (" +
                          std::to_string(generator.steps) + ")");
    }
}

RunConfig parse_run_config(std::string_view body, const std::filesystem::path& base_dir) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(body)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }

    RunConfig cfg;
    auto table = fields(cfg);
    for (const auto& [section, entries] : tree) {
        if (entries.empty() && !entries.data().empty()) {
            throw ConfigError("config: key '" + section + "' outside a section");
        }
        for (const auto& [key, value] : entries) {
            auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
            if (it == table.end()) throw ConfigError("config: unknown key '" + section + "." + key + "'");
            it->set(value.data());
        }
    }
    if (!base_dir.empty()) {
        for (auto* p : {&cfg.shots_path, &cfg.terms_file, &cfg.template_dir}) {
            if (!p->empty() && p->is_relative()) *p = base_dir / *p;
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), file.parent_path());
}

std::string format_run_config(const RunConfig& cfg) {
    RunConfig copy = cfg;
    std::string out, current;
    for (const auto& f : fields(copy)) {
        if (f.section != current) {
            if (!current.empty()) out += "\n";
            out += "[" + f.section + "]\n";
            current = f.section;
        }
        out += f.key + " = " + f.get() + "\n";
    }
    return out;
}

void resolve_resources(RunConfig& cfg) {
    if (!cfg.terms_file.empty()) cfg.model.terms = sdc::load_terms(cfg.terms_file);
    if (!cfg.template_dir.empty()) cfg.model.descriptors = load_descriptors(cfg.template_dir);
}

}  // namespace lpi
