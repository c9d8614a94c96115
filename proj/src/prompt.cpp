#include "lpi/prompt.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lpi {

namespace {

const char* const kContext =
    "You are assisting with inertial confinement fusion (ICF) experiments. In each shot a "
    "millimetre-scale fuel capsule is imploded by a shaped laser pulse: a short picket sets the "
    "initial shock, a ramp compresses the shell, and the main drive peak delivers most of the "
    "energy before the trailing edge. Laser-plasma instabilities such as two-plasmon decay and "
    "stimulated Raman scattering grow once the on-target intensity crosses a threshold, "
    "accelerating hot electrons. Those electrons emit hard X-rays through bremsstrahlung, and the "
    "hard X-ray detector records their energy as a voltage trace sampled every 0.025 ns.";

const char* const kTask =
    "Given the laser intensity profile of one shot, forecast the hard X-ray (hot-electron "
    "energy) signal over the same time window. The input holds {seq_len} laser samples; produce "
    "exactly {pred_len} non-negative values, one per time step, in the same order. Expect a "
    "near-flat signal during the low-intensity phases and a sharp rise around the intensity peak.";

const char* const kInput =
    "Input statistics: minimum {min}, maximum {max}, median {median}. Sequence length "
    "{seq_len}; prediction length {pred_len}; phase plate {phase_plate}.";

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read prompt template: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string s = buf.str();
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    if (s.empty()) throw ConfigError("prompt template is empty: " + path.string());
    return s;
}

std::string sig6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

PromptDescriptors default_descriptors() { return {kContext, kTask, kInput}; }

PromptDescriptors load_descriptors(const std::filesystem::path& dir) {
    return {read_text(dir / "context.txt"), read_text(dir / "task.txt"), read_text(dir / "input.txt")};
}

std::string fill_template(const std::string& text, const Bindings& bindings) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{' && i + 1 < text.size() && ident_start(text[i + 1])) {
            std::size_t j = i + 1;
            while (j < text.size() && ident_char(text[j])) ++j;
            if (j < text.size() && text[j] == '}') {
                const std::string name = text.substr(i + 1, j - i - 1);
                auto it = bindings.find(name);
                if (it == bindings.end()) throw TemplateError("unbound placeholder '" + name + "'");
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out.push_back(text[i++]);
    }
    return out;
}

Bindings input_bindings(const InputStats& stats, int seq_len, int pred_len, const std::string& phase_plate) {
    if (seq_len <= 0 || pred_len <= 0) throw ArgumentError("input descriptor: lengths must be positive");
    if (!(stats.min <= stats.median && stats.median <= stats.max)) {
        throw ArgumentError("input descriptor: inconsistent statistics");
    }
    return {{"min", sig6(stats.min)},
            {"max", sig6(stats.max)},
            {"median", sig6(stats.median)},
            {"seq_len", std::to_string(seq_len)},
            {"pred_len", std::to_string(pred_len)},
            {"phase_plate", phase_plate}};
}

std::string build_input_descriptor(const std::string& input_template, const InputStats& stats, int seq_len,
                                   int pred_len, const std::string& phase_plate) {
    return fill_template(input_template, input_bindings(stats, seq_len, pred_len, phase_plate));
}

FusionPrompt assemble_prompt(const PromptDescriptors& d, const Bindings& bindings, const PromptOptions& options) {
    if (d.context_text.empty() || d.task_text.empty() || d.input_template.empty()) {
        throw TemplateError("prompt descriptors must not be empty");
    }
    const SpecialTokens& tok = options.tokens;
    auto section = [&](const char* name, const std::string& body) {
        return tok.header_start + name + tok.header_end + "\n\n" + fill_template(body, bindings) +
               tok.section_end;
    };
    FusionPrompt p;
    p.text = tok.begin + section("context", d.context_text) + section("task", d.task_text) +
             section("input", d.input_template);
    if (p.text.size() > options.max_chars) {
        throw TemplateError("assembled prompt exceeds " + std::to_string(options.max_chars) + " characters");
    }
    p.placeholder_bindings = bindings;
    p.token_budget = options.token_budget;
    return p;
}

}  // namespace lpi
