#pragma once

#include "lpi/data.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace lpi {

using Bindings = std::map<std::string, std::string>;

// Three descriptor templates; placeholders are written `{name}`.
struct PromptDescriptors {
    std::string context_text;
    std::string task_text;
    std::string input_template;
    bool operator==(const PromptDescriptors&) const = default;
};

// Marker tokens wrapped around every section. Defaults follow the Llama 3
// chat format.
struct SpecialTokens {
    std::string begin = "<|begin_of_text|>";
    std::string header_start = "<|start_header_id|>";
    std::string header_end = "<|end_header_id|>";
    std::string section_end = "<|eot_id|>";
};

struct PromptOptions {
    SpecialTokens tokens;
    std::size_t max_chars = 16384;
    int token_budget = 1024;
};

struct FusionPrompt {
    std::string text;
    Bindings placeholder_bindings;
    int token_budget = 1024;
};

PromptDescriptors default_descriptors();
// Reads context.txt, task.txt and input.txt from `dir`.
PromptDescriptors load_descriptors(const std::filesystem::path& dir);

// Substitutes every `{name}`; throws TemplateError naming the first unbound one.
std::string fill_template(const std::string& text, const Bindings& bindings);

// Bindings for the input descriptor: min, max, median (6 significant
// digits), seq_len, pred_len, phase_plate.
Bindings input_bindings(const InputStats& stats, int seq_len, int pred_len, const std::string& phase_plate);

std::string build_input_descriptor(const std::string& input_template, const InputStats& stats, int seq_len,
                                   int pred_len, const std::string& phase_plate);

FusionPrompt assemble_prompt(const PromptDescriptors& descriptors, const Bindings& bindings,
                             const PromptOptions& options = {});

}  // namespace lpi
