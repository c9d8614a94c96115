#pragma once

#include "lpi/data.hpp"
#include "lpi/metrics.hpp"
#include "lpi/pipeline.hpp"
#include "lpi/service.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace lpi {

// Everything a command needs. Loaded from an INI file:
//
//   [section]
//   key = value      ; or # comments
//
// Unknown sections or keys are errors. Relative paths resolve against the
// config file's directory.
struct RunConfig {
    std::filesystem::path shots_path = "shots.jsonl";
    SplitRatios split;
    std::uint64_t split_seed = 2024;
    int train_limit = 0;  // use only the first n training shots; 0 means all
    GeneratorConfig generator;
    ModelConfig model;
    std::filesystem::path terms_file;    // empty: built-in term list
    std::filesystem::path template_dir;  // empty: built-in descriptors
    std::string endpoint = "inproc";
    ClientOptions client;
    MockConfig mock;
    double metric_floor = kCaeFloor;

    void validate() const;
};

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);

// Reads terms_file and template_dir into cfg.model.
void resolve_resources(RunConfig& cfg);

}  // namespace lpi
