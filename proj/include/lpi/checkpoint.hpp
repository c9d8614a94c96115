#pragma once

#include "lpi/data.hpp"
#include "lpi/pipeline.hpp"
#include "lpi/prompt.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lpi {

inline constexpr int kCheckpointVersion = 1;

// Single JSON file: versioned header, run config, resolved prompt resources,
// data normalization and named tensors with shapes.
struct Checkpoint {
    std::string config_text;
    std::vector<std::string> terms;
    PromptDescriptors descriptors;
    Normalization normalization;
    TensorMap tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lpi
