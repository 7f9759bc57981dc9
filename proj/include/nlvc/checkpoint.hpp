#pragma once

#include <optional>
#include <string>

#include "nlvc/training.hpp"

namespace nlvc {

// Versioned little-endian binary snapshot: model + non-local configuration,
// every parameter tensor with its shape, and optionally the optimizer
// moments so training can resume.
struct Checkpoint {
    NetworkParams params;
    NonLocalConfig nl;
    std::optional<AdamState> adam;
};

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const NonLocalConfig& nl, const AdamState* adam = nullptr);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace nlvc
