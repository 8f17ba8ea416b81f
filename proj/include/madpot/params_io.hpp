#pragma once

#include <filesystem>

#include "madpot/params.hpp"

namespace madpot {

// Versioned structured-text parameter file ("madpot-params", version 1):
// header keys (config + provenance), then each tensor as a named block of
// decimal values. Round-trips doubles exactly (17 significant digits).
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace madpot
