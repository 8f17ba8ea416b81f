#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "madpot/data.hpp"
#include "madpot/metrics.hpp"
#include "madpot/params_io.hpp"
#include "madpot/training.hpp"

namespace madpot {

// Flat key/value run configuration; file format is `key = value` lines with
// '#' comments. Flags override file values which override defaults.
struct RunConfig {
    ModelConfig model;
    ScoringConfig scoring;
    TrainHyper hyper;
    VisionMode vision = VisionMode::both;
    SyntheticSpec synth;
};

RunConfig parse_config_file(const std::filesystem::path& path);
// Applies one key/value pair; throws ParseError for unknown keys.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

TrainConfig to_train_config(const RunConfig& cfg);

// Trains on the manifest's samples and returns the result.
TrainResult run_training(const RunConfig& cfg, const std::filesystem::path& manifest_path);

// Evaluates a trained model over a manifest: AC-AUC always, AS-AUC when the
// eval set carries masks.
EvalReport run_eval(const ModelParams& params, const std::filesystem::path& manifest_path);

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& epoch_losses);

}  // namespace madpot
