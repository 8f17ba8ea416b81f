#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madpot/data.hpp"
#include "madpot/params.hpp"

namespace madpot {

struct TrainConfig {
    TrainHyper hyper;
    ScoringConfig scoring;
    ModelConfig model;
    VisionMode vision = VisionMode::both;
};

// Gradients for every trainable tensor, in for_each_trainable order.
struct GradientSet {
    std::vector<std::pair<std::string, Matrix>> grads;
};

struct AdamSlot {
    Matrix m, v;
};

struct OptimizerState {
    std::vector<AdamSlot> slots;
    long step = 0;
};

// One Adam update of a single tensor (beta1 0.9, beta2 0.999, eps 1e-8, bias
// correction); step is the 1-based step count.
void adam_update(Matrix& param, const Matrix& grad, AdamSlot& slot, long step, double lr);

// Updates every trainable tensor in place and advances the step counter.
void adam_step(ModelParams& params, const GradientSet& grads, OptimizerState& state, double lr);

struct ForwardBackward {
    double loss = 0.0;
    GradientSet grads;
};

// Inner stage: solve transport plans with parameters fixed (the plans enter
// the graph as constants). Outer stage: reverse-mode gradients of the batch
// mean loss through every other path. plan_source optionally records or
// replays the plan sequence (used by the gradient checks to hold T* fixed).
ForwardBackward forward_backward(std::span<const Sample> batch, const ModelParams& params,
                                 const FrozenEncoder& enc, const LossWeights& weights,
                                 build::PlanSource* plan_source = nullptr);

// Batch mean loss only (no gradients).
double forward_loss(std::span<const Sample> batch, const ModelParams& params,
                    const FrozenEncoder& enc, const LossWeights& weights,
                    build::PlanSource* plan_source = nullptr);

struct SampleEvaluation {
    std::vector<LevelScores> levels;
    std::vector<Matrix> abnormal_maps;  // per level, image-sized
    Aggregate aggregate;
};

SampleEvaluation evaluate_sample(const Sample& sample, const ModelParams& params,
                                 const FrozenEncoder& enc);

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_mean_loss;
};

// Seeded shuffle, fixed-size batches (last may be short), forward_backward +
// adam_step per batch; deterministic given (cfg, dataset).
TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg);

}  // namespace madpot
