#pragma once

#include <cstdint>
#include <optional>

#include "madpot/losses.hpp"
#include "madpot/model.hpp"
#include "madpot/scoring.hpp"

namespace madpot {

struct TrainHyper {
    double lr = 1e-3;
    int batch_size = 16;
    int epochs = 100;
    std::uint64_t seed = 1;
    LossWeights weights;
};

// Everything a trained model carries: frozen-encoder recipe (config seed),
// scoring setup, training provenance, and the trainable tensors.
struct ModelParams {
    ModelConfig config;
    VisionMode vision = VisionMode::both;
    ScoringConfig scoring;
    TrainHyper train_echo;

    std::optional<LevelParams> adapter;    // level 1
    std::optional<LevelParams> projector;  // level 2
    Matrix v_normal, v_abnormal;           // (K*L) x token_dim context tokens

    bool prompts_trainable() const { return variant_trains_prompts(scoring.variant); }
};

// Fresh parameters from the run seed. Draw order: prompts (normal, abnormal),
// then adapter, then projector, so prompt init is identical across vision
// ablations.
ModelParams init_params(const ModelConfig& model, VisionMode vision, const ScoringConfig& scoring,
                        std::uint64_t init_seed);

// Visits trainable tensors in serialization order: f(name, tensor).
template <typename P, typename F>
void for_each_trainable(P& params, F&& f) {
    if (params.adapter) {
        f("adapter1.shared", params.adapter->w_shared);
        f("adapter1.det", params.adapter->w_det);
        f("adapter1.seg", params.adapter->w_seg);
    }
    if (params.projector) {
        f("projector2.shared", params.projector->w_shared);
        f("projector2.det", params.projector->w_det);
        f("projector2.seg", params.projector->w_seg);
    }
    if (params.prompts_trainable()) {
        f("prompts.normal", params.v_normal);
        f("prompts.abnormal", params.v_abnormal);
    }
}

}  // namespace madpot
