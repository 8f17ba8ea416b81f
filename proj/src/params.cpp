#include "madpot/params.hpp"

#include <cmath>

#include "madpot/rng.hpp"

namespace madpot {

namespace {

Matrix draw_uniform(SplitMix64& rng, int rows, int cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

LevelParams draw_level(SplitMix64& rng, int d) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    LevelParams lp;
    lp.w_shared = draw_uniform(rng, d, d, -bound, bound);
    lp.w_det = draw_uniform(rng, d, d, -bound, bound);
    lp.w_seg = draw_uniform(rng, d, d, -bound, bound);
    return lp;
}

}  // namespace

ModelParams init_params(const ModelConfig& model, VisionMode vision, const ScoringConfig& scoring,
                        std::uint64_t init_seed) {
    model.validate();
    ModelParams p;
    p.config = model;
    p.vision = vision;
    p.scoring = scoring;

    SplitMix64 rng(init_seed);
    const int kl = model.num_prompts * model.context_len;
    p.v_normal = draw_uniform(rng, kl, model.token_dim, -0.02, 0.02);
    p.v_abnormal = draw_uniform(rng, kl, model.token_dim, -0.02, 0.02);
    if (vision == VisionMode::adapter || vision == VisionMode::both)
        p.adapter = draw_level(rng, model.feat_dim);
    if (vision == VisionMode::projector || vision == VisionMode::both)
        p.projector = draw_level(rng, model.feat_dim);
    return p;
}

}  // namespace madpot
