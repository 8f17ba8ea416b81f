#include "madpot/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "madpot/errors.hpp"
#include "madpot/rng.hpp"

namespace madpot {

namespace {

using ad::Tape;
using ad::Var;

struct GraphVars {
    // trainable (or frozen constants during eval / fixed variant)
    std::array<Var, 3> adapter{};    // shared, det, seg
    std::array<Var, 3> projector{};
    Var v_normal, v_abnormal;
    // frozen encoder constants
    Var w1, w2, w_txt;
};

struct PromptGraph {
    Var rows;       // K x d, unit rows
    Var fused_hat;  // 1 x d, unit
};

GraphVars make_graph_vars(Tape& t, const ModelParams& p, const FrozenEncoder& enc,
                          bool training) {
    GraphVars v;
    const bool train_prompts = training && p.prompts_trainable();
    v.v_normal = train_prompts ? t.param(p.v_normal) : t.constant(p.v_normal);
    v.v_abnormal = train_prompts ? t.param(p.v_abnormal) : t.constant(p.v_abnormal);
    auto lift = [&](const LevelParams& lp, std::array<Var, 3>& dst) {
        dst[0] = training ? t.param(lp.w_shared) : t.constant(lp.w_shared);
        dst[1] = training ? t.param(lp.w_det) : t.constant(lp.w_det);
        dst[2] = training ? t.param(lp.w_seg) : t.constant(lp.w_seg);
    };
    if (p.adapter) lift(*p.adapter, v.adapter);
    if (p.projector) lift(*p.projector, v.projector);
    v.w1 = t.constant(enc.w1);
    v.w2 = t.constant(enc.w2);
    v.w_txt = t.constant(enc.w_txt);
    return v;
}

PromptGraph build_prompts(Tape& t, Var v_tokens, const std::vector<Matrix>& cls, Var w_txt,
                          int num_prompts, int context_len) {
    std::vector<Var> rows;
    rows.reserve(static_cast<std::size_t>(num_prompts));
    const double lf = static_cast<double>(context_len) / (context_len + 1.0);
    const double cf = 1.0 / (context_len + 1.0);
    for (int k = 0; k < num_prompts; ++k) {
        const Var ctx_mean = t.mean_rows(t.slice_rows(v_tokens, k * context_len, (k + 1) * context_len));
        const Var token_mean = t.add_scaled(ctx_mean, t.constant(cls[static_cast<std::size_t>(k)]), lf, cf);
        rows.push_back(t.l2_normalize_rows(t.tanh(t.matmul(token_mean, w_txt))));
    }
    PromptGraph g;
    g.rows = t.vstack(rows);
    g.fused_hat = t.l2_normalize_rows(t.mean_rows(g.rows));
    return g;
}

struct LevelFeatures {
    Var o_det_hat, o_seg_hat;
};

struct LevelOut {
    Var p_pot_ab;  // invalid when the variant has no transport term
    Var c_cl_ab;   // invalid when the variant has no CL term
    Var p_bce;     // mean of the active terms
    Var map_abnormal;
};

// Frozen two-level encoding with the adapter (residual) at level 1 and the
// projector at level 2; disabled blocks pass raw features through.
std::array<LevelFeatures, 2> build_vision(Tape& t, const GraphVars& v, const ModelParams& p,
                                          const FrozenEncoder& enc, const Matrix& patches) {
    const int gs = p.config.grid_side();
    const Var f1 = t.tanh(t.matmul(t.constant(patches), v.w1));

    std::array<LevelFeatures, 2> levels;
    Var f_res = f1;
    if (p.adapter) {
        const Var shared = t.relu(t.matmul(f1, v.adapter[0]));
        levels[0].o_det_hat = t.l2_normalize_rows(t.relu(t.matmul(shared, v.adapter[1])));
        levels[0].o_seg_hat = t.l2_normalize_rows(t.relu(t.matmul(shared, v.adapter[2])));
        f_res = t.add_scaled(shared, f1, p.config.gamma, 1.0 - p.config.gamma);
    } else {
        levels[0].o_det_hat = t.l2_normalize_rows(f1);
        levels[0].o_seg_hat = levels[0].o_det_hat;
    }

    const Var f2 = t.tanh(t.matmul(t.mix3x3(f_res, gs, enc.mix), v.w2));
    if (p.projector) {
        const Var shared = t.relu(t.matmul(f2, v.projector[0]));
        levels[1].o_det_hat = t.l2_normalize_rows(t.relu(t.matmul(shared, v.projector[1])));
        levels[1].o_seg_hat = t.l2_normalize_rows(t.relu(t.matmul(shared, v.projector[2])));
    } else {
        levels[1].o_det_hat = t.l2_normalize_rows(f2);
        levels[1].o_seg_hat = levels[1].o_det_hat;
    }
    return levels;
}

LevelOut build_level_scores(Tape& t, const LevelFeatures& feats, const PromptGraph& pn,
                            const PromptGraph& pab, const ModelParams& p,
                            build::PlanSource* plans) {
    const ScoringConfig& cfg = p.scoring;
    const int gs = p.config.grid_side();
    const int side = p.config.image_side;

    LevelOut out;
    int active = 0;
    if (variant_uses_transport(cfg.variant)) {
        const build::PotScore pot = build::pot_score(t, feats.o_det_hat, pn.rows, pab.rows, cfg, plans);
        out.p_pot_ab = pot.p_abnormal;
        ++active;
    }
    if (variant_uses_cl(cfg.variant)) {
        out.c_cl_ab = build::cl_score_abnormal(t, feats.o_det_hat, pn.fused_hat, pab.fused_hat, cfg.tau);
        ++active;
    }
    if (out.p_pot_ab.valid() && out.c_cl_ab.valid())
        out.p_bce = t.affine(t.add(out.p_pot_ab, out.c_cl_ab), 1.0 / active, 0.0);
    else
        out.p_bce = out.p_pot_ab.valid() ? out.p_pot_ab : out.c_cl_ab;

    const build::SegMap seg = build::seg_map(t, feats.o_seg_hat, pn.rows, pab.rows, pn.fused_hat,
                                             pab.fused_hat, cfg, gs, side, side, plans);
    out.map_abnormal = seg.map_abnormal;
    return out;
}

struct SampleGraph {
    Var loss;
    std::array<LevelOut, 2> levels;
};

SampleGraph build_sample(Tape& t, const GraphVars& v, const ModelParams& p,
                         const FrozenEncoder& enc, const PromptGraph& pn, const PromptGraph& pab,
                         const Sample& sample, const LossWeights& weights,
                         build::PlanSource* plans) {
    const Matrix patches = patchify(sample.image, p.config);
    const std::array<LevelFeatures, 2> feats = build_vision(t, v, p, enc, patches);
    const int y_abnormal = sample.label == 0 ? 1 : 0;

    SampleGraph g;
    Var total;
    for (int lvl = 0; lvl < 2; ++lvl) {
        LevelOut lo;
        try {
            lo = build_level_scores(t, feats[static_cast<std::size_t>(lvl)], pn, pab, p, plans);
        } catch (const Error& e) {
            throw NumericalError("training: level " + std::to_string(lvl + 1) + ": " + e.what());
        }
        Var level_loss = t.affine(t.bce_loss(lo.p_bce, y_abnormal), weights.w_bce, 0.0);
        if (sample.mask.has_value()) {
            level_loss = t.add_scaled(level_loss, t.gdice_loss(lo.map_abnormal, *sample.mask), 1.0,
                                      weights.w_gdice);
            level_loss = t.add_scaled(level_loss, t.focal_loss(lo.map_abnormal, *sample.mask), 1.0,
                                      weights.w_focal);
        }
        total = total.valid() ? t.add(total, level_loss) : level_loss;
        g.levels[static_cast<std::size_t>(lvl)] = lo;
    }
    g.loss = total;
    return g;
}

struct BatchGraph {
    Tape tape;
    GraphVars vars;
    Var mean_loss;
};

void build_batch(BatchGraph& bg, std::span<const Sample> batch, const ModelParams& params,
                 const FrozenEncoder& enc, const LossWeights& weights, bool training,
                 build::PlanSource* plans) {
    if (batch.empty()) throw InvalidInputError("forward_backward: empty batch");
    Tape& t = bg.tape;
    bg.vars = make_graph_vars(t, params, enc, training);
    const PromptGraph pn =
        build_prompts(t, bg.vars.v_normal,
                      class_tokens(normal_class_names(), params.config.num_prompts, params.config.token_dim),
                      bg.vars.w_txt, params.config.num_prompts, params.config.context_len);
    const PromptGraph pab =
        build_prompts(t, bg.vars.v_abnormal,
                      class_tokens(abnormal_class_names(), params.config.num_prompts, params.config.token_dim),
                      bg.vars.w_txt, params.config.num_prompts, params.config.context_len);

    Var sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        SampleGraph g;
        try {
            g = build_sample(t, bg.vars, params, enc, pn, pab, batch[i], weights, plans);
        } catch (const Error& e) {
            throw NumericalError("training: sample " + std::to_string(i) + ": " + e.what());
        }
        sum = sum.valid() ? t.add(sum, g.loss) : g.loss;
    }
    bg.mean_loss = t.affine(sum, 1.0 / static_cast<double>(batch.size()), 0.0);
}

}  // namespace

ForwardBackward forward_backward(std::span<const Sample> batch, const ModelParams& params,
                                 const FrozenEncoder& enc, const LossWeights& weights,
                                 build::PlanSource* plan_source) {
    BatchGraph bg;
    build_batch(bg, batch, params, enc, weights, /*training=*/true, plan_source);
    bg.tape.backward(bg.mean_loss);

    ForwardBackward out;
    out.loss = bg.tape.scalar(bg.mean_loss);

    // Collect gradients in for_each_trainable order.
    const GraphVars& v = bg.vars;
    std::vector<std::pair<std::string, Var>> slots;
    if (params.adapter) {
        slots.emplace_back("adapter1.shared", v.adapter[0]);
        slots.emplace_back("adapter1.det", v.adapter[1]);
        slots.emplace_back("adapter1.seg", v.adapter[2]);
    }
    if (params.projector) {
        slots.emplace_back("projector2.shared", v.projector[0]);
        slots.emplace_back("projector2.det", v.projector[1]);
        slots.emplace_back("projector2.seg", v.projector[2]);
    }
    if (params.prompts_trainable()) {
        slots.emplace_back("prompts.normal", v.v_normal);
        slots.emplace_back("prompts.abnormal", v.v_abnormal);
    }
    for (const auto& [name, var] : slots) out.grads.grads.emplace_back(name, bg.tape.grad(var));
    return out;
}

double forward_loss(std::span<const Sample> batch, const ModelParams& params,
                    const FrozenEncoder& enc, const LossWeights& weights,
                    build::PlanSource* plan_source) {
    BatchGraph bg;
    build_batch(bg, batch, params, enc, weights, /*training=*/false, plan_source);
    return bg.tape.scalar(bg.mean_loss);
}

SampleEvaluation evaluate_sample(const Sample& sample, const ModelParams& params,
                                 const FrozenEncoder& enc) {
    Tape t;
    GraphVars vars = make_graph_vars(t, params, enc, /*training=*/false);
    const PromptGraph pn =
        build_prompts(t, vars.v_normal,
                      class_tokens(normal_class_names(), params.config.num_prompts, params.config.token_dim),
                      vars.w_txt, params.config.num_prompts, params.config.context_len);
    const PromptGraph pab =
        build_prompts(t, vars.v_abnormal,
                      class_tokens(abnormal_class_names(), params.config.num_prompts, params.config.token_dim),
                      vars.w_txt, params.config.num_prompts, params.config.context_len);

    const Matrix patches = patchify(sample.image, params.config);
    const std::array<LevelFeatures, 2> feats = build_vision(t, vars, params, enc, patches);

    SampleEvaluation out;
    for (int lvl = 0; lvl < 2; ++lvl) {
        const LevelOut lo =
            build_level_scores(t, feats[static_cast<std::size_t>(lvl)], pn, pab, params, nullptr);
        LevelScores s;
        if (lo.p_pot_ab.valid()) {
            const double pab_score = t.scalar(lo.p_pot_ab);
            s.c_pot = {1.0 - pab_score, pab_score};
        }
        if (lo.c_cl_ab.valid()) {
            const double pab_score = t.scalar(lo.c_cl_ab);
            s.c_cl = {1.0 - pab_score, pab_score};
        }
        s.c_total = {s.c_pot[0] + s.c_cl[0], s.c_pot[1] + s.c_cl[1]};
        out.levels.push_back(s);
        out.abnormal_maps.push_back(t.val(lo.map_abnormal));
    }
    out.aggregate = aggregate_inference(out.levels, out.abnormal_maps);
    return out;
}

void adam_update(Matrix& param, const Matrix& grad, AdamSlot& slot, long step, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (slot.m.size() == 0) {
        slot.m = Matrix(param.rows, param.cols, 0.0);
        slot.v = Matrix(param.rows, param.cols, 0.0);
    }
    if (!param.same_shape(grad) || !param.same_shape(slot.m))
        throw ShapeError("adam_update: shape mismatch");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i];
        slot.m.data[i] = beta1 * slot.m.data[i] + (1.0 - beta1) * g;
        slot.v.data[i] = beta2 * slot.v.data[i] + (1.0 - beta2) * g * g;
        const double m_hat = slot.m.data[i] / bc1;
        const double v_hat = slot.v.data[i] / bc2;
        param.data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void adam_step(ModelParams& params, const GradientSet& grads, OptimizerState& state, double lr) {
    state.step += 1;
    std::size_t idx = 0;
    for_each_trainable(params, [&](const std::string& name, Matrix& tensor) {
        if (idx >= grads.grads.size() || grads.grads[idx].first != name)
            throw InvalidInputError("adam_step: gradient set does not match trainable tensors");
        if (state.slots.size() <= idx) state.slots.emplace_back();
        adam_update(tensor, grads.grads[idx].second, state.slots[idx], state.step, lr);
        ++idx;
    });
    if (idx != grads.grads.size())
        throw InvalidInputError("adam_step: gradient set has extra tensors");
}

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& cfg) {
    if (dataset.empty()) throw InvalidInputError("train: empty dataset");
    if (cfg.hyper.epochs < 1) throw InvalidInputError("train: epochs must be >= 1");
    if (cfg.hyper.batch_size < 1) throw InvalidInputError("train: batch_size must be >= 1");
    if (!(cfg.hyper.lr > 0.0)) throw InvalidInputError("train: lr must be positive");

    SplitMix64 root(cfg.hyper.seed);
    const std::uint64_t init_seed = root.next();
    const std::uint64_t shuffle_seed = root.next();

    TrainResult result;
    result.params = init_params(cfg.model, cfg.vision, cfg.scoring, init_seed);
    result.params.train_echo = cfg.hyper;
    const FrozenEncoder enc = make_encoder(cfg.model);

    OptimizerState opt;
    SplitMix64 shuffle_rng(shuffle_seed);
    const int n = static_cast<int>(dataset.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<Sample> batch;
    for (int epoch = 0; epoch < cfg.hyper.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.next() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        double loss_sum = 0.0;
        for (int at = 0; at < n; at += cfg.hyper.batch_size) {
            const int take = std::min(cfg.hyper.batch_size, n - at);
            batch.clear();
            for (int k = 0; k < take; ++k)
                batch.push_back(dataset[static_cast<std::size_t>(order[static_cast<std::size_t>(at + k)])]);
            const ForwardBackward fb =
                forward_backward(batch, result.params, enc, cfg.hyper.weights);
            adam_step(result.params, fb.grads, opt, cfg.hyper.lr);
            loss_sum += fb.loss * take;
        }
        result.epoch_mean_loss.push_back(loss_sum / n);
    }
    return result;
}

}  // namespace madpot
