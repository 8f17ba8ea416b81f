#include "madpot/scoring.hpp"

#include <cmath>

#include "madpot/errors.hpp"
#include "madpot/numkit.hpp"

namespace madpot {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::fixed: return "fixed";
        case Variant::cl: return "cl";
        case Variant::ot: return "ot";
        case Variant::pot: return "pot";
        case Variant::cl_ot: return "cl+ot";
        case Variant::cl_pot: return "cl+pot";
    }
    return "cl+pot";
}

Variant variant_from_string(const std::string& s) {
    if (s == "fixed") return Variant::fixed;
    if (s == "cl") return Variant::cl;
    if (s == "ot") return Variant::ot;
    if (s == "pot") return Variant::pot;
    if (s == "cl+ot") return Variant::cl_ot;
    if (s == "cl+pot") return Variant::cl_pot;
    throw InvalidInputError("unknown variant: " + s);
}

bool variant_uses_cl(Variant v) {
    return v == Variant::fixed || v == Variant::cl || v == Variant::cl_ot || v == Variant::cl_pot;
}

bool variant_uses_transport(Variant v) {
    return v == Variant::ot || v == Variant::pot || v == Variant::cl_ot || v == Variant::cl_pot;
}

bool variant_transport_is_partial(Variant v) { return v == Variant::pot || v == Variant::cl_pot; }

bool variant_trains_prompts(Variant v) { return v != Variant::fixed; }

namespace build {

namespace {

// Inner-loop transport solve; the plan enters the tape as a constant.
TransportPlan solve_alignment(const Matrix& cost, const ScoringConfig& cfg, PlanSource* plans) {
    if (plans && plans->replay) {
        TransportPlan t;
        t.plan = (*plans->replay)[plans->idx++];
        t.converged = true;
        return t;
    }
    const int g = cost.rows;
    const int k = cost.cols;
    const Histogram alpha = Histogram::uniform(g, 1.0);
    TransportPlan t;
    if (variant_transport_is_partial(cfg.variant)) {
        const Histogram beta = Histogram::uniform(k, cfg.solver.frac);
        t = partial_ot(cost, alpha, beta, cfg.solver);
    } else {
        const Histogram beta = Histogram::uniform(k, 1.0);
        t = sinkhorn(cost, alpha, beta, cfg.solver);
    }
    if (plans && plans->record) plans->record->push_back(t.plan);
    return t;
}

}  // namespace

PotScore pot_score(ad::Tape& t, ad::Var o_hat, ad::Var p_normal_rows, ad::Var p_abnormal_rows,
                   const ScoringConfig& cfg, PlanSource* plans) {
    PotScore out;
    ad::Var logits[2];
    const ad::Var p_rows[2] = {p_normal_rows, p_abnormal_rows};
    for (int j = 0; j < 2; ++j) {
        const ad::Var cost = t.affine(t.matmul_nt(o_hat, p_rows[j]), -1.0, 1.0);
        TransportPlan plan = solve_alignment(t.val(cost), cfg, plans);
        const ad::Var dis = t.hadamard_const(cost, plan.plan);
        logits[j] = t.sum_all(t.affine(dis, -1.0, 1.0));  // sum of (1 - dis)
        if (j == 0) {
            out.dis_normal = dis;
            out.plan_normal = std::move(plan);
        } else {
            out.dis_abnormal = dis;
            out.plan_abnormal = std::move(plan);
        }
    }
    out.p_abnormal = t.sigmoid_diff(logits[1], logits[0], cfg.tau);
    return out;
}

ad::Var cl_score_abnormal(ad::Tape& t, ad::Var o_hat, ad::Var fused_normal_hat,
                          ad::Var fused_abnormal_hat, double tau) {
    const ad::Var sim_n = t.matmul_nt(o_hat, fused_normal_hat);   // G x 1
    const ad::Var sim_ab = t.matmul_nt(o_hat, fused_abnormal_hat);
    return t.mean_all(t.sigmoid_diff(sim_ab, sim_n, tau));
}

SegMap seg_map(ad::Tape& t, ad::Var o_hat, ad::Var p_normal_rows, ad::Var p_abnormal_rows,
               ad::Var fused_normal_hat, ad::Var fused_abnormal_hat, const ScoringConfig& cfg,
               int grid_side, int out_h, int out_w, PlanSource* plans) {
    const int g = t.val(o_hat).rows;
    if (grid_side * grid_side != g) throw ShapeError("seg_map: G is not a perfect square");

    SegMap out;
    ad::Var upsampled[2];
    const ad::Var p_rows[2] = {p_normal_rows, p_abnormal_rows};
    const ad::Var fused[2] = {fused_normal_hat, fused_abnormal_hat};
    for (int j = 0; j < 2; ++j) {
        ad::Var patch_logit;  // G x 1
        if (variant_uses_transport(cfg.variant)) {
            const ad::Var cost = t.affine(t.matmul_nt(o_hat, p_rows[j]), -1.0, 1.0);
            TransportPlan plan = solve_alignment(t.val(cost), cfg, plans);
            const ad::Var dis = t.hadamard_const(cost, plan.plan);
            const int k = t.val(cost).cols;
            // sum_k (1 - dis) = K - rowsum(dis)
            patch_logit = t.affine(t.row_sums(dis), -1.0, static_cast<double>(k));
            out.plans[static_cast<std::size_t>(j)] = std::move(plan);
        }
        if (variant_uses_cl(cfg.variant)) {
            const ad::Var sim = t.matmul_nt(o_hat, fused[j]);
            patch_logit = patch_logit.valid() ? t.add(patch_logit, sim) : sim;
        }
        upsampled[j] = t.bicubic(t.reshape(patch_logit, grid_side, grid_side), out_h, out_w);
    }
    out.map_abnormal = t.sigmoid_diff(upsampled[1], upsampled[0], cfg.tau);
    return out;
}

}  // namespace build

PotDetection pot_detection_score(const Matrix& o_det, const PromptSet& p_normal,
                                 const PromptSet& p_abnormal, const ScoringConfig& cfg) {
    if (o_det.cols != p_normal.p.cols || o_det.cols != p_abnormal.p.cols)
        throw ShapeError("pot_detection_score: feature dimensions differ");
    ad::Tape t;
    const ad::Var o_hat = t.constant(l2_normalize_rows(o_det));
    const ad::Var pn = t.constant(l2_normalize_rows(p_normal.p));
    const ad::Var pab = t.constant(l2_normalize_rows(p_abnormal.p));
    const build::PotScore s = build::pot_score(t, o_hat, pn, pab, cfg);
    PotDetection out;
    const double p_ab = t.scalar(s.p_abnormal);
    out.probs = {1.0 - p_ab, p_ab};
    out.dis_normal = t.val(s.dis_normal);
    out.dis_abnormal = t.val(s.dis_abnormal);
    return out;
}

std::array<double, 2> cl_detection_score(const Matrix& o_det, const Matrix& fused_normal,
                                         const Matrix& fused_abnormal, double tau) {
    if (o_det.cols != fused_normal.cols || o_det.cols != fused_abnormal.cols)
        throw ShapeError("cl_detection_score: feature dimensions differ");
    ad::Tape t;
    const ad::Var o_hat = t.constant(l2_normalize_rows(o_det));
    const ad::Var fn = t.constant(l2_normalize_rows(fused_normal));
    const ad::Var fab = t.constant(l2_normalize_rows(fused_abnormal));
    const double p_ab = t.scalar(build::cl_score_abnormal(t, o_hat, fn, fab, tau));
    return {1.0 - p_ab, p_ab};
}

std::array<Matrix, 2> segmentation_map(const Matrix& o_seg, const PromptSet& p_normal,
                                       const PromptSet& p_abnormal, const ScoringConfig& cfg,
                                       int out_h, int out_w) {
    const int g = o_seg.rows;
    const int gs = static_cast<int>(std::lround(std::sqrt(static_cast<double>(g))));
    if (gs * gs != g) throw ShapeError("segmentation_map: G is not a perfect square");
    ad::Tape t;
    const ad::Var o_hat = t.constant(l2_normalize_rows(o_seg));
    const ad::Var pn = t.constant(l2_normalize_rows(p_normal.p));
    const ad::Var pab = t.constant(l2_normalize_rows(p_abnormal.p));
    const ad::Var fn = t.constant(l2_normalize_rows(p_normal.fused));
    const ad::Var fab = t.constant(l2_normalize_rows(p_abnormal.fused));
    const build::SegMap m = build::seg_map(t, o_hat, pn, pab, fn, fab, cfg, gs, out_h, out_w);
    const Matrix& ab = t.val(m.map_abnormal);
    return {affine(ab, -1.0, 1.0), ab};
}

Aggregate aggregate_inference(std::span<const LevelScores> levels,
                              std::span<const Matrix> abnormal_maps) {
    if (levels.empty()) throw InvalidInputError("aggregate_inference: no levels");
    Aggregate out;
    for (const LevelScores& l : levels) out.ac_score += l.c_total[1];
    out.ac_score /= static_cast<double>(levels.size());
    if (!abnormal_maps.empty()) {
        out.as_map = Matrix(abnormal_maps[0].rows, abnormal_maps[0].cols, 0.0);
        for (const Matrix& m : abnormal_maps) {
            if (!m.same_shape(out.as_map)) throw ShapeError("aggregate_inference: map shapes differ");
            for (std::size_t i = 0; i < m.size(); ++i) out.as_map.data[i] += m.data[i];
        }
        for (double& v : out.as_map.data) v /= static_cast<double>(abnormal_maps.size());
    }
    return out;
}

}  // namespace madpot
