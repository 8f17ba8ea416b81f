#pragma once

#include <array>
#include <span>
#include <string>

#include "madpot/autodiff.hpp"
#include "madpot/matrix.hpp"
#include "madpot/model.hpp"
#include "madpot/transport.hpp"

namespace madpot {

// Which score terms are active (prompt-strategy ablation axis). "fixed" scores
// like "cl" but freezes the prompt tokens at their initialization.
enum class Variant { fixed, cl, ot, pot, cl_ot, cl_pot };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);
bool variant_uses_cl(Variant v);
bool variant_uses_transport(Variant v);
bool variant_transport_is_partial(Variant v);
bool variant_trains_prompts(Variant v);

struct ScoringConfig {
    double tau = 0.07;
    Variant variant = Variant::cl_pot;
    SolverConfig solver;
};

// Class order everywhere: index 0 = normal, 1 = abnormal.
struct LevelScores {
    std::array<double, 2> c_pot{0.0, 0.0};
    std::array<double, 2> c_cl{0.0, 0.0};
    std::array<double, 2> c_total{0.0, 0.0};
};

struct PotDetection {
    std::array<double, 2> probs{0.5, 0.5};
    Matrix dis_normal, dis_abnormal;  // C (Hadamard) T*, per class
};

// Transport-aligned detection score over one feature level.
PotDetection pot_detection_score(const Matrix& o_det, const PromptSet& p_normal,
                                 const PromptSet& p_abnormal, const ScoringConfig& cfg);

// Per-patch class softmax of cosine similarities to the fused prompts,
// averaged over patches.
std::array<double, 2> cl_detection_score(const Matrix& o_det, const Matrix& fused_normal,
                                         const Matrix& fused_abnormal, double tau);

// Per-class anomaly maps: patch logits summed over active terms, reshaped to
// the sqrt(G) grid, bicubic-upsampled, per-pixel class softmax.
std::array<Matrix, 2> segmentation_map(const Matrix& o_seg, const PromptSet& p_normal,
                                       const PromptSet& p_abnormal, const ScoringConfig& cfg,
                                       int out_h, int out_w);

struct Aggregate {
    double ac_score = 0.0;
    Matrix as_map;
};

// Mean over levels of c_total[abnormal] and of the abnormal maps.
Aggregate aggregate_inference(std::span<const LevelScores> levels,
                              std::span<const Matrix> abnormal_maps);

// ---- tape builders (shared by the plain API above and the training loop) ----
namespace build {

// Optional transport-plan capture/replay in graph construction order. Replay
// bypasses the solver entirely; used by gradient checks to hold T* fixed.
struct PlanSource {
    const std::vector<Matrix>* replay = nullptr;
    std::vector<Matrix>* record = nullptr;
    std::size_t idx = 0;
};

struct PotScore {
    ad::Var p_abnormal;           // 1x1, sigma of the logit difference
    ad::Var dis_normal, dis_abnormal;
    TransportPlan plan_normal, plan_abnormal;
};

// o_hat: G x d with unit rows; p_rows: K x d with unit rows.
PotScore pot_score(ad::Tape& t, ad::Var o_hat, ad::Var p_normal_rows, ad::Var p_abnormal_rows,
                   const ScoringConfig& cfg, PlanSource* plans = nullptr);

// 1x1: mean over patches of the per-patch abnormal probability.
ad::Var cl_score_abnormal(ad::Tape& t, ad::Var o_hat, ad::Var fused_normal_hat,
                          ad::Var fused_abnormal_hat, double tau);

struct SegMap {
    ad::Var map_abnormal;  // out_h x out_w
    std::array<TransportPlan, 2> plans;
};

SegMap seg_map(ad::Tape& t, ad::Var o_hat, ad::Var p_normal_rows, ad::Var p_abnormal_rows,
               ad::Var fused_normal_hat, ad::Var fused_abnormal_hat, const ScoringConfig& cfg,
               int grid_side, int out_h, int out_w, PlanSource* plans = nullptr);

}  // namespace build

}  // namespace madpot
