#pragma once

#include <optional>
#include <span>

#include "madpot/matrix.hpp"

namespace madpot {

struct LossWeights {
    double w_gdice = 1.0;
    double w_focal = 1.0;
    double w_bce = 1.0;
};

inline constexpr double kGdiceEps = 1e-5;
inline constexpr double kProbClamp = 1e-7;
inline constexpr double kFocalGamma = 2.0;
inline constexpr double kFocalAlpha = 0.25;

// Generalized Dice over the {normal, abnormal} class pair with
// inverse-square-volume class weights and a single smoothing epsilon on the
// numerator and denominator.
double gdice(const Matrix& pred_normal, const Matrix& pred_abnormal, const Matrix& mask,
             double eps = kGdiceEps);
// Gradient w.r.t. the abnormal map when pred_normal == 1 - pred_abnormal.
Matrix gdice_grad_abnormal(const Matrix& pred_abnormal, const Matrix& mask,
                           double eps = kGdiceEps);

// Mean per-pixel focal loss on the abnormal-probability map. Predictions are
// clamped to [kProbClamp, 1 - kProbClamp]; gradients vanish where clamped.
double focal(const Matrix& pred_abnormal, const Matrix& mask, double gamma_f = kFocalGamma,
             double alpha_f = kFocalAlpha);
Matrix focal_grad(const Matrix& pred_abnormal, const Matrix& mask, double gamma_f = kFocalGamma,
                  double alpha_f = kFocalAlpha);

// Binary cross-entropy on a clamped scalar probability; y = 1 means abnormal.
double bce(double pred_abnormal, int y_abnormal);
double bce_grad(double pred_abnormal, int y_abnormal);

// One feature level's predictions as consumed by the loss. p_abnormal is the
// image-level abnormal probability fed to BCE.
struct LevelPrediction {
    Matrix map_normal;
    Matrix map_abnormal;
    double p_abnormal = 0.5;
};

struct LossSample {
    int label = 1;  // 1 normal, 0 abnormal (paper convention; flipped internally)
    std::optional<Matrix> mask;
};

// Sum over levels of w1*gdice + w2*focal + w3*bce; mask-based terms are zero
// when the sample has no mask.
double total_loss(std::span<const LevelPrediction> levels, const LossSample& sample,
                  const LossWeights& weights);

}  // namespace madpot
