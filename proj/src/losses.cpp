#include "madpot/losses.hpp"

#include <algorithm>
#include <cmath>

#include "madpot/errors.hpp"

namespace madpot {

namespace {

struct GdiceTerms {
    double w_n = 0.0, w_ab = 0.0;  // inverse-square-volume class weights
    double num = 0.0, den = 0.0;
};

GdiceTerms gdice_terms(const Matrix& pred_normal, const Matrix& pred_abnormal, const Matrix& mask,
                       double eps) {
    GdiceTerms t;
    double r_ab = 0.0;
    for (double v : mask.data) r_ab += v;
    const double r_n = static_cast<double>(mask.size()) - r_ab;
    t.w_n = 1.0 / (r_n * r_n + eps);
    t.w_ab = 1.0 / (r_ab * r_ab + eps);
    double inter_n = 0.0, inter_ab = 0.0, tot_n = 0.0, tot_ab = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double m = mask.data[i];
        inter_ab += m * pred_abnormal.data[i];
        inter_n += (1.0 - m) * pred_normal.data[i];
        tot_ab += m + pred_abnormal.data[i];
        tot_n += (1.0 - m) + pred_normal.data[i];
    }
    t.num = t.w_n * inter_n + t.w_ab * inter_ab;
    t.den = t.w_n * tot_n + t.w_ab * tot_ab;
    return t;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

double gdice(const Matrix& pred_normal, const Matrix& pred_abnormal, const Matrix& mask,
             double eps) {
    if (!pred_normal.same_shape(mask) || !pred_abnormal.same_shape(mask))
        throw ShapeError("gdice: prediction and mask shapes differ");
    const GdiceTerms t = gdice_terms(pred_normal, pred_abnormal, mask, eps);
    return 1.0 - 2.0 * (t.num + eps) / (t.den + eps);
}

Matrix gdice_grad_abnormal(const Matrix& pred_abnormal, const Matrix& mask, double eps) {
    Matrix pred_normal = affine(pred_abnormal, -1.0, 1.0);
    const GdiceTerms t = gdice_terms(pred_normal, pred_abnormal, mask, eps);
    const double den_e = t.den + eps;
    const double num_e = t.num + eps;
    // L = 1 - 2(num+eps)/(den+eps); per pixel dnum/dp_ab = w_ab*m - w_n*(1-m),
    // dden/dp_ab = w_ab - w_n (the normal map is 1 - p_ab).
    const double dden = t.w_ab - t.w_n;
    Matrix g(mask.rows, mask.cols);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double m = mask.data[i];
        const double dnum = t.w_ab * m - t.w_n * (1.0 - m);
        g.data[i] = -2.0 * (dnum * den_e - num_e * dden) / (den_e * den_e);
    }
    return g;
}

double focal(const Matrix& pred_abnormal, const Matrix& mask, double gamma_f, double alpha_f) {
    if (!pred_abnormal.same_shape(mask)) throw ShapeError("focal: prediction and mask shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double y = mask.data[i];
        const double p = clamp_prob(pred_abnormal.data[i]);
        const double pt = (y > 0.5) ? p : 1.0 - p;
        const double at = (y > 0.5) ? alpha_f : 1.0 - alpha_f;
        acc += -at * std::pow(1.0 - pt, gamma_f) * std::log(pt);
    }
    return acc / static_cast<double>(mask.size());
}

Matrix focal_grad(const Matrix& pred_abnormal, const Matrix& mask, double gamma_f, double alpha_f) {
    if (!pred_abnormal.same_shape(mask)) throw ShapeError("focal: prediction and mask shapes differ");
    const double inv_n = 1.0 / static_cast<double>(mask.size());
    Matrix g(mask.rows, mask.cols);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double raw = pred_abnormal.data[i];
        if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) {
            g.data[i] = 0.0;  // clamped region
            continue;
        }
        const double y = mask.data[i];
        const double pt = (y > 0.5) ? raw : 1.0 - raw;
        const double at = (y > 0.5) ? alpha_f : 1.0 - alpha_f;
        const double one_m = 1.0 - pt;
        double dldpt;
        if (gamma_f == 0.0) {
            dldpt = -at / pt;
        } else {
            dldpt = -at * (-gamma_f * std::pow(one_m, gamma_f - 1.0) * std::log(pt) +
                           std::pow(one_m, gamma_f) / pt);
        }
        g.data[i] = inv_n * ((y > 0.5) ? dldpt : -dldpt);
    }
    return g;
}

double bce(double pred_abnormal, int y_abnormal) {
    const double p = clamp_prob(pred_abnormal);
    return (y_abnormal != 0) ? -std::log(p) : -std::log(1.0 - p);
}

double bce_grad(double pred_abnormal, int y_abnormal) {
    if (pred_abnormal <= kProbClamp || pred_abnormal >= 1.0 - kProbClamp) return 0.0;
    return (y_abnormal != 0) ? -1.0 / pred_abnormal : 1.0 / (1.0 - pred_abnormal);
}

double total_loss(std::span<const LevelPrediction> levels, const LossSample& sample,
                  const LossWeights& weights) {
    const int y_abnormal = sample.label == 0 ? 1 : 0;
    double acc = 0.0;
    for (const LevelPrediction& lvl : levels) {
        if (sample.mask.has_value()) {
            acc += weights.w_gdice * gdice(lvl.map_normal, lvl.map_abnormal, *sample.mask);
            acc += weights.w_focal * focal(lvl.map_abnormal, *sample.mask);
        }
        acc += weights.w_bce * bce(lvl.p_abnormal, y_abnormal);
    }
    return acc;
}

}  // namespace madpot
