#include "madpot/numkit.hpp"

#include <algorithm>
#include <cmath>

#include "madpot/errors.hpp"

namespace madpot {

std::vector<double> softmax(std::span<const double> logits, double tau) {
    if (tau <= 0.0) throw InvalidInputError("softmax: tau must be positive");
    if (logits.empty()) throw InvalidInputError("softmax: empty input");
    double mx = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw InvalidInputError("softmax: non-finite logit");
        mx = std::max(mx, v);
    }
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / tau);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (int r = 0; r < m.rows; ++r) {
        double sq = 0.0;
        const double* src = m.row(r);
        for (int c = 0; c < m.cols; ++c) sq += src[c] * src[c];
        if (sq == 0.0) continue;  // zero rows pass through
        const double inv = 1.0 / std::sqrt(sq);
        double* dst = out.row(r);
        for (int c = 0; c < m.cols; ++c) dst[c] *= inv;
    }
    return out;
}

Matrix cosine_cost(const Matrix& o, const Matrix& p) {
    if (o.cols != p.cols) throw ShapeError("cosine_cost: feature dimensions differ");
    if (o.cols < 1) throw ShapeError("cosine_cost: empty feature dimension");
    const Matrix oh = l2_normalize_rows(o);
    const Matrix ph = l2_normalize_rows(p);
    Matrix c = matmul_nt(oh, ph);
    for (double& v : c.data) v = 1.0 - v;
    return c;
}

double align_corners_coord(int i, int out_extent, int in_extent) {
    if (out_extent <= 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in_extent - 1) /
           static_cast<double>(out_extent - 1);
}

namespace {

// Catmull-Rom kernel, a = -0.5.
double cubic_weight(double t) {
    t = std::abs(t);
    if (t <= 1.0) return ((1.5 * t - 2.5) * t) * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

}  // namespace

CubicTaps catmull_rom_taps(double x, int extent) {
    CubicTaps taps;
    const int base = static_cast<int>(std::floor(x));
    for (int k = 0; k < 4; ++k) {
        const int raw = base - 1 + k;
        taps.idx[k] = std::clamp(raw, 0, extent - 1);
        taps.w[k] = cubic_weight(x - static_cast<double>(raw));
    }
    return taps;
}

Matrix bicubic_resize(const Matrix& grid, int out_h, int out_w) {
    if (grid.rows != grid.cols || grid.rows < 2)
        throw InvalidInputError("bicubic_resize: input must be square with side >= 2");
    if (out_h < 1 || out_w < 1) throw InvalidInputError("bicubic_resize: empty output");
    const int s = grid.rows;
    std::vector<CubicTaps> col_taps(static_cast<std::size_t>(out_w));
    for (int j = 0; j < out_w; ++j)
        col_taps[static_cast<std::size_t>(j)] = catmull_rom_taps(align_corners_coord(j, out_w, s), s);
    Matrix out(out_h, out_w);
    for (int i = 0; i < out_h; ++i) {
        const CubicTaps ty = catmull_rom_taps(align_corners_coord(i, out_h, s), s);
        for (int j = 0; j < out_w; ++j) {
            const CubicTaps& tx = col_taps[static_cast<std::size_t>(j)];
            double acc = 0.0;
            for (int u = 0; u < 4; ++u) {
                const double* srow = grid.row(ty.idx[u]);
                double racc = 0.0;
                for (int v = 0; v < 4; ++v) racc += tx.w[v] * srow[tx.idx[v]];
                acc += ty.w[u] * racc;
            }
            out(i, j) = acc;
        }
    }
    return out;
}

}  // namespace madpot
