#pragma once

#include <span>
#include <vector>

#include "madpot/matrix.hpp"

namespace madpot {

// Numerically stable softmax of logits/tau (max-subtraction). Output sums to 1.
std::vector<double> softmax(std::span<const double> logits, double tau);

// Each nonzero row scaled to unit Euclidean norm; zero rows pass through
// unchanged (degenerate features then cost exactly 1 against everything).
Matrix l2_normalize_rows(const Matrix& m);

// C[g][k] = 1 - <o_g / |o_g|, p_k / |p_k|>, entries in [0, 2].
Matrix cosine_cost(const Matrix& o, const Matrix& p);

// Oneibicubic sample: the four source indices (edge-clamped) and Catmull-Rom
// weights (a = -0.5) for continuous coordinate x over an extent of n samples.
struct CubicTaps {
    int idx[4];
    double w[4];
};
CubicTaps catmull_rom_taps(double x, int extent);

// align-corners coordinate mapping; out_extent == 1 maps to 0.
double align_corners_coord(int i, int out_extent, int in_extent);

// Catmull-Rom bicubic resize of a square grid (edge-clamped, align-corners).
Matrix bicubic_resize(const Matrix& grid, int out_h, int out_w);

}  // namespace madpot
