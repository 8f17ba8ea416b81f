#include "madpot/autodiff.hpp"

#include <cmath>
#include <utility>

#include "madpot/errors.hpp"
#include "madpot/losses.hpp"
#include "madpot/numkit.hpp"

namespace madpot::ad {

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> back) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) {
        node.grad = Matrix(node.value.rows, node.value.cols, 0.0);
        node.back = std::move(back);
    }
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    Matrix& dst = grad_mut(v);
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::matmul(Var a, Var b) {
    Matrix out = madpot::matmul(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, b, result](Tape& t) {
        const Matrix& g = t.grad(result);
        if (t.requires_grad(a)) t.accumulate(a, madpot::matmul_nt(g, t.val(b)));
        if (t.requires_grad(b)) t.accumulate(b, madpot::matmul_tn(t.val(a), g));
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    Matrix out = madpot::matmul_nt(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, b, result](Tape& t) {
        const Matrix& g = t.grad(result);  // dA = G*B, dB = G^T*A
        if (t.requires_grad(a)) t.accumulate(a, madpot::matmul(g, t.val(b)));
        if (t.requires_grad(b)) t.accumulate(b, madpot::matmul_tn(g, t.val(a)));
    });
}

Var Tape::add(Var a, Var b) { return add_scaled(a, b, 1.0, 1.0); }

Var Tape::add_scaled(Var a, Var b, double ca, double cb) {
    Matrix out = madpot::add_scaled(val(a), val(b), ca, cb);
    const bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, b, ca, cb, result](Tape& t) {
        const Matrix& g = t.grad(result);
        if (t.requires_grad(a)) t.accumulate(a, madpot::affine(g, ca, 0.0));
        if (t.requires_grad(b)) t.accumulate(b, madpot::affine(g, cb, 0.0));
    });
}

Var Tape::affine(Var a, double scale, double shift) {
    Matrix out = madpot::affine(val(a), scale, shift);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, scale, result](Tape& t) {
        t.accumulate(a, madpot::affine(t.grad(result), scale, 0.0));
    });
}

Var Tape::hadamard_const(Var a, Matrix k) {
    Matrix out = madpot::hadamard(val(a), k);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, k = std::move(k), result](Tape& t) {
        t.accumulate(a, madpot::hadamard(t.grad(result), k));
    });
}

Var Tape::relu(Var a) {
    Matrix out = val(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& x = t.val(a);
        Matrix d(g.rows, g.cols);
        // subgradient at 0 is 0
        for (std::size_t i = 0; i < g.size(); ++i) d.data[i] = x.data[i] > 0.0 ? g.data[i] : 0.0;
        t.accumulate(a, d);
    });
}

Var Tape::tanh(Var a) {
    Matrix out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& y = t.val(result);
        Matrix d(g.rows, g.cols);
        for (std::size_t i = 0; i < g.size(); ++i)
            d.data[i] = g.data[i] * (1.0 - y.data[i] * y.data[i]);
        t.accumulate(a, d);
    });
}

Var Tape::l2_normalize_rows(Var a) {
    Matrix out = madpot::l2_normalize_rows(val(a));
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& x = t.val(a);
        const Matrix& y = t.val(result);  // normalized rows
        Matrix d(g.rows, g.cols, 0.0);
        for (int r = 0; r < x.rows; ++r) {
            double norm_sq = 0.0;
            for (int c = 0; c < x.cols; ++c) norm_sq += x(r, c) * x(r, c);
            if (norm_sq == 0.0) continue;  // zero rows: zero gradient
            const double inv_norm = 1.0 / std::sqrt(norm_sq);
            double dot = 0.0;
            for (int c = 0; c < x.cols; ++c) dot += g(r, c) * y(r, c);
            for (int c = 0; c < x.cols; ++c) d(r, c) = (g(r, c) - dot * y(r, c)) * inv_norm;
        }
        t.accumulate(a, d);
    });
}

Var Tape::slice_rows(Var a, int r0, int r1) {
    const Matrix& x = val(a);
    if (r0 < 0 || r1 > x.rows || r0 >= r1) throw ShapeError("slice_rows: bad range");
    Matrix out(r1 - r0, x.cols);
    for (int r = r0; r < r1; ++r)
        for (int c = 0; c < x.cols; ++c) out(r - r0, c) = x(r, c);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, r0, result](Tape& t) {
        const Matrix& g = t.grad(result);
        Matrix d(t.val(a).rows, t.val(a).cols, 0.0);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) d(r0 + r, c) = g(r, c);
        t.accumulate(a, d);
    });
}

Var Tape::vstack(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("vstack: empty input");
    int rows = 0;
    const int cols = val(parts[0]).cols;
    bool rg = false;
    for (Var p : parts) {
        if (val(p).cols != cols) throw ShapeError("vstack: column counts differ");
        rows += val(p).rows;
        rg = rg || requires_grad(p);
    }
    Matrix out(rows, cols);
    int at = 0;
    for (Var p : parts) {
        const Matrix& x = val(p);
        for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < cols; ++c) out(at + r, c) = x(r, c);
        at += x.rows;
    }
    if (!rg) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [parts, result](Tape& t) {
        const Matrix& g = t.grad(result);
        int at = 0;
        for (Var p : parts) {
            const int pr = t.val(p).rows;
            if (t.requires_grad(p)) {
                Matrix d(pr, g.cols);
                for (int r = 0; r < pr; ++r)
                    for (int c = 0; c < g.cols; ++c) d(r, c) = g(at + r, c);
                t.accumulate(p, d);
            }
            at += pr;
        }
    });
}

Var Tape::mean_rows(Var a) {
    const Matrix& x = val(a);
    Matrix out(1, x.cols, 0.0);
    for (int r = 0; r < x.rows; ++r)
        for (int c = 0; c < x.cols; ++c) out(0, c) += x(r, c);
    for (double& v : out.data) v /= static_cast<double>(x.rows);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& x = t.val(a);
        const double inv = 1.0 / static_cast<double>(x.rows);
        Matrix d(x.rows, x.cols);
        for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < x.cols; ++c) d(r, c) = g(0, c) * inv;
        t.accumulate(a, d);
    });
}

Var Tape::row_sums(Var a) {
    const Matrix& x = val(a);
    Matrix out(x.rows, 1, 0.0);
    for (int r = 0; r < x.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < x.cols; ++c) acc += x(r, c);
        out(r, 0) = acc;
    }
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& x = t.val(a);
        Matrix d(x.rows, x.cols);
        for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < x.cols; ++c) d(r, c) = g(r, 0);
        t.accumulate(a, d);
    });
}

Var Tape::sum_all(Var a) {
    Matrix out(1, 1, madpot::sum(val(a)));
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const double g = t.grad(result).data[0];
        const Matrix& x = t.val(a);
        t.accumulate(a, Matrix(x.rows, x.cols, g));
    });
}

Var Tape::mean_all(Var a) {
    const double n = static_cast<double>(val(a).size());
    Matrix out(1, 1, madpot::sum(val(a)) / n);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, n, result](Tape& t) {
        const double g = t.grad(result).data[0] / n;
        const Matrix& x = t.val(a);
        t.accumulate(a, Matrix(x.rows, x.cols, g));
    });
}

Var Tape::reshape(Var a, int r, int c) {
    const Matrix& x = val(a);
    if (static_cast<std::size_t>(r) * static_cast<std::size_t>(c) != x.size())
        throw ShapeError("reshape: element count changes");
    Matrix out(r, c);
    out.data = x.data;
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& x = t.val(a);
        Matrix d(x.rows, x.cols);
        d.data = g.data;
        t.accumulate(a, d);
    });
}

Var Tape::sigmoid_diff(Var a, Var b, double tau) {
    const Matrix& xa = val(a);
    const Matrix& xb = val(b);
    if (!xa.same_shape(xb)) throw ShapeError("sigmoid_diff: shapes differ");
    Matrix out(xa.rows, xa.cols);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double z = (xa.data[i] - xb.data[i]) / tau;
        out.data[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    const bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, b, tau, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const Matrix& s = t.val(result);
        Matrix d(g.rows, g.cols);
        for (std::size_t i = 0; i < g.size(); ++i)
            d.data[i] = g.data[i] * s.data[i] * (1.0 - s.data[i]) / tau;
        if (t.requires_grad(a)) t.accumulate(a, d);
        if (t.requires_grad(b)) {
            for (double& v : d.data) v = -v;
            t.accumulate(b, d);
        }
    });
}

namespace {

inline int clamp_idx(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

Matrix apply_mix3x3(const Matrix& x, int gs, const std::array<double, 9>& w, bool adjoint) {
    Matrix out(x.rows, x.cols, 0.0);
    for (int r = 0; r < gs; ++r) {
        for (int c = 0; c < gs; ++c) {
            const int cell = r * gs + c;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const double wt = w[static_cast<std::size_t>((dr + 1) * 3 + (dc + 1))];
                    const int src = clamp_idx(r + dr, gs - 1) * gs + clamp_idx(c + dc, gs - 1);
                    // adjoint scatters instead of gathering
                    const int from = adjoint ? cell : src;
                    const int to = adjoint ? src : cell;
                    const double* xrow = x.row(from);
                    double* orow = out.row(to);
                    for (int k = 0; k < x.cols; ++k) orow[k] += wt * xrow[k];
                }
            }
        }
    }
    return out;
}

}  // namespace

Var Tape::mix3x3(Var a, int grid_side, const std::array<double, 9>& w) {
    const Matrix& x = val(a);
    if (x.rows != grid_side * grid_side) throw ShapeError("mix3x3: rows != grid_side^2");
    Matrix out = apply_mix3x3(x, grid_side, w, /*adjoint=*/false);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, grid_side, w, result](Tape& t) {
        t.accumulate(a, apply_mix3x3(t.grad(result), grid_side, w, /*adjoint=*/true));
    });
}

Var Tape::bicubic(Var a, int out_h, int out_w) {
    Matrix out = madpot::bicubic_resize(val(a), out_h, out_w);
    if (!requires_grad(a)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [a, out_h, out_w, result](Tape& t) {
        const Matrix& g = t.grad(result);
        const int s = t.val(a).rows;
        Matrix d(s, s, 0.0);
        std::vector<CubicTaps> col_taps(static_cast<std::size_t>(out_w));
        for (int j = 0; j < out_w; ++j)
            col_taps[static_cast<std::size_t>(j)] =
                catmull_rom_taps(align_corners_coord(j, out_w, s), s);
        for (int i = 0; i < out_h; ++i) {
            const CubicTaps ty = catmull_rom_taps(align_corners_coord(i, out_h, s), s);
            for (int j = 0; j < out_w; ++j) {
                const CubicTaps& tx = col_taps[static_cast<std::size_t>(j)];
                const double gij = g(i, j);
                if (gij == 0.0) continue;
                for (int u = 0; u < 4; ++u)
                    for (int v = 0; v < 4; ++v)
                        d(ty.idx[u], tx.idx[v]) += ty.w[u] * tx.w[v] * gij;
            }
        }
        t.accumulate(a, d);
    });
}

Var Tape::gdice_loss(Var pred_abnormal, Matrix mask) {
    const Matrix pred_normal = madpot::affine(val(pred_abnormal), -1.0, 1.0);
    Matrix out(1, 1, madpot::gdice(pred_normal, val(pred_abnormal), mask));
    if (!requires_grad(pred_abnormal)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [pred_abnormal, mask = std::move(mask), result](Tape& t) {
        const double g = t.grad(result).data[0];
        Matrix d = madpot::gdice_grad_abnormal(t.val(pred_abnormal), mask);
        for (double& v : d.data) v *= g;
        t.accumulate(pred_abnormal, d);
    });
}

Var Tape::focal_loss(Var pred_abnormal, Matrix mask) {
    Matrix out(1, 1, madpot::focal(val(pred_abnormal), mask));
    if (!requires_grad(pred_abnormal)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [pred_abnormal, mask = std::move(mask), result](Tape& t) {
        const double g = t.grad(result).data[0];
        Matrix d = madpot::focal_grad(t.val(pred_abnormal), mask);
        for (double& v : d.data) v *= g;
        t.accumulate(pred_abnormal, d);
    });
}

Var Tape::bce_loss(Var pred_abnormal_scalar, int y_abnormal) {
    const double p = scalar(pred_abnormal_scalar);
    Matrix out(1, 1, madpot::bce(p, y_abnormal));
    if (!requires_grad(pred_abnormal_scalar)) return push(std::move(out), false, nullptr);
    Var result{static_cast<int>(nodes_.size())};
    return push(std::move(out), true, [pred_abnormal_scalar, y_abnormal, result](Tape& t) {
        const double g = t.grad(result).data[0];
        Matrix d(1, 1, g * madpot::bce_grad(t.scalar(pred_abnormal_scalar), y_abnormal));
        t.accumulate(pred_abnormal_scalar, d);
    });
}

void Tape::backward(Var scalar_output) {
    Node& out = nodes_[static_cast<std::size_t>(scalar_output.id)];
    if (out.value.size() != 1) throw ShapeError("backward: output must be scalar");
    if (!out.requires_grad) return;  // nothing trainable in the graph
    out.grad.data[0] = 1.0;
    for (int i = scalar_output.id; i >= 0; --i) {
        Node& node = nodes_[static_cast<std::size_t>(i)];
        if (node.requires_grad && node.back) node.back(*this);
    }
}

}  // namespace madpot::ad
