#pragma once

#include <array>
#include <functional>
#include <vector>

#include "madpot/matrix.hpp"

namespace madpot::ad {

// Handle into a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Minimal eager reverse-mode tape over Matrix values. Scalars are 1x1
// matrices. Nodes whose inputs all lack gradients skip closure creation, so
// constant-only subgraphs (inference) cost a plain forward pass.
//
// The transport plans entering the loss are deliberately tape constants: the
// outer optimization never differentiates through the inner transport solve.
class Tape {
public:
    Var constant(Matrix value);
    Var param(Matrix value);

    const Matrix& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
    double scalar(Var v) const { return val(v).data[0]; }

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);  // A * B^T
    Var add(Var a, Var b);
    Var add_scaled(Var a, Var b, double ca, double cb);
    Var affine(Var a, double scale, double shift);
    Var hadamard_const(Var a, Matrix k);
    Var relu(Var a);
    Var tanh(Var a);
    Var l2_normalize_rows(Var a);
    Var slice_rows(Var a, int r0, int r1);  // rows [r0, r1)
    Var vstack(const std::vector<Var>& parts);
    Var mean_rows(Var a);  // 1 x cols
    Var row_sums(Var a);   // rows x 1
    Var sum_all(Var a);    // 1 x 1
    Var mean_all(Var a);   // 1 x 1
    Var reshape(Var a, int r, int c);
    // Elementwise sigma((a - b) / tau): the two-class softmax probability of
    // the first argument's class.
    Var sigmoid_diff(Var a, Var b, double tau);
    // 3x3 edge-clamped stencil over the patch grid; rows of `a` are grid cells
    // in row-major order, features along columns.
    Var mix3x3(Var a, int grid_side, const std::array<double, 9>& w);
    Var bicubic(Var a, int out_h, int out_w);
    Var gdice_loss(Var pred_abnormal, Matrix mask);
    Var focal_loss(Var pred_abnormal, Matrix mask);
    Var bce_loss(Var pred_abnormal_scalar, int y_abnormal);

    // Seeds d(out)/d(out) = 1 and accumulates gradients into every param node.
    void backward(Var scalar_output);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;
    };

    std::vector<Node> nodes_;

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> back);
    Matrix& grad_mut(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    void accumulate(Var v, const Matrix& g);
};

}  // namespace madpot::ad
