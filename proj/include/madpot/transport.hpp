#pragma once

#include <vector>

#include "madpot/matrix.hpp"

namespace madpot {

struct Histogram {
    std::vector<double> weights;

    Histogram() = default;
    explicit Histogram(std::vector<double> w) : weights(std::move(w)) {}
    static Histogram uniform(int n, double mass);

    int size() const { return static_cast<int>(weights.size()); }
    double total_mass() const;
};

struct SolverConfig {
    double lambda = 0.1;          // entropic regularization weight
    int max_iter = 100;
    double early_stop_tol = 1e-3; // max-norm change of the scaling vectors
    double frac = 0.8;            // transported mass ratio for partial OT
};

struct TransportPlan {
    Matrix plan;
    int iterations = 0;
    bool converged = false;
    double row_residual = 0.0;  // max-norm row constraint violation
    double col_residual = 0.0;  // max-norm column constraint violation
};

// Entropic OT by alternating diagonal scaling of exp(-C/lambda).
// Requires matching total masses and strictly positive weights.
TransportPlan sinkhorn(const Matrix& c, const Histogram& alpha, const Histogram& beta,
                       const SolverConfig& cfg);

// Entropic partial OT: column marginals hit beta exactly, row sums stay <= alpha.
// Dykstra alternation of KL projections on exp(-C/lambda); the inequality (row)
// projection keeps a multiplicative correction, the affine column projection
// needs none. Requires beta mass == frac * alpha mass.
TransportPlan partial_ot(const Matrix& c, const Histogram& alpha, const Histogram& beta,
                         const SolverConfig& cfg);

struct LpSolution {
    Matrix plan;
    double cost = 0.0;
    int pivots = 0;
};

// Exact LP ground truth for test-sized instances (n, m <= 6). frac < 1 adds a
// zero-cost virtual sink column absorbing the unshipped row mass, then solves
// the balanced problem; the sink column is dropped from the returned plan.
LpSolution exact_lp_oracle(const Matrix& c, const Histogram& alpha, const Histogram& beta,
                           double frac);

// dis = C (Hadamard) T.
Matrix transport_distance(const Matrix& c, const Matrix& plan);
Matrix transport_distance(const Matrix& c, const TransportPlan& t);

}  // namespace madpot
