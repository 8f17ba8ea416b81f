#include "madpot/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "madpot/errors.hpp"

namespace madpot {

Histogram Histogram::uniform(int n, double mass) {
    if (n < 1) throw InvalidInputError("Histogram::uniform: n must be >= 1");
    return Histogram(std::vector<double>(static_cast<std::size_t>(n), mass / n));
}

double Histogram::total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

namespace {

constexpr double kMassTol = 1e-9;

void check_problem(const Matrix& c, const Histogram& alpha, const Histogram& beta) {
    if (c.rows != alpha.size() || c.cols != beta.size())
        throw ShapeError("transport: cost shape does not match marginals");
    if (!c.all_finite()) throw InvalidInputError("transport: non-finite cost entry");
    for (double w : alpha.weights)
        if (!(w > 0.0)) throw InvalidInputError("transport: marginal weights must be positive");
    for (double w : beta.weights)
        if (!(w > 0.0)) throw InvalidInputError("transport: marginal weights must be positive");
}

Matrix gibbs_kernel(const Matrix& c, double lambda) {
    if (!(lambda > 0.0)) throw InvalidInputError("transport: lambda must be positive");
    Matrix k(c.rows, c.cols);
    for (std::size_t i = 0; i < c.size(); ++i) k.data[i] = std::exp(-c.data[i] / lambda);
    for (int i = 0; i < k.rows; ++i) {
        double mx = 0.0;
        for (int j = 0; j < k.cols; ++j) mx = std::max(mx, k(i, j));
        if (mx == 0.0)
            throw NumericalError("transport: kernel row underflowed to zero; increase lambda");
    }
    for (int j = 0; j < k.cols; ++j) {
        double mx = 0.0;
        for (int i = 0; i < k.rows; ++i) mx = std::max(mx, k(i, j));
        if (mx == 0.0)
            throw NumericalError("transport: kernel column underflowed to zero; increase lambda");
    }
    return k;
}

std::vector<double> mat_vec(const Matrix& k, const std::vector<double>& v) {
    std::vector<double> out(static_cast<std::size_t>(k.rows), 0.0);
    for (int i = 0; i < k.rows; ++i) {
        const double* row = k.row(i);
        double acc = 0.0;
        for (int j = 0; j < k.cols; ++j) acc += row[j] * v[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

std::vector<double> mat_tvec(const Matrix& k, const std::vector<double>& u) {
    std::vector<double> out(static_cast<std::size_t>(k.cols), 0.0);
    for (int i = 0; i < k.rows; ++i) {
        const double* row = k.row(i);
        const double ui = u[static_cast<std::size_t>(i)];
        for (int j = 0; j < k.cols; ++j) out[static_cast<std::size_t>(j)] += row[j] * ui;
    }
    return out;
}

double max_change(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Matrix scaled_plan(const Matrix& k, const std::vector<double>& u, const std::vector<double>& v) {
    Matrix t(k.rows, k.cols);
    for (int i = 0; i < k.rows; ++i) {
        const double ui = u[static_cast<std::size_t>(i)];
        const double* krow = k.row(i);
        double* trow = t.row(i);
        for (int j = 0; j < k.cols; ++j) trow[j] = ui * krow[j] * v[static_cast<std::size_t>(j)];
    }
    return t;
}

void marginal_residuals(const Matrix& t, const Histogram& alpha, const Histogram& beta,
                        bool row_inequality, double* row_res, double* col_res) {
    double rr = 0.0;
    for (int i = 0; i < t.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < t.cols; ++j) s += t(i, j);
        const double d = s - alpha.weights[static_cast<std::size_t>(i)];
        rr = std::max(rr, row_inequality ? std::max(0.0, d) : std::abs(d));
    }
    double cr = 0.0;
    for (int j = 0; j < t.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < t.rows; ++i) s += t(i, j);
        cr = std::max(cr, std::abs(s - beta.weights[static_cast<std::size_t>(j)]));
    }
    *row_res = rr;
    *col_res = cr;
}

}  // namespace

TransportPlan sinkhorn(const Matrix& c, const Histogram& alpha, const Histogram& beta,
                       const SolverConfig& cfg) {
    check_problem(c, alpha, beta);
    if (cfg.max_iter < 1) throw InvalidInputError("sinkhorn: max_iter must be >= 1");
    if (std::abs(alpha.total_mass() - beta.total_mass()) > kMassTol)
        throw InfeasibleError("sinkhorn: marginal masses differ");

    const Matrix k = gibbs_kernel(c, cfg.lambda);
    const std::size_t n = static_cast<std::size_t>(c.rows);
    const std::size_t m = static_cast<std::size_t>(c.cols);
    std::vector<double> u(n, 1.0), v(m, 1.0);

    TransportPlan result;
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        const std::vector<double> u_prev = u;
        const std::vector<double> v_prev = v;
        const std::vector<double> kv = mat_vec(k, v);
        for (std::size_t i = 0; i < n; ++i) {
            if (kv[i] == 0.0) throw NumericalError("sinkhorn: zero row scaling; increase lambda");
            u[i] = alpha.weights[i] / kv[i];
        }
        const std::vector<double> ktu = mat_tvec(k, u);
        for (std::size_t j = 0; j < m; ++j) {
            if (ktu[j] == 0.0)
                throw NumericalError("sinkhorn: zero column scaling; increase lambda");
            v[j] = beta.weights[j] / ktu[j];
        }
        result.iterations = iter;
        if (iter > 1 &&
            std::max(max_change(u, u_prev), max_change(v, v_prev)) < cfg.early_stop_tol) {
            result.converged = true;
            break;
        }
    }
    result.plan = scaled_plan(k, u, v);
    marginal_residuals(result.plan, alpha, beta, /*row_inequality=*/false, &result.row_residual,
                       &result.col_residual);
    return result;
}

TransportPlan partial_ot(const Matrix& c, const Histogram& alpha, const Histogram& beta,
                         const SolverConfig& cfg) {
    check_problem(c, alpha, beta);
    if (cfg.max_iter < 1) throw InvalidInputError("partial_ot: max_iter must be >= 1");
    if (!(cfg.frac > 0.0) || cfg.frac > 1.0)
        throw InvalidInputError("partial_ot: frac must lie in (0, 1]");
    if (std::abs(beta.total_mass() - cfg.frac * alpha.total_mass()) > kMassTol)
        throw InfeasibleError("partial_ot: beta mass must equal frac * alpha mass");

    const Matrix k = gibbs_kernel(c, cfg.lambda);
    const std::size_t n = static_cast<std::size_t>(c.rows);
    const std::size_t m = static_cast<std::size_t>(c.cols);
    // T is maintained as diag(a) K diag(b); d carries the Dykstra correction
    // for the row-inequality set (row-constant, so a vector suffices).
    std::vector<double> a(n, 1.0), b(m, 1.0), d(n, 1.0);

    TransportPlan result;
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        const std::vector<double> a_prev = a;
        const std::vector<double> b_prev = b;
        // Column equality: scale columns so colsum(T) == beta.
        const std::vector<double> kta = mat_tvec(k, a);
        for (std::size_t j = 0; j < m; ++j) {
            if (kta[j] == 0.0)
                throw NumericalError("partial_ot: zero column scaling; increase lambda");
            b[j] = beta.weights[j] / kta[j];
        }
        // Row inequality with correction reapplied: shrink rows above alpha.
        const std::vector<double> kb = mat_vec(k, b);
        for (std::size_t i = 0; i < n; ++i) {
            const double y = a[i] * d[i] * kb[i];
            const double s = (y > 0.0) ? std::min(1.0, alpha.weights[i] / y) : 1.0;
            a[i] = a[i] * d[i] * s;
            d[i] = 1.0 / s;
        }
        result.iterations = iter;
        if (iter > 1 &&
            std::max(max_change(a, a_prev), max_change(b, b_prev)) < cfg.early_stop_tol) {
            result.converged = true;
            break;
        }
    }
    result.plan = scaled_plan(k, a, b);
    marginal_residuals(result.plan, alpha, beta, /*row_inequality=*/true, &result.row_residual,
                       &result.col_residual);
    return result;
}

namespace {

// Dense two-phase tableau simplex with Bland's rule, for the tiny exact
// transportation LPs the oracle sees. min c.x s.t. A x = b, x >= 0, b >= 0.
struct SimplexOut {
    std::vector<double> x;
    double cost = 0.0;
    int pivots = 0;
};

SimplexOut simplex_solve(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                         const std::vector<double>& cost) {
    const int ncon = static_cast<int>(a.size());
    const int nvar = static_cast<int>(cost.size());
    const int ntot = nvar + ncon;  // artificials appended
    constexpr double kEps = 1e-10;

    std::vector<std::vector<double>> tab(static_cast<std::size_t>(ncon),
                                         std::vector<double>(static_cast<std::size_t>(ntot) + 1, 0.0));
    std::vector<int> basis(static_cast<std::size_t>(ncon));
    for (int i = 0; i < ncon; ++i) {
        for (int j = 0; j < nvar; ++j) tab[i][static_cast<std::size_t>(j)] = a[i][static_cast<std::size_t>(j)];
        tab[i][static_cast<std::size_t>(nvar + i)] = 1.0;
        tab[i][static_cast<std::size_t>(ntot)] = b[static_cast<std::size_t>(i)];
        basis[static_cast<std::size_t>(i)] = nvar + i;
    }

    int pivots = 0;
    auto run_phase = [&](const std::vector<double>& cc, bool allow_artificial) {
        for (;;) {
            // Reduced costs from scratch each pivot: trivially cheap at this
            // size and immune to accumulation drift.
            int enter = -1;
            for (int j = 0; j < (allow_artificial ? ntot : nvar); ++j) {
                double rc = cc[static_cast<std::size_t>(j)];
                for (int i = 0; i < ncon; ++i)
                    rc -= cc[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])] *
                          tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (rc < -kEps) {
                    enter = j;  // Bland: first improving index
                    break;
                }
            }
            if (enter < 0) return;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < ncon; ++i) {
                const double aij = tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(enter)];
                if (aij > kEps) {
                    const double ratio =
                        tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(ntot)] / aij;
                    if (ratio < best - kEps ||
                        (ratio < best + kEps &&
                         (leave < 0 || basis[static_cast<std::size_t>(i)] <
                                           basis[static_cast<std::size_t>(leave)])))
                    {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) throw NumericalError("simplex: unbounded transportation LP");
            auto& prow = tab[static_cast<std::size_t>(leave)];
            const double piv = prow[static_cast<std::size_t>(enter)];
            for (double& v : prow) v /= piv;
            for (int i = 0; i < ncon; ++i) {
                if (i == leave) continue;
                auto& row = tab[static_cast<std::size_t>(i)];
                const double f = row[static_cast<std::size_t>(enter)];
                if (f == 0.0) continue;
                for (int j = 0; j <= ntot; ++j)
                    row[static_cast<std::size_t>(j)] -= f * prow[static_cast<std::size_t>(j)];
            }
            basis[static_cast<std::size_t>(leave)] = enter;
            ++pivots;
            if (pivots > 100000) throw NumericalError("simplex: pivot limit exceeded");
        }
    };

    std::vector<double> phase1(static_cast<std::size_t>(ntot), 0.0);
    for (int j = nvar; j < ntot; ++j) phase1[static_cast<std::size_t>(j)] = 1.0;
    run_phase(phase1, /*allow_artificial=*/true);
    double infeas = 0.0;
    for (int i = 0; i < ncon; ++i)
        if (basis[static_cast<std::size_t>(i)] >= nvar)
            infeas += tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(ntot)];
    if (infeas > 1e-8) throw InfeasibleError("simplex: transportation LP infeasible");

    // Drive leftover artificials out of the basis so phase-2 pivots cannot
    // revive them. An all-zero row (redundant constraint) is safe to keep.
    for (int i = 0; i < ncon; ++i) {
        if (basis[static_cast<std::size_t>(i)] < nvar) continue;
        auto& prow = tab[static_cast<std::size_t>(i)];
        int enter = -1;
        for (int j = 0; j < nvar; ++j) {
            if (std::abs(prow[static_cast<std::size_t>(j)]) > kEps) {
                enter = j;
                break;
            }
        }
        if (enter < 0) continue;
        const double piv = prow[static_cast<std::size_t>(enter)];
        for (double& v : prow) v /= piv;
        for (int r = 0; r < ncon; ++r) {
            if (r == i) continue;
            auto& row = tab[static_cast<std::size_t>(r)];
            const double f = row[static_cast<std::size_t>(enter)];
            if (f == 0.0) continue;
            for (int j = 0; j <= ntot; ++j)
                row[static_cast<std::size_t>(j)] -= f * prow[static_cast<std::size_t>(j)];
        }
        basis[static_cast<std::size_t>(i)] = enter;
        ++pivots;
    }

    std::vector<double> phase2(static_cast<std::size_t>(ntot), 0.0);
    for (int j = 0; j < nvar; ++j) phase2[static_cast<std::size_t>(j)] = cost[static_cast<std::size_t>(j)];
    run_phase(phase2, /*allow_artificial=*/false);

    SimplexOut out;
    out.x.assign(static_cast<std::size_t>(nvar), 0.0);
    for (int i = 0; i < ncon; ++i) {
        const int bi = basis[static_cast<std::size_t>(i)];
        if (bi < nvar)
            out.x[static_cast<std::size_t>(bi)] =
                std::max(0.0, tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(ntot)]);
    }
    for (int j = 0; j < nvar; ++j)
        out.cost += cost[static_cast<std::size_t>(j)] * out.x[static_cast<std::size_t>(j)];
    out.pivots = pivots;
    return out;
}

}  // namespace

LpSolution exact_lp_oracle(const Matrix& c, const Histogram& alpha, const Histogram& beta,
                           double frac) {
    check_problem(c, alpha, beta);
    if (c.rows > 6 || c.cols > 6)
        throw InvalidInputError("exact_lp_oracle: instances larger than 6x6 are not supported");
    if (!(frac > 0.0) || frac > 1.0)
        throw InvalidInputError("exact_lp_oracle: frac must lie in (0, 1]");
    const double sink_mass = alpha.total_mass() - beta.total_mass();
    if (std::abs(sink_mass - (1.0 - frac) * alpha.total_mass()) > kMassTol)
        throw InfeasibleError("exact_lp_oracle: beta mass must equal frac * alpha mass");

    const int n = c.rows;
    const bool with_sink = sink_mass > kMassTol;
    const int mm = c.cols + (with_sink ? 1 : 0);  // balanced column count

    const int nvar = n * mm;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (int i = 0; i < n; ++i) {  // row sums
        std::vector<double> row(static_cast<std::size_t>(nvar), 0.0);
        for (int j = 0; j < mm; ++j) row[static_cast<std::size_t>(i * mm + j)] = 1.0;
        a.push_back(std::move(row));
        b.push_back(alpha.weights[static_cast<std::size_t>(i)]);
    }
    for (int j = 0; j < mm; ++j) {  // column sums (incl. sink demand)
        std::vector<double> row(static_cast<std::size_t>(nvar), 0.0);
        for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i * mm + j)] = 1.0;
        a.push_back(std::move(row));
        b.push_back(j < c.cols ? beta.weights[static_cast<std::size_t>(j)] : sink_mass);
    }
    std::vector<double> cost(static_cast<std::size_t>(nvar), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.cols; ++j) cost[static_cast<std::size_t>(i * mm + j)] = c(i, j);

    const SimplexOut lp = simplex_solve(a, b, cost);

    LpSolution sol;
    sol.plan = Matrix(n, c.cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.cols; ++j) sol.plan(i, j) = lp.x[static_cast<std::size_t>(i * mm + j)];
    sol.cost = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c.cols; ++j) sol.cost += c(i, j) * sol.plan(i, j);
    sol.pivots = lp.pivots;
    return sol;
}

Matrix transport_distance(const Matrix& c, const Matrix& plan) {
    if (!c.same_shape(plan)) throw ShapeError("transport_distance: shapes differ");
    return hadamard(c, plan);
}

Matrix transport_distance(const Matrix& c, const TransportPlan& t) {
    return transport_distance(c, t.plan);
}

}  // namespace madpot
