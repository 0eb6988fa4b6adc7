#include "pdca/lp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pdca {

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::Optimal:
            return "Optimal";
        case LpStatus::Infeasible:
            return "Infeasible";
        case LpStatus::Unbounded:
            return "Unbounded";
    }
    return "Unknown";
}

namespace lp {
namespace {

constexpr double kReducedCostTol = 1e-10;
constexpr double kPivotTol = 1e-11;
constexpr int kMaxIterations = 100000;

struct Tableau {
    const Matrix<double>& A;
    const Vector<double>& b;
    const Vector<double>& c;
    std::vector<Index> basis;
    Index n_columns;  // columns eligible to enter
};

Matrix<double> basis_inverse(const Matrix<double>& A, const std::vector<Index>& basis) {
    Matrix<double> B(A.rows(), static_cast<Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) B.col(static_cast<Index>(i)) = A.col(basis[i]);
    Eigen::FullPivLU<Matrix<double>> lu(B);
    if (!lu.isInvertible()) throw InternalError("simplex basis became singular");
    return lu.inverse();
}

// Runs Bland's rule from a feasible basis. Returns Optimal or Unbounded.
LpStatus run_phase(Tableau& t, int& iterations) {
    const Index m = t.A.rows();
    std::vector<char> in_basis(static_cast<std::size_t>(t.A.cols()), 0);
    for (; iterations < kMaxIterations; ++iterations) {
        std::fill(in_basis.begin(), in_basis.end(), 0);
        for (Index j : t.basis) in_basis[static_cast<std::size_t>(j)] = 1;

        const Matrix<double> binv = basis_inverse(t.A, t.basis);
        Vector<double> x_basic = binv * t.b;
        Vector<double> c_basic(m);
        for (Index i = 0; i < m; ++i) c_basic(i) = t.c(t.basis[static_cast<std::size_t>(i)]);
        const Vector<double> y = binv.transpose() * c_basic;

        Index entering = -1;
        for (Index j = 0; j < t.n_columns; ++j) {
            if (in_basis[static_cast<std::size_t>(j)]) continue;
            if (t.c(j) - y.dot(t.A.col(j)) < -kReducedCostTol) {
                entering = j;
                break;
            }
        }
        if (entering < 0) return LpStatus::Optimal;

        const Vector<double> direction = binv * t.A.col(entering);
        Index leaving_row = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < m; ++i) {
            if (direction(i) <= kPivotTol) continue;
            const double ratio = std::max(x_basic(i), 0.0) / direction(i);
            if (leaving_row < 0 || ratio < best_ratio - 1e-14) {
                best_ratio = ratio;
                leaving_row = i;
            } else if (std::abs(ratio - best_ratio) <= 1e-14 &&
                       t.basis[static_cast<std::size_t>(i)] <
                           t.basis[static_cast<std::size_t>(leaving_row)]) {
                // Bland: among tied rows leave with the smallest variable index.
                leaving_row = i;
            }
        }
        if (leaving_row < 0) return LpStatus::Unbounded;
        t.basis[static_cast<std::size_t>(leaving_row)] = entering;
    }
    throw InternalError("simplex iteration limit reached");
}

}  // namespace

SimplexResult solve(const StandardForm& problem) {
    const Index m = problem.A.rows();
    const Index n = problem.A.cols();
    if (problem.b.size() != m || problem.c.size() != n)
        throw DimensionMismatch("linear program dimensions are inconsistent");

    SimplexResult result;

    // Phase one on [A | I] with nonnegative right-hand side.
    Matrix<double> a1(m, n + m);
    Vector<double> b1 = problem.b;
    Vector<double> row_sign = Vector<double>::Ones(m);
    a1.leftCols(n) = problem.A;
    a1.rightCols(m).setIdentity();
    for (Index i = 0; i < m; ++i) {
        if (b1(i) < 0) {
            row_sign(i) = -1;
            b1(i) = -b1(i);
            a1.row(i).head(n) *= -1;
        }
    }
    Vector<double> c1 = Vector<double>::Zero(n + m);
    c1.tail(m).setOnes();

    Tableau phase1{a1, b1, c1, {}, n + m};
    for (Index i = 0; i < m; ++i) phase1.basis.push_back(n + i);
    run_phase(phase1, result.iterations);

    {
        const Matrix<double> binv = basis_inverse(a1, phase1.basis);
        const Vector<double> xb = binv * b1;
        double infeasibility = 0;
        for (Index i = 0; i < m; ++i)
            if (phase1.basis[static_cast<std::size_t>(i)] >= n) infeasibility += std::max(xb(i), 0.0);
        if (infeasibility > 1e-9 * (1.0 + b1.cwiseAbs().maxCoeff())) {
            result.status = LpStatus::Infeasible;
            return result;
        }
    }

    // Pivot zero-level artificials out of the basis; rows where that is
    // impossible are linearly dependent and get dropped.
    std::vector<Index> kept_rows;
    for (Index i = 0; i < m; ++i) {
        if (phase1.basis[static_cast<std::size_t>(i)] < n) {
            kept_rows.push_back(i);
            continue;
        }
        const Matrix<double> binv = basis_inverse(a1, phase1.basis);
        Index replacement = -1;
        for (Index j = 0; j < n && replacement < 0; ++j) {
            if (std::find(phase1.basis.begin(), phase1.basis.end(), j) != phase1.basis.end()) continue;
            if (std::abs(binv.row(i).dot(a1.col(j))) > 1e-9) replacement = j;
        }
        if (replacement >= 0) {
            phase1.basis[static_cast<std::size_t>(i)] = replacement;
            kept_rows.push_back(i);
        }
    }

    const auto k = static_cast<Index>(kept_rows.size());
    Matrix<double> a2(k, n);
    Vector<double> b2(k);
    std::vector<Index> basis2;
    for (Index r = 0; r < k; ++r) {
        const Index i = kept_rows[static_cast<std::size_t>(r)];
        a2.row(r) = a1.row(i).head(n);
        b2(r) = b1(i);
        basis2.push_back(phase1.basis[static_cast<std::size_t>(i)]);
    }

    Tableau phase2{a2, b2, problem.c, basis2, n};
    const LpStatus status = run_phase(phase2, result.iterations);
    if (status == LpStatus::Unbounded) {
        result.status = LpStatus::Unbounded;
        return result;
    }

    const Matrix<double> binv = basis_inverse(a2, phase2.basis);
    const Vector<double> xb = binv * b2;
    result.x = Vector<double>::Zero(n);
    for (Index r = 0; r < k; ++r) result.x(phase2.basis[static_cast<std::size_t>(r)]) = std::max(xb(r), 0.0);

    Vector<double> c_basic(k);
    for (Index r = 0; r < k; ++r) c_basic(r) = problem.c(phase2.basis[static_cast<std::size_t>(r)]);
    const Vector<double> y = binv.transpose() * c_basic;
    result.duals = Vector<double>::Zero(m);
    for (Index r = 0; r < k; ++r) {
        const Index i = kept_rows[static_cast<std::size_t>(r)];
        result.duals(i) = row_sign(i) * y(r);
    }
    result.objective = problem.c.dot(result.x);
    result.status = LpStatus::Optimal;
    return result;
}

}  // namespace lp

namespace {

void check_thresholds(const Cmdp<double>& cmdp, const Vector<double>& tau_J) {
    if (tau_J.size() != cmdp.n_costs())
        throw DimensionMismatch("expected one threshold per cost function");
    const double upper = cmdp.value_bound();
    for (Index i = 0; i < tau_J.size(); ++i)
        if (!(tau_J(i) >= -1e-12 && tau_J(i) <= upper + 1e-9))
            throw ConfigError("threshold outside [0, 1/(1-gamma)]");
}

// Flow-balance rows over the S*A occupancy columns.
Matrix<double> flow_rows(const Cmdp<double>& cmdp) {
    const Index S = cmdp.n_states();
    const Index A = cmdp.n_actions();
    Matrix<double> rows = -cmdp.gamma() * cmdp.transition().transpose();
    for (Index s = 0; s < S; ++s)
        for (Index a = 0; a < A; ++a) rows(s, flat_index(s, a, A)) += 1.0;
    return rows;
}

OccupancyMeasure<double> occupancy_from(const Cmdp<double>& cmdp, const Vector<double>& x) {
    Table<double> d = Eigen::Map<const Table<double>>(x.data(), cmdp.n_states(), cmdp.n_actions());
    return OccupancyMeasure<double>(std::move(d));
}

}  // namespace

LpSolution solve_cmdp_lp(const Cmdp<double>& cmdp, const Vector<double>& tau_J) {
    check_thresholds(cmdp, tau_J);
    const Index S = cmdp.n_states();
    const Index SA = S * cmdp.n_actions();
    const Index I = cmdp.n_costs();
    const double g = cmdp.gamma();

    lp::StandardForm p;
    p.A = Matrix<double>::Zero(S + I, SA + I);
    p.b = Vector<double>::Zero(S + I);
    p.c = Vector<double>::Zero(SA + I);
    p.A.topLeftCorner(S, SA) = flow_rows(cmdp);
    p.b(cmdp.initial_state()) = 1.0 - g;
    for (Index i = 0; i < I; ++i) {
        p.A.block(S + i, 0, 1, SA) = Eigen::Map<const Vector<double>>(cmdp.cost(i).data(), SA).transpose();
        p.A(S + i, SA + i) = 1.0;
        p.b(S + i) = (1.0 - g) * tau_J(i);
    }
    p.c.head(SA) = -Eigen::Map<const Vector<double>>(cmdp.reward().data(), SA);

    const auto r = lp::solve(p);
    LpSolution out;
    out.status = r.status;
    if (r.status == LpStatus::Unbounded) throw InternalError("occupancy LP reported unbounded");
    if (r.status != LpStatus::Optimal) return out;

    out.occupancy = occupancy_from(cmdp, r.x);
    out.value_normalized = -r.objective;
    out.value_J = out.value_normalized / (1.0 - g);
    // The normalized Lagrangian divided by (1 - gamma) is J_R + y (tau - J_C),
    // so the row multipliers already live on the value scale.
    out.duals = Vector<double>::Zero(I);
    for (Index i = 0; i < I; ++i) out.duals(i) = std::max(0.0, -r.duals(S + i));
    return out;
}

SlaterInfo slater_margin(const Cmdp<double>& cmdp, const Vector<double>& tau_J) {
    check_thresholds(cmdp, tau_J);
    const Index S = cmdp.n_states();
    const Index A = cmdp.n_actions();
    const Index SA = S * A;
    const Index I = cmdp.n_costs();
    const double g = cmdp.gamma();

    SlaterInfo info;
    if (I == 0) {
        info.margin_phi = std::numeric_limits<double>::infinity();
        info.raw_margin = info.margin_phi;
        info.feasible = true;
        info.witness = Policy<double>::uniform(S, A);
        return info;
    }

    // <nu, C_i> <= 1 for any occupancy, so phi >= -1 always; shift by one to
    // keep every variable nonnegative.
    lp::StandardForm p;
    p.A = Matrix<double>::Zero(S + I, SA + 1 + I);
    p.b = Vector<double>::Zero(S + I);
    p.c = Vector<double>::Zero(SA + 1 + I);
    p.A.topLeftCorner(S, SA) = flow_rows(cmdp);
    p.b(cmdp.initial_state()) = 1.0 - g;
    for (Index i = 0; i < I; ++i) {
        p.A.block(S + i, 0, 1, SA) = Eigen::Map<const Vector<double>>(cmdp.cost(i).data(), SA).transpose();
        p.A(S + i, SA) = 1.0;
        p.A(S + i, SA + 1 + i) = 1.0;
        p.b(S + i) = (1.0 - g) * tau_J(i) + 1.0;
    }
    p.c(SA) = -1.0;

    const auto r = lp::solve(p);
    if (r.status != LpStatus::Optimal) throw InternalError("Slater auxiliary LP did not solve");
    info.raw_margin = r.x(SA) - 1.0;
    info.feasible = info.raw_margin >= -1e-9;
    info.margin_phi = std::max(0.0, info.raw_margin);
    if (info.margin_phi < 1e-12) info.margin_phi = 0.0;
    info.witness = extract_policy(occupancy_from(cmdp, r.x.head(SA)));
    return info;
}

}  // namespace pdca
