#pragma once

// Ground-truth solver for the constrained problem over occupancy measures:
//
//   max <nu, R>  s.t.  nu >= 0,
//                      sum_a nu(s, a) = (1 - gamma) 1{s = s0} + gamma sum P(s | s', a') nu(s', a'),
//                      <nu, C_i> <= (1 - gamma) tau_i.
//
// Thresholds tau are always given on the value scale [0, 1 / (1 - gamma)].

#include <string>

#include "pdca/cmdp.hpp"

namespace pdca {

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string to_string(LpStatus status);

namespace lp {

/// min c^T x  s.t.  A x = b,  x >= 0.
struct StandardForm {
    Matrix<double> A;
    Vector<double> b;
    Vector<double> c;
};

struct SimplexResult {
    LpStatus status = LpStatus::Infeasible;
    Vector<double> x;
    /// Equality-row multipliers y with A^T y <= c at the optimum.
    Vector<double> duals;
    double objective = 0.0;
    int iterations = 0;
};

/// Dense revised simplex with Bland's anti-cycling rule and an
/// artificial-variable phase one. Intended for problems with a few dozen
/// rows and columns.
SimplexResult solve(const StandardForm& problem);

}  // namespace lp

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    OccupancyMeasure<double> occupancy{Table<double>()};
    /// <nu, R>
    double value_normalized = 0.0;
    /// value_normalized / (1 - gamma)
    double value_J = 0.0;
    /// Cost multipliers on the value scale, so that the Lagrangian reads
    /// J_R + lambda . (tau - J_C).
    Vector<double> duals;
};

LpSolution solve_cmdp_lp(const Cmdp<double>& cmdp, const Vector<double>& tau_J);

struct SlaterInfo {
    /// phi >= 0, per-step units: some policy has J_C_i <= tau_i - phi / (1 - gamma).
    double margin_phi = 0.0;
    Policy<double> witness = Policy<double>::uniform(1, 1);
    /// False when even the least-cost occupancy violates a threshold.
    bool feasible = false;
    /// Unclipped optimum of the auxiliary problem.
    double raw_margin = 0.0;
};

SlaterInfo slater_margin(const Cmdp<double>& cmdp, const Vector<double>& tau_J);

/// pi(a | s) = d(s, a) / sum_a d(s, a); uniform on states with no mass.
template <typename Scalar>
Policy<Scalar> extract_policy(const OccupancyMeasure<Scalar>& occ) {
    const Index A = occ.d.cols();
    Table<Scalar> p(occ.d.rows(), A);
    for (Index s = 0; s < occ.d.rows(); ++s) {
        const Scalar mass = occ.d.row(s).cwiseMax(Scalar(0)).sum();
        if (mass > Scalar(1e-12)) {
            p.row(s) = occ.d.row(s).cwiseMax(Scalar(0)) / mass;
        } else {
            p.row(s).setConstant(Scalar(1) / Scalar(A));
        }
    }
    return Policy<Scalar>(std::move(p));
}

}  // namespace pdca
