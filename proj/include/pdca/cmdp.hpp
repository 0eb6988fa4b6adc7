#pragma once

// Exact analytics for finite discounted constrained MDPs: occupancy
// measures, policy and Q evaluation, importance weights and concentrability.
// Everything here is computed by dense linear solves, never by iteration.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pdca/error.hpp"
#include "pdca/types.hpp"

namespace pdca {

namespace detail {

template <typename Scalar>
Scalar row_sum_tolerance() {
    return Scalar(1e-12);
}

template <typename Scalar>
void require_stochastic_rows(const Table<Scalar>& rows, const char* what) {
    for (Index r = 0; r < rows.rows(); ++r) {
        if ((rows.row(r).array() < Scalar(0)).any() || !rows.row(r).allFinite())
            throw InvalidModel(std::string(what) + ": negative or non-finite entry in row " +
                               std::to_string(r));
        using std::abs;
        if (abs(rows.row(r).sum() - Scalar(1)) > row_sum_tolerance<Scalar>())
            throw InvalidModel(std::string(what) + ": row " + std::to_string(r) +
                               " does not sum to 1");
    }
}

template <typename Scalar>
void require_unit_interval(const Table<Scalar>& t, const char* what) {
    if (!t.allFinite() || (t.array() < Scalar(0)).any() || (t.array() > Scalar(1)).any())
        throw InvalidModel(std::string(what) + " entries must lie in [0, 1]");
}

}  // namespace detail

/// Finite CMDP (S, A, P, R, {C_i}, gamma, s0).
///
/// The transition tensor is stored as an (S*A) x S row-stochastic matrix;
/// row `s * A + a` is P(. | s, a).
template <typename Scalar>
class Cmdp {
public:
    Cmdp(Table<Scalar> transition, Table<Scalar> reward, std::vector<Table<Scalar>> costs,
         Scalar gamma, Index initial_state)
        : transition_(std::move(transition)),
          reward_(std::move(reward)),
          costs_(std::move(costs)),
          gamma_(gamma),
          initial_state_(initial_state) {
        const Index S = reward_.rows();
        const Index A = reward_.cols();
        if (S <= 0 || A <= 0) throw InvalidModel("CMDP needs at least one state and one action");
        if (transition_.rows() != S * A || transition_.cols() != S)
            throw InvalidModel("transition must be (n_states*n_actions) x n_states");
        detail::require_stochastic_rows(transition_, "transition");
        detail::require_unit_interval(reward_, "reward");
        for (const auto& c : costs_) {
            if (c.rows() != S || c.cols() != A) throw InvalidModel("cost table has wrong shape");
            detail::require_unit_interval(c, "cost");
        }
        if (!(gamma_ > Scalar(0) && gamma_ < Scalar(1)))
            throw InvalidModel("gamma must lie strictly inside (0, 1)");
        if (initial_state_ < 0 || initial_state_ >= S)
            throw InvalidModel("initial_state out of range");
    }

    Index n_states() const { return reward_.rows(); }
    Index n_actions() const { return reward_.cols(); }
    Index n_costs() const { return static_cast<Index>(costs_.size()); }
    Scalar gamma() const { return gamma_; }
    Index initial_state() const { return initial_state_; }

    const Table<Scalar>& transition() const { return transition_; }
    const Table<Scalar>& reward() const { return reward_; }
    const std::vector<Table<Scalar>>& costs() const { return costs_; }
    const Table<Scalar>& cost(Index i) const { return costs_.at(static_cast<std::size_t>(i)); }

    /// P(. | s, a) as a row expression.
    auto next_state_distribution(Index s, Index a) const {
        return transition_.row(flat_index(s, a, n_actions()));
    }

    /// Largest value any utility in [0, 1] can reach, 1 / (1 - gamma).
    Scalar value_bound() const { return Scalar(1) / (Scalar(1) - gamma_); }

private:
    Table<Scalar> transition_;
    Table<Scalar> reward_;
    std::vector<Table<Scalar>> costs_;
    Scalar gamma_;
    Index initial_state_;
};

/// Stationary policy pi(a | s), one probability row per state.
template <typename Scalar>
class Policy {
public:
    explicit Policy(Table<Scalar> probs) : probs_(std::move(probs)) {
        if (probs_.rows() <= 0 || probs_.cols() <= 0) throw InvalidModel("empty policy");
        detail::require_stochastic_rows(probs_, "policy");
    }

    static Policy uniform(Index n_states, Index n_actions) {
        return Policy(Table<Scalar>::Constant(n_states, n_actions, Scalar(1) / Scalar(n_actions)));
    }

    static Policy deterministic(const std::vector<Index>& actions, Index n_actions) {
        Table<Scalar> p = Table<Scalar>::Zero(static_cast<Index>(actions.size()), n_actions);
        for (std::size_t s = 0; s < actions.size(); ++s) p(static_cast<Index>(s), actions[s]) = 1;
        return Policy(std::move(p));
    }

    Index n_states() const { return probs_.rows(); }
    Index n_actions() const { return probs_.cols(); }
    const Table<Scalar>& probs() const { return probs_; }
    Scalar operator()(Index s, Index a) const { return probs_(s, a); }

    template <typename Other>
    Policy<Other> cast() const {
        return Policy<Other>(probs_.template cast<Other>());
    }

private:
    Table<Scalar> probs_;
};

/// Trajectory-level mixture: one member is drawn per episode and followed
/// throughout, so every value is the weighted average of member values.
template <typename Scalar>
class MixturePolicy {
public:
    MixturePolicy(std::vector<Policy<Scalar>> members, Vector<Scalar> weights)
        : members_(std::move(members)), weights_(std::move(weights)) {
        if (members_.empty()) throw InvalidModel("mixture needs at least one member");
        if (weights_.size() != static_cast<Index>(members_.size()))
            throw InvalidModel("mixture weights and members differ in length");
        using std::abs;
        if ((weights_.array() < Scalar(0)).any() ||
            abs(weights_.sum() - Scalar(1)) > detail::row_sum_tolerance<Scalar>())
            throw InvalidModel("mixture weights must be nonnegative and sum to 1");
        for (const auto& m : members_)
            if (m.n_states() != members_.front().n_states() ||
                m.n_actions() != members_.front().n_actions())
                throw InvalidModel("mixture members have different shapes");
    }

    static MixturePolicy uniform(std::vector<Policy<Scalar>> members) {
        const auto k = static_cast<Index>(members.size());
        return MixturePolicy(std::move(members),
                             Vector<Scalar>::Constant(k, Scalar(1) / Scalar(std::max<Index>(k, 1))));
    }

    const std::vector<Policy<Scalar>>& members() const { return members_; }
    const Vector<Scalar>& weights() const { return weights_; }
    std::size_t size() const { return members_.size(); }

private:
    std::vector<Policy<Scalar>> members_;
    Vector<Scalar> weights_;
};

/// Normalized discounted state-action distribution d^pi.
template <typename Scalar>
struct OccupancyMeasure {
    explicit OccupancyMeasure(Table<Scalar> table) : d(std::move(table)) {}
    Table<Scalar> d;
};

template <typename Scalar>
struct QFunction {
    explicit QFunction(Table<Scalar> table) : q(std::move(table)) {}
    Table<Scalar> q;
};

/// Marginalized importance weights w(s, a) = d^pi(s, a) / d^mu(s, a).
template <typename Scalar>
struct MiwTable {
    explicit MiwTable(Table<Scalar> table) : w(std::move(table)) {}
    Table<Scalar> w;
};

template <typename Scalar>
struct Concentrability {
    Scalar c_l2;
    Scalar c_inf;
};

namespace detail {

template <typename Scalar>
void require_policy_shape(const Cmdp<Scalar>& m, const Policy<Scalar>& pi) {
    if (pi.n_states() != m.n_states() || pi.n_actions() != m.n_actions())
        throw DimensionMismatch("policy shape does not match the CMDP");
}

template <typename Scalar>
void require_table_shape(const Cmdp<Scalar>& m, const Table<Scalar>& t, const char* what) {
    if (t.rows() != m.n_states() || t.cols() != m.n_actions())
        throw DimensionMismatch(std::string(what) + " shape does not match the CMDP");
}

template <typename Scalar>
Eigen::Map<const Vector<Scalar>> flat(const Table<Scalar>& t) {
    return Eigen::Map<const Vector<Scalar>>(t.data(), t.size());
}

}  // namespace detail

/// f(s, pi) = sum_a pi(a | s) f(s, a), one entry per state.
template <typename Scalar>
Vector<Scalar> policy_average(const Policy<Scalar>& pi, const Table<Scalar>& f) {
    if (f.rows() != pi.n_states() || f.cols() != pi.n_actions())
        throw DimensionMismatch("table shape does not match the policy");
    return pi.probs().cwiseProduct(f).rowwise().sum();
}

/// State-to-state kernel P_pi(s' | s) = sum_a pi(a | s) P(s' | s, a).
template <typename Scalar>
Matrix<Scalar> state_transition(const Cmdp<Scalar>& m, const Policy<Scalar>& pi) {
    detail::require_policy_shape(m, pi);
    const Index S = m.n_states();
    const Index A = m.n_actions();
    Matrix<Scalar> p = Matrix<Scalar>::Zero(S, S);
    for (Index s = 0; s < S; ++s)
        for (Index a = 0; a < A; ++a) p.row(s) += pi(s, a) * m.next_state_distribution(s, a);
    return p;
}

/// Solves the flow system for the state marginal
///   rho = (1 - gamma) e_{s0} + gamma P_pi^T rho
/// and returns d(s, a) = rho(s) pi(a | s).
template <typename Scalar>
OccupancyMeasure<Scalar> occupancy(const Cmdp<Scalar>& m, const Policy<Scalar>& pi) {
    const Index S = m.n_states();
    const Scalar g = m.gamma();
    Matrix<Scalar> lhs = Matrix<Scalar>::Identity(S, S) - g * state_transition(m, pi).transpose();
    Vector<Scalar> rhs = Vector<Scalar>::Zero(S);
    rhs(m.initial_state()) = Scalar(1) - g;
    const Vector<Scalar> rho = lhs.partialPivLu().solve(rhs);
    if (!rho.allFinite()) throw InternalError("singular flow system");
    Table<Scalar> d = pi.probs().array().colwise() * rho.array();
    return OccupancyMeasure<Scalar>(std::move(d));
}

template <typename Scalar>
OccupancyMeasure<Scalar> occupancy(const Cmdp<Scalar>& m, const MixturePolicy<Scalar>& mix) {
    Table<Scalar> d = Table<Scalar>::Zero(m.n_states(), m.n_actions());
    for (std::size_t j = 0; j < mix.size(); ++j)
        d += mix.weights()(static_cast<Index>(j)) * occupancy(m, mix.members()[j]).d;
    return OccupancyMeasure<Scalar>(std::move(d));
}

/// Largest absolute violation of the flow-balance equalities.
template <typename Scalar>
Scalar flow_residual(const Cmdp<Scalar>& m, const OccupancyMeasure<Scalar>& occ) {
    detail::require_table_shape(m, occ.d, "occupancy");
    const Index S = m.n_states();
    // inflow(s) = sum_{s', a'} P(s | s', a') d(s', a')
    Vector<Scalar> inflow = m.transition().transpose() * detail::flat(occ.d);
    Vector<Scalar> lhs = occ.d.rowwise().sum();
    Vector<Scalar> rhs = m.gamma() * inflow;
    rhs(m.initial_state()) += Scalar(1) - m.gamma();
    Scalar worst = 0;
    for (Index s = 0; s < S; ++s) {
        using std::abs;
        worst = std::max(worst, abs(lhs(s) - rhs(s)));
    }
    return worst;
}

/// <d, U>, the expectation of U under d.
template <typename Scalar>
Scalar expectation(const OccupancyMeasure<Scalar>& occ, const Table<Scalar>& u) {
    if (u.rows() != occ.d.rows() || u.cols() != occ.d.cols())
        throw DimensionMismatch("table shape does not match the occupancy");
    return occ.d.cwiseProduct(u).sum();
}

/// J_U(pi) = <d^pi, U> / (1 - gamma).
template <typename Scalar>
Scalar policy_value(const Cmdp<Scalar>& m, const Policy<Scalar>& pi, const Table<Scalar>& u) {
    detail::require_table_shape(m, u, "utility");
    return expectation(occupancy(m, pi), u) / (Scalar(1) - m.gamma());
}

template <typename Scalar>
Scalar policy_value(const Cmdp<Scalar>& m, const MixturePolicy<Scalar>& mix, const Table<Scalar>& u) {
    Scalar v = 0;
    for (std::size_t j = 0; j < mix.size(); ++j)
        v += mix.weights()(static_cast<Index>(j)) * policy_value(m, mix.members()[j], u);
    return v;
}

/// E_{s' ~ P(.|s,a)}[f(s', pi)] for every (s, a).
template <typename Scalar>
Table<Scalar> expected_next_value(const Cmdp<Scalar>& m, const Policy<Scalar>& pi,
                                  const Table<Scalar>& f) {
    detail::require_table_shape(m, f, "function");
    const Vector<Scalar> next = m.transition() * policy_average(pi, f);
    return Eigen::Map<const Table<Scalar>>(next.data(), m.n_states(), m.n_actions());
}

/// Bellman backup (T_U^pi f)(s, a) = U(s, a) + gamma E[f(s', pi)].
template <typename Scalar>
Table<Scalar> bellman_backup(const Cmdp<Scalar>& m, const Policy<Scalar>& pi,
                             const Table<Scalar>& u, const Table<Scalar>& f) {
    detail::require_table_shape(m, u, "utility");
    return u + m.gamma() * expected_next_value(m, pi, f);
}

/// Fixed point of the Bellman backup. Solves (I - gamma P_pi) V = U_pi for
/// the state values, then Q = U + gamma P V.
template <typename Scalar>
QFunction<Scalar> q_value(const Cmdp<Scalar>& m, const Policy<Scalar>& pi, const Table<Scalar>& u) {
    detail::require_table_shape(m, u, "utility");
    detail::require_policy_shape(m, pi);
    const Index S = m.n_states();
    Matrix<Scalar> lhs = Matrix<Scalar>::Identity(S, S) - m.gamma() * state_transition(m, pi);
    const Vector<Scalar> v = lhs.partialPivLu().solve(policy_average(pi, u));
    if (!v.allFinite()) throw InternalError("singular Bellman system");
    const Vector<Scalar> next = m.transition() * v;
    Table<Scalar> q = u + m.gamma() * Eigen::Map<const Table<Scalar>>(next.data(), S, m.n_actions());
    return QFunction<Scalar>(std::move(q));
}

/// w = d^pi / d^mu with the convention w = 0 where both vanish.
template <typename Scalar>
MiwTable<Scalar> miw(const Cmdp<Scalar>& m, const Policy<Scalar>& pi,
                     const OccupancyMeasure<Scalar>& behavior) {
    detail::require_table_shape(m, behavior.d, "behavior occupancy");
    const auto target = occupancy(m, pi);
    Table<Scalar> w = Table<Scalar>::Zero(m.n_states(), m.n_actions());
    for (Index s = 0; s < m.n_states(); ++s) {
        for (Index a = 0; a < m.n_actions(); ++a) {
            const Scalar mu = behavior.d(s, a);
            const Scalar dp = target.d(s, a);
            if (mu > Scalar(0)) {
                w(s, a) = dp / mu;
            } else if (dp > Scalar(0)) {
                throw CoverageViolation("behavior occupancy is zero at (" + std::to_string(s) +
                                        ", " + std::to_string(a) + ") where the policy has mass");
            }
        }
    }
    return MiwTable<Scalar>(std::move(w));
}

/// C_l2 = ||w||_{2, mu} and C_inf = max over the support of mu.
template <typename Scalar>
Concentrability<Scalar> concentrability(const MiwTable<Scalar>& w,
                                        const OccupancyMeasure<Scalar>& behavior) {
    if (w.w.rows() != behavior.d.rows() || w.w.cols() != behavior.d.cols())
        throw DimensionMismatch("weight table shape does not match the occupancy");
    using std::sqrt;
    const Scalar second_moment = behavior.d.cwiseProduct(w.w.cwiseAbs2()).sum();
    Scalar c_inf = 0;
    for (Index i = 0; i < w.w.size(); ++i)
        if (behavior.d.data()[i] > Scalar(0)) c_inf = std::max(c_inf, w.w.data()[i]);
    return {sqrt(second_moment), c_inf};
}

}  // namespace pdca
