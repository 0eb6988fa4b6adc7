#pragma once

// Empirical Bellman-error and advantage terms over a box function class,
// and the convex critic problems built from them.
//
// With W = [0, C_inf]^{S x A} the Bellman-error term reduces per sample to
//   E_D(pi, f; U) = C_inf max{ mean (delta)_+, mean (-delta)_+ },
//   delta_j = f(s_j, a_j) - U(s_j, a_j) - gamma f(s'_j, pi).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pdca/cmdp.hpp"
#include "pdca/offline_data.hpp"

namespace pdca {

template <typename Scalar>
struct FunctionClassSpec {
    /// Box bound for F, normally 1 / (1 - gamma).
    Scalar f_upper = 5;
    /// Box bound C_inf for W.
    Scalar c_inf_w = 2;

    void validate() const {
        if (!(f_upper > 0) || !(c_inf_w >= 0)) throw ConfigError("function class bounds must be positive");
    }
};

/// Projected subgradient settings. Steps run in stages of stage_length;
/// within stage k the step at local index t is
/// step_size * decay^k / sqrt(t + 1) along the normalized subgradient, and
/// every stage restarts from the best iterate so far. The schedule does not
/// depend on n_steps, so runs with more steps extend runs with fewer.
template <typename Scalar>
struct CriticConfig {
    Scalar step_size = 1;
    int n_steps = 1500;
    /// Stops once the subgradient norm falls to this value.
    Scalar tolerance = 0;
    /// 0 means a single stage.
    int stage_length = 300;
    Scalar decay = Scalar(0.5);

    void validate() const {
        if (!(step_size > 0) || n_steps < 1 || !(tolerance >= 0))
            throw ConfigError("critic step_size must be > 0, n_steps >= 1, tolerance >= 0");
        if (stage_length < 0 || !(decay > 0 && decay <= 1))
            throw ConfigError("critic stage_length must be >= 0 and decay in (0, 1]");
    }
};

enum class CriticSign : int { Reward = 1, Cost = -1 };

/// A dataset folded into its distinct (s, a, s') triples. All estimators
/// are averages over samples, so weighting each triple by its empirical
/// frequency gives the same values at a cost independent of n.
template <typename Scalar>
class TransitionSummary {
public:
    TransitionSummary(const Dataset& data, Index n_states, Index n_actions)
        : n_states_(n_states), n_actions_(n_actions), n_samples_(data.size()) {
        if (data.empty()) throw EmptyDataset();
        const Index SA = n_states * n_actions;
        std::vector<std::size_t> counts(static_cast<std::size_t>(SA * n_states), 0);
        for (const auto& t : data.transitions) {
            if (t.s < 0 || t.s >= n_states || t.a < 0 || t.a >= n_actions || t.s_next < 0 ||
                t.s_next >= n_states)
                throw DimensionMismatch("transition index out of range");
            ++counts[static_cast<std::size_t>(flat_index(t.s, t.a, n_actions) * n_states + t.s_next)];
        }
        pair_mass_ = Table<Scalar>::Zero(n_states, n_actions);
        const Scalar inv_n = Scalar(1) / Scalar(n_samples_);
        for (Index sa = 0; sa < SA; ++sa) {
            for (Index sn = 0; sn < n_states; ++sn) {
                const auto c = counts[static_cast<std::size_t>(sa * n_states + sn)];
                if (c == 0) continue;
                pair_.push_back(sa);
                next_.push_back(sn);
                weight_.push_back(Scalar(c) * inv_n);
                pair_mass_.data()[sa] += Scalar(c) * inv_n;
            }
        }
        state_mass_ = pair_mass_.rowwise().sum();
    }

    Index n_states() const { return n_states_; }
    Index n_actions() const { return n_actions_; }
    std::size_t n_samples() const { return n_samples_; }
    std::size_t n_triples() const { return pair_.size(); }

    Index pair(std::size_t j) const { return pair_[j]; }
    Index next(std::size_t j) const { return next_[j]; }
    Scalar weight(std::size_t j) const { return weight_[j]; }

    /// Empirical d_D(s, a) and its state marginal.
    const Table<Scalar>& pair_mass() const { return pair_mass_; }
    const Vector<Scalar>& state_mass() const { return state_mass_; }

private:
    Index n_states_;
    Index n_actions_;
    std::size_t n_samples_;
    std::vector<Index> pair_;
    std::vector<Index> next_;
    std::vector<Scalar> weight_;
    Table<Scalar> pair_mass_;
    Vector<Scalar> state_mass_;
};

namespace detail {

template <typename Scalar>
void require_shapes(Index S, Index A, const Policy<Scalar>& pi, const Table<Scalar>& f) {
    if (pi.n_states() != S || pi.n_actions() != A || f.rows() != S || f.cols() != A)
        throw DimensionMismatch("policy or function shape does not match the data");
}

template <typename Scalar>
struct PositiveParts {
    Scalar positive = 0;
    Scalar negative = 0;
};

template <typename Scalar>
PositiveParts<Scalar> residual_parts(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi,
                                     const Table<Scalar>& f, const Table<Scalar>& u, Scalar gamma) {
    const Vector<Scalar> next_value = policy_average(pi, f);
    PositiveParts<Scalar> parts;
    for (std::size_t j = 0; j < data.n_triples(); ++j) {
        const Index sa = data.pair(j);
        const Scalar delta = f.data()[sa] - u.data()[sa] - gamma * next_value(data.next(j));
        if (delta > 0)
            parts.positive += data.weight(j) * delta;
        else
            parts.negative -= data.weight(j) * delta;
    }
    return parts;
}

}  // namespace detail

/// Box-class Bellman-error term, evaluated sample by sample.
template <typename Scalar>
Scalar e_d_box(const Dataset& data, const Policy<Scalar>& pi, const Table<Scalar>& f,
               const Table<Scalar>& u, Scalar gamma, Scalar c_inf) {
    if (data.empty()) throw EmptyDataset();
    detail::require_shapes(f.rows(), f.cols(), pi, u);
    const Vector<Scalar> next_value = policy_average(pi, f);
    Scalar positive = 0;
    Scalar negative = 0;
    for (const auto& t : data.transitions) {
        const Scalar delta = f(t.s, t.a) - u(t.s, t.a) - gamma * next_value(t.s_next);
        if (delta > 0)
            positive += delta;
        else
            negative -= delta;
    }
    const Scalar n = Scalar(data.size());
    return c_inf * std::max(positive / n, negative / n);
}

template <typename Scalar>
Scalar e_d_box(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi, const Table<Scalar>& f,
               const Table<Scalar>& u, Scalar gamma, Scalar c_inf) {
    detail::require_shapes(data.n_states(), data.n_actions(), pi, f);
    const auto parts = detail::residual_parts(data, pi, f, u, gamma);
    return c_inf * std::max(parts.positive, parts.negative);
}

/// A_D(pi, f) = mean_j [ f(s_j, pi) - f(s_j, a_j) ].
template <typename Scalar>
Scalar a_d(const Dataset& data, const Policy<Scalar>& pi, const Table<Scalar>& f) {
    if (data.empty()) throw EmptyDataset();
    const Vector<Scalar> on_policy = policy_average(pi, f);
    Scalar total = 0;
    for (const auto& t : data.transitions) total += on_policy(t.s) - f(t.s, t.a);
    return total / Scalar(data.size());
}

template <typename Scalar>
Scalar a_d(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi, const Table<Scalar>& f) {
    detail::require_shapes(data.n_states(), data.n_actions(), pi, f);
    return data.state_mass().dot(policy_average(pi, f)) - data.pair_mass().cwiseProduct(f).sum();
}

/// Critic objective  bellman_weight * E_D + advantage_sign * A_D.
/// The reward critic uses (2, +1), the cost critic (2, -1), OPE (1, 0).
template <typename Scalar>
Scalar critic_objective(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi,
                        const Table<Scalar>& f, const Table<Scalar>& u, Scalar gamma, Scalar c_inf,
                        Scalar bellman_weight, Scalar advantage_sign) {
    Scalar value = bellman_weight * e_d_box(data, pi, f, u, gamma, c_inf);
    if (advantage_sign != 0) value += advantage_sign * a_d(data, pi, f);
    return value;
}

template <typename Scalar>
Scalar critic_objective(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi,
                        const Table<Scalar>& f, const Table<Scalar>& u, Scalar gamma, Scalar c_inf,
                        CriticSign sign) {
    return critic_objective(data, pi, f, u, gamma, c_inf, Scalar(2), Scalar(static_cast<int>(sign)));
}

template <typename Scalar>
struct CriticResult {
    QFunction<Scalar> f;
    /// Objective at the returned (best) iterate.
    Scalar objective;
    int steps = 0;
};

/// Projected subgradient descent on bellman_weight * E_D + advantage_sign * A_D
/// over [0, f_upper]^{S x A}, returning the best iterate seen.
template <typename Scalar>
CriticResult<Scalar> minimize_box_critic(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi,
                                         const Table<Scalar>& u, Scalar gamma, Scalar bellman_weight,
                                         Scalar advantage_sign, const FunctionClassSpec<Scalar>& fclass,
                                         const CriticConfig<Scalar>& cfg,
                                         const std::optional<Table<Scalar>>& init = std::nullopt) {
    fclass.validate();
    cfg.validate();
    const Index S = data.n_states();
    const Index A = data.n_actions();
    detail::require_shapes(S, A, pi, u);

    Table<Scalar> f = init ? Table<Scalar>(init->cwiseMax(Scalar(0)).cwiseMin(fclass.f_upper))
                           : Table<Scalar>(Table<Scalar>::Zero(S, A));
    if (f.rows() != S || f.cols() != A) throw DimensionMismatch("critic initialization has wrong shape");

    // The advantage term is linear in f with a data-fixed gradient.
    const Table<Scalar> advantage_grad =
        (pi.probs().array().colwise() * data.state_mass().array()).matrix() - data.pair_mass();
    const Scalar scale = bellman_weight * fclass.c_inf_w;

    Table<Scalar> best = f;
    Scalar best_obj = std::numeric_limits<Scalar>::infinity();
    Table<Scalar> grad(S, A);
    Vector<Scalar> next_grad(S);
    std::vector<Scalar> delta(data.n_triples());
    int steps = 0;

    for (int t = 0;; ++t) {
        const int stage = cfg.stage_length > 0 ? t / cfg.stage_length : 0;
        const int local = cfg.stage_length > 0 ? t % cfg.stage_length : t;
        if (t > 0 && local == 0) f = best;

        // Objective and one subgradient at f.
        const Vector<Scalar> next_value = policy_average(pi, f);
        Scalar positive = 0;
        Scalar negative = 0;
        for (std::size_t j = 0; j < data.n_triples(); ++j) {
            const Index sa = data.pair(j);
            delta[j] = f.data()[sa] - u.data()[sa] - gamma * next_value(data.next(j));
            if (delta[j] > 0)
                positive += data.weight(j) * delta[j];
            else
                negative -= data.weight(j) * delta[j];
        }
        const bool positive_side = positive >= negative;
        Scalar obj = scale * std::max(positive, negative);
        if (advantage_sign != 0)
            obj += advantage_sign * (data.state_mass().dot(next_value) - data.pair_mass().cwiseProduct(f).sum());
        if (!std::isfinite(static_cast<double>(obj))) throw NonFinite("critic objective is not finite");
        if (obj < best_obj) {
            best_obj = obj;
            best = f;
        }
        if (t >= cfg.n_steps) break;

        grad.setZero();
        next_grad.setZero();
        if (scale > 0) {
            const Scalar side = positive_side ? Scalar(1) : Scalar(-1);
            for (std::size_t j = 0; j < data.n_triples(); ++j) {
                if (positive_side ? !(delta[j] > 0) : !(delta[j] < 0)) continue;
                const Scalar w = side * scale * data.weight(j);
                grad.data()[data.pair(j)] += w;
                next_grad(data.next(j)) -= gamma * w;
            }
            grad += (pi.probs().array().colwise() * next_grad.array()).matrix();
        }
        if (advantage_sign != 0) grad += advantage_sign * advantage_grad;

        const Scalar norm = grad.norm();
        if (!(norm > cfg.tolerance) || norm == Scalar(0)) break;
        using std::pow;
        using std::sqrt;
        const Scalar step = cfg.step_size * pow(cfg.decay, Scalar(stage)) / sqrt(Scalar(local + 1));
        f = (f - (step / norm) * grad).cwiseMax(Scalar(0)).cwiseMin(fclass.f_upper);
        ++steps;
    }
    return {QFunction<Scalar>(std::move(best)), best_obj, steps};
}

/// Reward critic (sign +1) or cost critic (sign -1):
///   min_f 2 E_D(pi, f; U) + sign A_D(pi, f).
template <typename Scalar>
CriticResult<Scalar> critic_solve(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi,
                                  const Table<Scalar>& u, Scalar gamma, CriticSign sign,
                                  const FunctionClassSpec<Scalar>& fclass, const CriticConfig<Scalar>& cfg,
                                  const std::optional<Table<Scalar>>& init = std::nullopt) {
    return minimize_box_critic(data, pi, u, gamma, Scalar(2), Scalar(static_cast<int>(sign)), fclass, cfg,
                               init);
}

template <typename Scalar>
CriticResult<Scalar> critic_solve(const Dataset& data, const Policy<Scalar>& pi, const Table<Scalar>& u,
                                  Scalar gamma, CriticSign sign, const FunctionClassSpec<Scalar>& fclass,
                                  const CriticConfig<Scalar>& cfg) {
    return critic_solve(TransitionSummary<Scalar>(data, pi.n_states(), pi.n_actions()), pi, u, gamma, sign,
                        fclass, cfg);
}

/// Offline estimate of J_U(pi): minimizes E_D alone from f = 0 and reads
/// off f(s0, pi), clipped to [0, f_upper].
template <typename Scalar>
Scalar ope_estimate(const TransitionSummary<Scalar>& data, const Policy<Scalar>& pi, const Table<Scalar>& u,
                    Scalar gamma, Index s0, const FunctionClassSpec<Scalar>& fclass,
                    const CriticConfig<Scalar>& cfg) {
    if (s0 < 0 || s0 >= data.n_states()) throw DimensionMismatch("initial state out of range");
    const auto fit = minimize_box_critic(data, pi, u, gamma, Scalar(1), Scalar(0), fclass, cfg);
    const Scalar v = pi.probs().row(s0).dot(fit.f.q.row(s0));
    return std::clamp(v, Scalar(0), fclass.f_upper);
}

template <typename Scalar>
Scalar ope_estimate(const Dataset& data, const Policy<Scalar>& pi, const Table<Scalar>& u, Scalar gamma,
                    Index s0, const FunctionClassSpec<Scalar>& fclass, const CriticConfig<Scalar>& cfg) {
    return ope_estimate(TransitionSummary<Scalar>(data, pi.n_states(), pi.n_actions()), pi, u, gamma, s0,
                        fclass, cfg);
}

}  // namespace pdca
