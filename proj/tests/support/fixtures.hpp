#pragma once

// Small CMDPs with hand-computable answers, random instances, and oracles
// that share no code with the library's solvers.

#include <cmath>
#include <vector>

#include "pdca/cmdp.hpp"
#include "pdca/random.hpp"

namespace fixtures {

using pdca::Cmdp;
using pdca::Index;
using pdca::Policy;
using pdca::Table;

/// s0 -> s1 deterministically, s1 absorbing; every action behaves the same.
inline Cmdp<double> two_state_chain(double gamma = 0.8, Index n_actions = 1) {
    Table<double> P = Table<double>::Zero(2 * n_actions, 2);
    for (Index a = 0; a < n_actions; ++a) {
        P(a, 1) = 1.0;
        P(n_actions + a, 1) = 1.0;
    }
    Table<double> R = Table<double>::Zero(2, n_actions);
    R.row(0).setOnes();
    Table<double> C = Table<double>::Zero(2, n_actions);
    return Cmdp<double>(P, R, {C}, gamma, 0);
}

/// One state, two actions: R = (1, 0), C = (1, 0).
inline Cmdp<double> one_state_two_actions(double gamma = 0.8) {
    Table<double> P = Table<double>::Ones(2, 1);
    Table<double> R(1, 2);
    R << 1.0, 0.0;
    Table<double> C(1, 2);
    C << 1.0, 0.0;
    return Cmdp<double>(P, R, {C}, gamma, 0);
}

inline Table<double> random_table(pdca::Rng& rng, Index rows, Index cols, double lo = 0.0, double hi = 1.0) {
    Table<double> t(rows, cols);
    for (Index k = 0; k < rows * cols; ++k) t.data()[k] = lo + (hi - lo) * rng.uniform();
    return t;
}

inline Cmdp<double> random_cmdp(pdca::Rng& rng, Index S, Index A, double gamma = 0.8, Index n_costs = 1) {
    Table<double> P(S * A, S);
    for (Index i = 0; i < S * A; ++i) {
        const auto row = rng.dirichlet(static_cast<std::size_t>(S), 1.0);
        for (Index j = 0; j < S; ++j) P(i, j) = row[static_cast<std::size_t>(j)];
    }
    std::vector<Table<double>> costs;
    for (Index i = 0; i < n_costs; ++i) costs.push_back(random_table(rng, S, A));
    return Cmdp<double>(P, random_table(rng, S, A), costs, gamma, 0);
}

inline Policy<double> random_policy(pdca::Rng& rng, Index S, Index A) {
    Table<double> p(S, A);
    for (Index s = 0; s < S; ++s) {
        const auto row = rng.dirichlet(static_cast<std::size_t>(A), 1.0);
        for (Index a = 0; a < A; ++a) p(s, a) = row[static_cast<std::size_t>(a)];
    }
    return Policy<double>(p);
}

/// Q by repeated Bellman backups, no linear solve.
inline Table<double> q_by_iteration(const Cmdp<double>& m, const Policy<double>& pi, const Table<double>& u,
                                    int sweeps = 2000) {
    const Index S = m.n_states(), A = m.n_actions();
    Table<double> q = Table<double>::Zero(S, A);
    for (int it = 0; it < sweeps; ++it) {
        Table<double> next(S, A);
        for (Index s = 0; s < S; ++s)
            for (Index a = 0; a < A; ++a) {
                double ev = 0.0;
                for (Index sn = 0; sn < S; ++sn) {
                    double v = 0.0;
                    for (Index b = 0; b < A; ++b) v += pi(sn, b) * q(sn, b);
                    ev += m.transition()(s * A + a, sn) * v;
                }
                next(s, a) = u(s, a) + m.gamma() * ev;
            }
        q = next;
    }
    return q;
}

/// Unconstrained optimal value at s0 by value iteration.
inline double optimal_value(const Cmdp<double>& m, int sweeps = 3000) {
    const Index S = m.n_states(), A = m.n_actions();
    std::vector<double> v(static_cast<std::size_t>(S), 0.0);
    for (int it = 0; it < sweeps; ++it) {
        std::vector<double> next(static_cast<std::size_t>(S));
        for (Index s = 0; s < S; ++s) {
            double best = -1e300;
            for (Index a = 0; a < A; ++a) {
                double q = m.reward()(s, a);
                for (Index sn = 0; sn < S; ++sn)
                    q += m.gamma() * m.transition()(s * A + a, sn) * v[static_cast<std::size_t>(sn)];
                best = std::max(best, q);
            }
            next[static_cast<std::size_t>(s)] = best;
        }
        v = next;
    }
    return v[static_cast<std::size_t>(m.initial_state())];
}

/// Monte-Carlo estimate of the normalized occupancy: episodes stop at each
/// step with probability 1 - gamma and the final (s, a) is recorded.
inline Table<double> occupancy_by_rollout(const Cmdp<double>& m, const Policy<double>& pi, int episodes,
                                          std::uint64_t seed) {
    pdca::Rng rng(seed);
    const Index S = m.n_states(), A = m.n_actions();
    Table<double> d = Table<double>::Zero(S, A);
    auto draw = [&](auto&& prob, Index k) {
        double u = rng.uniform(), acc = 0.0;
        for (Index i = 0; i < k; ++i) {
            acc += prob(i);
            if (u < acc) return i;
        }
        return k - 1;
    };
    for (int e = 0; e < episodes; ++e) {
        Index s = m.initial_state();
        for (;;) {
            const Index a = draw([&](Index i) { return pi(s, i); }, A);
            if (rng.uniform() >= m.gamma()) {
                d(s, a) += 1.0;
                break;
            }
            s = draw([&](Index i) { return m.transition()(s * A + a, i); }, S);
        }
    }
    return d / static_cast<double>(episodes);
}

}  // namespace fixtures
