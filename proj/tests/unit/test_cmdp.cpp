#include "doctest.h"
#include "fixtures.hpp"
#include "pdca/cmdp.hpp"

using namespace pdca;

TEST_CASE("construction rejects malformed models") {
    Table<double> P = Table<double>::Ones(2, 1);
    Table<double> R = Table<double>::Zero(1, 2);

    SUBCASE("row not summing to one") {
        Table<double> bad = P;
        bad(0, 0) = 0.9;
        CHECK_THROWS_AS(Cmdp<double>(bad, R, {}, 0.8, 0), InvalidModel);
    }
    SUBCASE("reward outside [0, 1]") {
        Table<double> r = R;
        r(0, 1) = 1.5;
        CHECK_THROWS_AS(Cmdp<double>(P, r, {}, 0.8, 0), InvalidModel);
    }
    SUBCASE("gamma on the boundary") {
        CHECK_THROWS_AS(Cmdp<double>(P, R, {}, 1.0, 0), InvalidModel);
        CHECK_THROWS_AS(Cmdp<double>(P, R, {}, 0.0, 0), InvalidModel);
    }
    SUBCASE("initial state out of range") { CHECK_THROWS_AS(Cmdp<double>(P, R, {}, 0.8, 1), InvalidModel); }
    SUBCASE("policy rows must be distributions") {
        Table<double> p(1, 2);
        p << 0.7, 0.7;
        CHECK_THROWS_AS(Policy<double>{p}, InvalidModel);
    }
}

TEST_CASE("occupancy of a one-state one-action CMDP is a point mass") {
    const Cmdp<double> m(Table<double>::Ones(1, 1), Table<double>::Zero(1, 1), {}, 0.8, 0);
    const auto occ = occupancy(m, Policy<double>::uniform(1, 1));
    CHECK(occ.d(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("two-state chain: occupancy, value and Q") {
    const auto m = fixtures::two_state_chain(0.8, 2);
    const auto pi = Policy<double>::uniform(2, 2);
    const auto occ = occupancy(m, pi);
    CHECK(occ.d.row(0).sum() == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(occ.d.row(1).sum() == doctest::Approx(0.8).epsilon(1e-12));

    const auto rollout = fixtures::occupancy_by_rollout(m, pi, 200000, 11);
    CHECK(std::abs(rollout.row(0).sum() - 0.2) < 0.005);

    CHECK(policy_value(m, pi, m.reward()) == doctest::Approx(1.0).epsilon(1e-12));
    const auto q = q_value(m, pi, m.reward());
    CHECK(q.q(0, 0) == doctest::Approx(1.0));
    CHECK(q.q(0, 1) == doctest::Approx(1.0));
    CHECK(std::abs(q.q(1, 0)) < 1e-12);
}

TEST_CASE("constant utilities") {
    Rng rng(3);
    const auto m = fixtures::random_cmdp(rng, 6, 3);
    const auto pi = fixtures::random_policy(rng, 6, 3);
    const Table<double> ones = Table<double>::Ones(6, 3);
    const Table<double> zeros = Table<double>::Zero(6, 3);
    CHECK(policy_value(m, pi, ones) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(policy_value(m, pi, zeros) == 0.0);
    CHECK((q_value(m, pi, ones).q.array() - 5.0).abs().maxCoeff() < 1e-10);
    CHECK(q_value(m, pi, zeros).q.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("occupancy is normalized and balances flow on random instances") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const auto m = fixtures::random_cmdp(rng, 10, 5);
        const auto pi = fixtures::random_policy(rng, 10, 5);
        const auto occ = occupancy(m, pi);
        CHECK(std::abs(occ.d.sum() - 1.0) < 1e-9);
        CHECK((occ.d.array() >= -1e-15).all());
        CHECK(flow_residual(m, occ) < 1e-12);
    }
}

TEST_CASE("Q from the linear solve matches Bellman iteration") {
    Rng rng(5);
    const auto m = fixtures::random_cmdp(rng, 5, 3);
    const auto pi = fixtures::random_policy(rng, 5, 3);
    const auto q = q_value(m, pi, m.reward());
    const auto oracle = fixtures::q_by_iteration(m, pi, m.reward());
    CHECK((q.q - oracle).cwiseAbs().maxCoeff() < 1e-9);
    // J_U(pi) = Q(s0, pi)
    CHECK(std::abs(policy_value(m, pi, m.reward()) - pi.probs().row(0).dot(q.q.row(0))) < 1e-9);
    // Q is a fixed point of the backup.
    CHECK((bellman_backup(m, pi, m.reward(), q.q) - q.q).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mixture values are weighted member values") {
    Rng rng(8);
    const auto m = fixtures::random_cmdp(rng, 4, 2);
    const auto p1 = fixtures::random_policy(rng, 4, 2);
    const auto p2 = fixtures::random_policy(rng, 4, 2);
    Vector<double> w(2);
    w << 0.25, 0.75;
    const MixturePolicy<double> mix({p1, p2}, w);
    const double expected = 0.25 * policy_value(m, p1, m.reward()) + 0.75 * policy_value(m, p2, m.reward());
    CHECK(policy_value(m, mix, m.reward()) == doctest::Approx(expected).epsilon(1e-14));
    const auto occ = occupancy(m, mix);
    CHECK((occ.d - (0.25 * occupancy(m, p1).d + 0.75 * occupancy(m, p2).d)).cwiseAbs().maxCoeff() < 1e-15);

    Vector<double> bad(2);
    bad << 0.5, 0.6;
    CHECK_THROWS_AS(MixturePolicy<double>({p1, p2}, bad), InvalidModel);
}

TEST_CASE("marginalized importance weights") {
    Rng rng(21);
    const auto m = fixtures::random_cmdp(rng, 5, 3);
    const auto pi = fixtures::random_policy(rng, 5, 3);
    const auto d_pi = occupancy(m, pi);

    SUBCASE("policy equals behavior") {
        const auto w = miw(m, pi, d_pi);
        CHECK((w.w.array() - 1.0).abs().maxCoeff() < 1e-9);
        const auto c = concentrability(w, d_pi);
        CHECK(c.c_l2 == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(c.c_inf == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("change of measure and Jensen") {
        const auto mu = fixtures::random_policy(rng, 5, 3);
        const auto d_mu = occupancy(m, mu);
        const auto w = miw(m, pi, d_mu);
        CHECK(d_mu.d.cwiseProduct(w.w).sum() == doctest::Approx(1.0).epsilon(1e-12));
        const auto c = concentrability(w, d_mu);
        CHECK(c.c_l2 * c.c_l2 <= c.c_inf + 1e-12);
    }
    SUBCASE("mass outside the behavior support") {
        Table<double> d = d_pi.d;
        d(2, 1) = 0.0;
        d /= d.sum();
        CHECK_THROWS_AS(miw(m, pi, OccupancyMeasure<double>(d)), CoverageViolation);
    }
    SUBCASE("both measures vanish") {
        const auto det = Policy<double>::deterministic({0, 0, 0, 0, 0}, 3);
        const auto d_det = occupancy(m, det);
        const auto w = miw(m, det, d_det);
        CHECK(w.w(0, 1) == 0.0);
    }
}

TEST_CASE("concentrability arithmetic") {
    Table<double> d(1, 4);
    d << 0.25, 0.25, 0.25, 0.25;
    Table<double> w(1, 4);
    w << 2.0, 2.0, 0.0, 0.0;
    const auto c = concentrability(MiwTable<double>(w), OccupancyMeasure<double>(d));
    CHECK(c.c_l2 == doctest::Approx(std::sqrt(2.0)));
    CHECK(c.c_inf == doctest::Approx(2.0));
}

TEST_CASE("long double instantiation agrees with double") {
    Rng rng(4);
    const auto m = fixtures::random_cmdp(rng, 4, 2);
    const auto pi = fixtures::random_policy(rng, 4, 2);
    std::vector<Table<long double>> costs{m.cost(0).cast<long double>()};
    const Cmdp<long double> ml(m.transition().cast<long double>(), m.reward().cast<long double>(), costs,
                               static_cast<long double>(m.gamma()), 0);
    const auto pil = pi.cast<long double>();
    const long double v = policy_value(ml, pil, ml.reward());
    CHECK(std::abs(static_cast<double>(v) - policy_value(m, pi, m.reward())) < 1e-12);
}
