#include "doctest.h"
#include "fixtures.hpp"
#include "pdca/lp.hpp"
#include "pdca/pdca.hpp"
#include "pdca/serialization.hpp"

using namespace pdca;

namespace {

Vector<double> vec(std::initializer_list<double> xs) {
    Vector<double> v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

struct Problem {
    Cmdp<double> cmdp;
    Dataset data;
};

Problem problem(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    auto m = fixtures::random_cmdp(rng, 6, 3);
    const auto d_mu = behavior_distribution(m, Policy<double>::uniform(6, 3), 0.0);
    auto data = sample_dataset(m, d_mu, n, seed + 1);
    return {std::move(m), std::move(data)};
}

}  // namespace

TEST_CASE("lambda_greedy") {
    CHECK(lambda_greedy(vec({0.1, 0.2}), 5.0) == vec({0, 0}));
    CHECK(lambda_greedy(vec({-0.1, 0.2}), 5.0) == vec({5, 0}));
    CHECK(lambda_greedy(vec({-0.1, -0.3}), 5.0) == vec({0, 5}));
    CHECK(lambda_greedy(vec({-0.3, -0.3}), 5.0) == vec({5, 0}));
    CHECK_THROWS_AS(lambda_greedy(vec({1}), -1.0), ConfigError);

    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const Vector<double> z = vec({rng.normal(), rng.normal(), rng.normal()});
        const double B = 10 * rng.uniform();
        const auto l = lambda_greedy(z, B);
        CHECK((l.array() >= 0).all());
        CHECK(l.sum() <= B + 1e-15);
        CHECK((l.array() > 0).count() <= 1);
        // Optimal among the extreme points of B * simplex.
        for (Index i = 0; i < 3; ++i) CHECK(l.dot(z) <= B * z(i) + 1e-12);
        CHECK(l.dot(z) <= 1e-15);
    }
}

TEST_CASE("npg_step") {
    const auto pi = Policy<double>::uniform(1, 2);
    Table<double> h(1, 2);
    h << std::log(2.0), 0.0;
    const auto next = npg_step(pi, h, 1.0);
    CHECK(next(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(next(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK(npg_step(pi, h, 0.0).probs() == pi.probs());

    Rng rng(4);
    const auto p = fixtures::random_policy(rng, 5, 4);
    const auto g = fixtures::random_table(rng, 5, 4, -1.0, 1.0);
    CHECK((npg_step(p, Table<double>::Constant(5, 4, 0.7), 3.0).probs() - p.probs()).cwiseAbs().maxCoeff() < 1e-15);
    const auto a = npg_step(p, g, 2.0);
    Table<double> shifted = g;
    for (Index s = 0; s < 5; ++s) shifted.row(s).array() += static_cast<double>(s) - 2.5;
    CHECK((npg_step(p, shifted, 2.0).probs() - a.probs()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(((a.probs().rowwise().sum().array() - 1.0).abs() < 1e-12).all());

    // Large inputs do not overflow.
    const auto big = npg_step(p, Table<double>::Constant(5, 4, 1e6) + g, 1e3);
    CHECK(big.probs().allFinite());

    Table<double> bad = g;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(npg_step(p, bad, 1.0), NonFinite);
}

TEST_CASE("mode parameters") {
    PdcaConfig cfg;
    cfg.tau_J = vec({2.5});

    cfg.mode = PdcaMode::Standard;
    apply_mode_parameters(cfg, 0.5, 0.1, 0.8);
    CHECK(cfg.B == doctest::Approx(3.0));
    CHECK(effective_thresholds(cfg) == cfg.tau_J);

    cfg.mode = PdcaMode::LargeB;
    apply_mode_parameters(cfg, 0.5, 0.1, 0.8);
    CHECK(cfg.B == doctest::Approx(50.0));

    cfg.mode = PdcaMode::Tightened;
    apply_mode_parameters(cfg, 0.5, 0.1, 0.8);
    CHECK(cfg.B == doctest::Approx(10.0));
    CHECK(cfg.tighten_eta == doctest::Approx(0.05));
    CHECK(effective_thresholds(cfg)(0) == doctest::Approx(2.45));

    cfg.tighten_eta = 3.0;
    CHECK_THROWS_AS(effective_thresholds(cfg), ConfigError);

    cfg.mode = PdcaMode::Standard;
    CHECK_THROWS_AS(apply_mode_parameters(cfg, 0.0, 0.1, 0.8), ConfigError);
    CHECK(parse_mode("large-b") == PdcaMode::LargeB);
    CHECK(to_string(PdcaMode::Tightened) == "tightened");
    CHECK_THROWS_AS(parse_mode("fast"), ConfigError);
}

TEST_CASE("K = 1 returns the uniform policy") {
    const auto p = problem(1, 200);
    PdcaConfig cfg;
    cfg.K = 1;
    cfg.tau_J = vec({2.5});
    cfg.B = 3.0;
    const auto log = run_pdca(p.data, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg);
    REQUIRE(log.mixture.size() == 1);
    CHECK(log.mixture.members().front().probs() == Policy<double>::uniform(6, 3).probs());
    CHECK(log.records.size() == 1);
}

TEST_CASE("iterate log invariants") {
    const auto p = problem(2, 2000);
    PdcaConfig cfg;
    cfg.K = 30;
    cfg.tau_J = vec({1.5});
    cfg.B = 4.0;
    cfg.critic.n_steps = 200;
    const auto log = run_pdca(p.data, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg);
    CHECK(log.records.size() == 30);
    CHECK(log.mixture.size() == 30);
    for (const auto& r : log.records) {
        CHECK((r.lambda.array() >= 0).all());
        CHECK(r.lambda.sum() <= cfg.B + 1e-15);
        CHECK(r.z_min <= r.z_max);
        CHECK(std::abs(r.z_min) <= (1 + 2 * cfg.B) / 0.2 + 1e-9);
        CHECK(std::abs(r.z_max) <= (1 + 2 * cfg.B) / 0.2 + 1e-9);
        CHECK(r.ope_estimates(0) >= 0.0);
        CHECK(r.ope_estimates(0) <= 5.0);
    }
    // Same input, same log.
    const auto again = run_pdca(p.data, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg);
    CHECK(iterate_log_to_jsonl(again) == iterate_log_to_jsonl(log));

    // JSONL round trip.
    const auto back = iterate_log_from_jsonl(iterate_log_to_jsonl(log));
    CHECK(back.records.size() == log.records.size());
    CHECK(back.B == log.B);
    CHECK(iterate_log_to_jsonl(back) == iterate_log_to_jsonl(log));
}

TEST_CASE("run_pdca rejects bad input") {
    const auto p = problem(3, 100);
    PdcaConfig cfg;
    cfg.tau_J = vec({2.5});
    CHECK_THROWS_AS(run_pdca(Dataset{}, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg), EmptyDataset);
    cfg.tau_J = vec({2.5, 2.5});
    CHECK_THROWS_AS(run_pdca(p.data, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg), ConfigError);
    cfg.tau_J = vec({2.5});
    cfg.K = 0;
    CHECK_THROWS_AS(run_pdca(p.data, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg), ConfigError);
}

TEST_CASE("B = 0 ignores the costs and improves on the uniform policy") {
    const auto p = problem(4, 100000);
    PdcaConfig cfg;
    cfg.tau_J = vec({0.5});
    cfg.B = 0.0;
    const auto log = run_pdca(p.data, p.cmdp.reward(), p.cmdp.costs(), 0.8, 0, cfg);
    for (const auto& r : log.records) CHECK(r.lambda.sum() == 0.0);
    CHECK(policy_value(p.cmdp, log.mixture, p.cmdp.reward()) >=
          policy_value(p.cmdp, Policy<double>::uniform(6, 3), p.cmdp.reward()));
}

TEST_CASE("saddle diagnostics") {
    Rng rng(77);
    const auto m = fixtures::random_cmdp(rng, 8, 4);
    const auto tau = vec({2.5});
    const auto sol = solve_cmdp_lp(m, tau);
    REQUIRE(sol.status == LpStatus::Optimal);
    const auto opt = extract_policy(sol.occupancy);

    IterateLog log;
    IterationRecord r;
    r.k = 1;
    r.lambda = sol.duals;
    log.records.push_back(r);
    log.mixture = MixturePolicy<double>::uniform({opt});
    const double B = sol.duals.sum() + 1.0;

    const auto report = saddle_diagnostics(m, log, log.mixture, tau, B);
    CHECK(std::abs(report.gap) <= 1e-6);
    CHECK(report.lagrangian_trajectory.size() == 1);

    // B = 0 collapses the lambda sets.
    const auto unif = MixturePolicy<double>::uniform({Policy<double>::uniform(8, 4)});
    log.records.front().lambda = vec({0.0});
    const auto zero = saddle_diagnostics(m, log, unif, tau, 0.0);
    CHECK(zero.gap == doctest::Approx(sol.value_J - policy_value(m, unif, m.reward())).epsilon(1e-9));

    CHECK(lagrangian(m, opt, vec({2.0}), tau) ==
          doctest::Approx(policy_value(m, opt, m.reward()) + 2.0 * (2.5 - policy_value(m, opt, m.cost(0)))));
}
