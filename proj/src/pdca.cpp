#include "pdca/pdca.hpp"

#include <algorithm>
#include <cmath>

#include "pdca/lp.hpp"

namespace pdca {

std::string to_string(PdcaMode mode) {
    switch (mode) {
        case PdcaMode::Standard:
            return "standard";
        case PdcaMode::LargeB:
            return "large-b";
        case PdcaMode::Tightened:
            return "tightened";
    }
    return "standard";
}

PdcaMode parse_mode(const std::string& name) {
    if (name == "standard") return PdcaMode::Standard;
    if (name == "large-b") return PdcaMode::LargeB;
    if (name == "tightened") return PdcaMode::Tightened;
    throw ConfigError("unknown mode '" + name + "' (expected standard, large-b or tightened)");
}

void apply_mode_parameters(PdcaConfig& cfg, double phi, double epsilon, double gamma) {
    switch (cfg.mode) {
        case PdcaMode::Standard:
            if (!(phi > 0)) throw ConfigError("standard mode needs a positive Slater margin");
            cfg.B = 1.0 + 1.0 / phi;
            cfg.tighten_eta = 0.0;
            break;
        case PdcaMode::LargeB:
            if (!(epsilon > 0)) throw ConfigError("large-b mode needs epsilon > 0");
            cfg.B = 1.0 / ((1.0 - gamma) * epsilon);
            cfg.tighten_eta = 0.0;
            break;
        case PdcaMode::Tightened:
            if (!(phi > 0) || !(epsilon > 0))
                throw ConfigError("tightened mode needs a positive Slater margin and epsilon");
            cfg.B = 5.0 / phi;
            cfg.tighten_eta = phi * epsilon;
            break;
    }
}

Vector<double> effective_thresholds(const PdcaConfig& cfg) {
    if (cfg.mode != PdcaMode::Tightened) return cfg.tau_J;
    Vector<double> tau = cfg.tau_J.array() - cfg.tighten_eta;
    if ((tau.array() < 0.0).any()) throw ConfigError("tightened thresholds tau - eta must stay nonnegative");
    return tau;
}

Vector<double> lambda_greedy(const Vector<double>& z, double B) {
    if (!(B >= 0)) throw ConfigError("lambda bound B must be nonnegative");
    Vector<double> lambda = Vector<double>::Zero(z.size());
    if (z.size() == 0) return lambda;
    Index worst = 0;
    for (Index i = 1; i < z.size(); ++i)
        if (z(i) < z(worst)) worst = i;
    if (z(worst) < 0) lambda(worst) = B;
    return lambda;
}

Policy<double> npg_step(const Policy<double>& pi, const Table<double>& h, double eta) {
    if (h.rows() != pi.n_states() || h.cols() != pi.n_actions())
        throw DimensionMismatch("oracle input shape does not match the policy");
    if (!(eta >= 0)) throw ConfigError("NPG learning rate must be nonnegative");
    if (!h.allFinite()) throw NonFinite("oracle input is not finite");
    Table<double> next(pi.n_states(), pi.n_actions());
    for (Index s = 0; s < pi.n_states(); ++s) {
        const auto logits = (eta * h.row(s)).eval();
        const double shift = logits.maxCoeff();
        next.row(s) = pi.probs().row(s).array() * (logits.array() - shift).exp();
        next.row(s) /= next.row(s).sum();
    }
    return Policy<double>(std::move(next));
}

double oracle_scale(double gamma, double B) { return (1.0 - gamma) / (1.0 + 2.0 * B); }

IterateLog run_pdca(const Dataset& data, const Table<double>& reward, const std::vector<Table<double>>& costs,
                    double gamma, Index s0, const PdcaConfig& cfg) {
    if (data.empty()) throw EmptyDataset();
    const Index S = reward.rows();
    const Index A = reward.cols();
    const auto I = static_cast<Index>(costs.size());
    if (cfg.K < 1) throw ConfigError("K must be at least 1");
    if (cfg.tau_J.size() != I) throw ConfigError("expected one threshold per cost function");
    if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
    if (s0 < 0 || s0 >= S) throw ConfigError("initial state out of range");
    if (!(cfg.eta_npg >= 0)) throw ConfigError("eta_npg must be nonnegative");
    for (const auto& c : costs)
        if (c.rows() != S || c.cols() != A) throw ConfigError("cost table shape differs from reward");

    FunctionClassSpec<double> fclass = cfg.fclass;
    if (fclass.f_upper <= 0) fclass.f_upper = 1.0 / (1.0 - gamma);
    const Vector<double> tau = effective_thresholds(cfg);
    const TransitionSummary<double> summary(data, S, A);
    const double scale = oracle_scale(gamma, cfg.B);

    IterateLog log;
    log.tau_J = cfg.tau_J;
    log.tau_effective = tau;
    log.B = cfg.B;
    log.mode = cfg.mode;
    log.records.reserve(static_cast<std::size_t>(cfg.K));

    std::vector<Policy<double>> policies;
    policies.reserve(static_cast<std::size_t>(cfg.K));
    policies.push_back(Policy<double>::uniform(S, A));

    std::optional<Table<double>> reward_init;
    std::vector<std::optional<Table<double>>> cost_init(static_cast<std::size_t>(I));

    for (int k = 1; k <= cfg.K; ++k) {
        const Policy<double>& pi = policies.back();
        IterationRecord rec;
        rec.k = k;

        auto f = critic_solve(summary, pi, reward, gamma, CriticSign::Reward, fclass, cfg.critic, reward_init);
        rec.critic_obj_reward = f.objective;

        rec.critic_obj_costs = Vector<double>::Zero(I);
        rec.ope_estimates = Vector<double>::Zero(I);
        std::vector<Table<double>> g;
        g.reserve(static_cast<std::size_t>(I));
        for (Index i = 0; i < I; ++i) {
            const auto& c = costs[static_cast<std::size_t>(i)];
            auto gi = critic_solve(summary, pi, c, gamma, CriticSign::Cost, fclass, cfg.critic,
                                   cost_init[static_cast<std::size_t>(i)]);
            rec.critic_obj_costs(i) = gi.objective;
            rec.ope_estimates(i) = ope_estimate(summary, pi, c, gamma, s0, fclass, cfg.critic);
            if (cfg.warm_start) cost_init[static_cast<std::size_t>(i)] = gi.f.q;
            g.push_back(std::move(gi.f.q));
        }
        if (cfg.warm_start) reward_init = f.f.q;

        rec.lambda = lambda_greedy(tau - rec.ope_estimates, cfg.B);

        Table<double> z = f.f.q;
        for (Index i = 0; i < I; ++i)
            if (rec.lambda(i) != 0.0)
                z += rec.lambda(i) * (Table<double>::Constant(S, A, tau(i)) - g[static_cast<std::size_t>(i)]);
        rec.z_min = z.minCoeff();
        rec.z_max = z.maxCoeff();
        log.records.push_back(std::move(rec));

        if (k < cfg.K) policies.push_back(npg_step(pi, scale * z, cfg.eta_npg));
    }

    log.mixture = MixturePolicy<double>::uniform(std::move(policies));
    return log;
}

double lagrangian(const Cmdp<double>& cmdp, const Policy<double>& pi, const Vector<double>& lambda,
                  const Vector<double>& tau_J) {
    double value = policy_value(cmdp, pi, cmdp.reward());
    for (Index i = 0; i < lambda.size(); ++i)
        value += lambda(i) * (tau_J(i) - policy_value(cmdp, pi, cmdp.cost(i)));
    return value;
}

SaddleReport saddle_diagnostics(const Cmdp<double>& cmdp, const IterateLog& log,
                                const MixturePolicy<double>& mixture, const Vector<double>& tau_J, double B) {
    const Index I = cmdp.n_costs();
    if (tau_J.size() != I) throw DimensionMismatch("expected one threshold per cost function");
    if (log.records.empty()) throw ConfigError("iterate log has no records");

    const auto lp = solve_cmdp_lp(cmdp, tau_J);
    if (lp.status != LpStatus::Optimal) throw Infeasible("thresholds admit no feasible policy");
    const Policy<double> optimal = extract_policy(lp.occupancy);

    SaddleReport report;
    report.lambda_bar = Vector<double>::Zero(I);
    for (const auto& r : log.records) {
        if (r.lambda.size() != I) throw DimensionMismatch("log lambda has wrong length");
        report.lambda_bar += r.lambda;
    }
    report.lambda_bar /= static_cast<double>(log.records.size());

    report.J_R_opt = policy_value(cmdp, optimal, cmdp.reward());
    report.lagrangian_opt = lagrangian(cmdp, optimal, report.lambda_bar, tau_J);

    report.J_R_mixture = policy_value(cmdp, mixture, cmdp.reward());
    report.J_C_mixture = Vector<double>::Zero(I);
    double worst_slack = 0.0;
    for (Index i = 0; i < I; ++i) {
        report.J_C_mixture(i) = policy_value(cmdp, mixture, cmdp.cost(i));
        worst_slack = std::min(worst_slack, tau_J(i) - report.J_C_mixture(i));
    }
    // Linear in lambda, so the minimum over B * Delta^I sits at 0 or at B e_i.
    report.lagrangian_mixture_min = report.J_R_mixture + B * worst_slack;
    report.gap = report.lagrangian_opt - report.lagrangian_mixture_min;

    const std::size_t n = std::min(log.records.size(), mixture.size());
    report.lagrangian_trajectory.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
        report.lagrangian_trajectory.push_back(
            lagrangian(cmdp, mixture.members()[k], log.records[k].lambda, tau_J));
    return report;
}

}  // namespace pdca
