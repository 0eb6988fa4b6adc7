#pragma once

// Primal-dual-critic loop: box-class reward/cost critics, an OPE estimate
// per cost, a greedy lambda-player over the scaled simplex B * Delta^I and
// an exponential-weights policy player. Returns the uniform mixture of the
// visited policies.

#include <string>
#include <vector>

#include "pdca/critic.hpp"
#include "pdca/offline_data.hpp"

namespace pdca {

enum class PdcaMode { Standard, LargeB, Tightened };

std::string to_string(PdcaMode mode);
PdcaMode parse_mode(const std::string& name);

struct PdcaConfig {
    int K = 500;
    /// Thresholds on the value scale, one per cost.
    Vector<double> tau_J;
    /// Radius of the lambda set B * Delta^I.
    double B = 1.0;
    double eta_npg = 5.0;
    /// f_upper <= 0 means 1 / (1 - gamma).
    FunctionClassSpec<double> fclass{0.0, 2.0};
    CriticConfig<double> critic;
    PdcaMode mode = PdcaMode::Standard;
    /// Shift eta applied to every threshold in Tightened mode.
    double tighten_eta = 0.0;
    /// Start each critic solve from the previous iterate's solution.
    bool warm_start = true;
};

/// Bound and tightening prescribed by each run mode:
///   Standard:  B = 1 + 1/phi
///   LargeB:    B = 1 / ((1 - gamma) epsilon)
///   Tightened: B = 5/phi, eta = phi epsilon
void apply_mode_parameters(PdcaConfig& cfg, double phi, double epsilon, double gamma);

/// Thresholds the lambda-player and the policy player actually use.
Vector<double> effective_thresholds(const PdcaConfig& cfg);

struct IterationRecord {
    int k = 0;
    Vector<double> lambda;
    double critic_obj_reward = 0.0;
    Vector<double> critic_obj_costs;
    Vector<double> ope_estimates;
    double z_min = 0.0;
    double z_max = 0.0;
};

struct IterateLog {
    std::vector<IterationRecord> records;
    /// Thresholds of the original problem, and the ones the players used.
    Vector<double> tau_J;
    Vector<double> tau_effective;
    double B = 0.0;
    PdcaMode mode = PdcaMode::Standard;
    MixturePolicy<double> mixture = MixturePolicy<double>::uniform({Policy<double>::uniform(1, 1)});
};

/// argmin over {lambda >= 0, sum lambda <= B} of lambda . z: all mass on
/// the most negative coordinate (lowest index on ties), or zero.
Vector<double> lambda_greedy(const Vector<double>& z, double B);

/// pi'(a | s) proportional to pi(a | s) exp(eta h(s, a)), with h already
/// scaled into [-1, 1].
Policy<double> npg_step(const Policy<double>& pi, const Table<double>& h, double eta);

/// Maps z, bounded by (1 + 2B)/(1 - gamma) in magnitude, into [-1, 1].
double oracle_scale(double gamma, double B);

/// Runs K rounds from the uniform policy. Only the dataset and the known
/// reward/cost tables are used.
IterateLog run_pdca(const Dataset& data, const Table<double>& reward, const std::vector<Table<double>>& costs,
                    double gamma, Index s0, const PdcaConfig& cfg);

struct SaddleReport {
    Vector<double> lambda_bar;
    /// L(pi*, lambda_bar)
    double lagrangian_opt = 0.0;
    /// min over B * Delta^I of L(pi_bar, lambda)
    double lagrangian_mixture_min = 0.0;
    /// lagrangian_opt - lagrangian_mixture_min
    double gap = 0.0;
    double J_R_opt = 0.0;
    double J_R_mixture = 0.0;
    Vector<double> J_C_mixture;
    /// L(pi_k, lambda_k), exact, one per iteration.
    std::vector<double> lagrangian_trajectory;
};

/// Evaluation-time saddle-point report against the LP optimum of the true CMDP.
SaddleReport saddle_diagnostics(const Cmdp<double>& cmdp, const IterateLog& log,
                                const MixturePolicy<double>& mixture, const Vector<double>& tau_J, double B);

/// Exact Lagrangian J_R(pi) + lambda . (tau - J_C(pi)).
double lagrangian(const Cmdp<double>& cmdp, const Policy<double>& pi, const Vector<double>& lambda,
                  const Vector<double>& tau_J);

}  // namespace pdca
