#pragma once

// Tabular study: random CMDPs, dataset-size sweeps over repeated seeds,
// exact evaluation of the returned mixtures and CSV emission.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdca/lp.hpp"
#include "pdca/pdca.hpp"
#include "pdca/serialization.hpp"

namespace pdca {

/// How ExperimentConfig::tau is read: per-step cost (tau_J = tau / (1 - gamma))
/// or directly on the value scale.
enum class TauScale { Normalized, Value };

std::string to_string(TauScale scale);
TauScale parse_tau_scale(const std::string& name);

struct HyperGrid {
    std::vector<double> eta{1, 2, 5, 10};
    std::vector<double> B{2, 5, 10};
    std::vector<double> c_inf{2, 5, 10};
    /// Dataset size used for the selection runs.
    std::size_t n = 1000;
};

struct ExperimentConfig {
    Index n_states = 10;
    Index n_actions = 5;
    double gamma = 0.8;
    double tau = 0.5;
    TauScale tau_scale = TauScale::Normalized;
    Index n_costs = 1;
    /// Weight of the optimal policy in the behavior mixture.
    double beta = 0.5;
    std::vector<std::size_t> dataset_sizes{1000, 10000, 100000};
    int repeats = 10;
    PdcaConfig pdca;
    /// When set, overrides the B prescribed by the mode.
    std::optional<double> B_override;
    /// When set, replaces phi * epsilon as the tightened-mode shift.
    std::optional<double> tighten_eta_override;
    /// Target accuracy used by the large-b and tightened modes.
    double epsilon = 0.1;
    std::uint64_t seed_base = 0;
    int max_draws = 1000;
    int jobs = 1;
    HyperGrid grid;

    double tau_J() const;
    void validate() const;
};

Json experiment_config_to_json(const ExperimentConfig& cfg);

/// Keys missing from j keep their value from `base`; unknown keys are
/// rejected.
ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig base = {});

/// Draws P rows ~ Dirichlet(1), R ~ U[0, 1], C ~ Beta(0.2, 0.2) until the
/// LP at tau is feasible with an active cost constraint.
Cmdp<double> random_cmdp(std::uint64_t seed, const ExperimentConfig& cfg);

struct SweepRow {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double J_R_pdca = 0.0;
    double J_C_pdca = 0.0;
    double J_R_opt = 0.0;
    double J_C_opt = 0.0;
    double tau_J = 0.0;
    double phi = 0.0;

    /// Failed cells carry NaN metrics.
    bool failed() const;
};

struct SweepAggregate {
    std::size_t n = 0;
    /// Rows that completed.
    std::size_t count = 0;
    std::size_t failed = 0;
    double J_R_pdca_mean = 0.0;
    double J_R_pdca_stderr = 0.0;
    double J_C_pdca_mean = 0.0;
    double J_C_pdca_stderr = 0.0;
    double J_R_opt_mean = 0.0;
    double reward_gap_mean = 0.0;
    double reward_gap_stderr = 0.0;
    double tau_J = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepAggregate> aggregates;
};

/// Per-cell seeds: the CMDP seed is seed_base + repeat, the dataset seed is
/// derived from it and n.
std::uint64_t cmdp_seed(const ExperimentConfig& cfg, int repeat);
std::uint64_t dataset_seed(std::uint64_t cmdp_seed, std::size_t n);

/// One full cell. Errors propagate.
struct CellOutcome {
    SweepRow row;
    Cmdp<double> cmdp;
    Vector<double> tau;
    IterateLog log;
};

/// One (n, seed) cell with everything it produced.
CellOutcome run_cell_full(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed);
SweepRow run_cell(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed);

/// Runs every (n, repeat) cell not already in `existing`, cfg.jobs at a
/// time. `on_row` is called under a lock as each new row completes.
/// Failed cells become NaN rows. Rows come back sorted by (n, seed).
SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<SweepRow>& existing = {},
                      const std::function<void(const SweepRow&)>& on_row = {});

/// Mean and sample-std / sqrt(count) per n over the completed rows.
std::vector<SweepAggregate> aggregate_rows(const std::vector<SweepRow>& rows);

inline constexpr const char* kSweepHeader = "n,seed,J_R_pdca,J_C_pdca,J_R_opt,J_C_opt,tau_J,phi";

std::string sweep_row_csv(const SweepRow& row);
std::string sweep_rows_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_rows_from_csv(const std::string& text);
std::string aggregates_csv(const std::vector<SweepAggregate>& aggs);

struct GridPoint {
    double eta = 0.0;
    double B = 0.0;
    double c_inf = 0.0;
    double J_R_mean = 0.0;
    double J_C_mean = 0.0;
    /// Fraction of seeds with J_C <= tau_J.
    double feasible_fraction = 0.0;
};

/// Runs every (eta, B, c_inf) in cfg.grid at dataset size cfg.grid.n over
/// cfg.repeats seeds.
std::vector<GridPoint> grid_sweep(const ExperimentConfig& cfg);
std::string grid_csv(const std::vector<GridPoint>& points);

}  // namespace pdca
