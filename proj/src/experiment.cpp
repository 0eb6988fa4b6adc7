#include "pdca/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "pdca/random.hpp"

namespace pdca {

std::string to_string(TauScale scale) { return scale == TauScale::Normalized ? "normalized" : "value"; }

TauScale parse_tau_scale(const std::string& name) {
    if (name == "normalized") return TauScale::Normalized;
    if (name == "value") return TauScale::Value;
    throw ConfigError("unknown tau_scale '" + name + "' (expected normalized or value)");
}

double ExperimentConfig::tau_J() const { return tau_scale == TauScale::Normalized ? tau / (1.0 - gamma) : tau; }

void ExperimentConfig::validate() const {
    if (n_states < 1 || n_actions < 1) throw ConfigError("n_states and n_actions must be positive");
    if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
    if (n_costs < 1) throw ConfigError("n_costs must be at least 1");
    if (!(beta >= 0 && beta <= 1)) throw ConfigError("beta must lie in [0, 1]");
    if (dataset_sizes.empty()) throw ConfigError("dataset_sizes must be nonempty");
    for (auto n : dataset_sizes)
        if (n == 0) throw ConfigError("dataset sizes must be positive");
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    if (!(tau_J() >= 0 && tau_J() <= 1.0 / (1.0 - gamma))) throw ConfigError("tau lies outside the cost range");
    if (pdca.K < 1) throw ConfigError("K must be at least 1");
    if (!(pdca.eta_npg >= 0)) throw ConfigError("eta must be nonnegative");
    if (B_override && !(*B_override >= 0)) throw ConfigError("B must be nonnegative");
    if (tighten_eta_override && !(*tighten_eta_override >= 0)) throw ConfigError("tighten_eta must be nonnegative");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
    if (max_draws < 1) throw ConfigError("max_draws must be at least 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    pdca.critic.validate();
    if (!(pdca.fclass.c_inf_w >= 0)) throw ConfigError("c_inf must be nonnegative");
}

namespace {

template <typename T>
T get_as(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config field \"") + key + "\" has the wrong type");
    }
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError(std::string("unknown key \"") + key + "\" in " + where);
    }
}

std::string fmt9(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

/// Runs fn(0..count-1) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& xs) {
    MeanStderr out;
    if (xs.empty()) return {nan(), nan()};
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
    return out;
}

SweepRow failed_row(std::size_t n, std::uint64_t seed, double tau_J) {
    return {n, seed, nan(), nan(), nan(), nan(), tau_J, nan()};
}

}  // namespace

Json experiment_config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["n_states"] = cfg.n_states;
    j["n_actions"] = cfg.n_actions;
    j["gamma"] = cfg.gamma;
    j["tau"] = cfg.tau;
    j["tau_scale"] = to_string(cfg.tau_scale);
    j["n_costs"] = cfg.n_costs;
    j["beta"] = cfg.beta;
    j["dataset_sizes"] = cfg.dataset_sizes;
    j["repeats"] = cfg.repeats;
    j["seed_base"] = cfg.seed_base;
    j["max_draws"] = cfg.max_draws;
    j["epsilon"] = cfg.epsilon;
    j["jobs"] = cfg.jobs;
    Json p;
    p["K"] = cfg.pdca.K;
    p["mode"] = to_string(cfg.pdca.mode);
    p["B"] = cfg.B_override ? Json(*cfg.B_override) : Json(nullptr);
    p["tighten_eta"] = cfg.tighten_eta_override ? Json(*cfg.tighten_eta_override) : Json(nullptr);
    p["eta"] = cfg.pdca.eta_npg;
    p["c_inf"] = cfg.pdca.fclass.c_inf_w;
    p["f_upper"] = cfg.pdca.fclass.f_upper;
    p["critic_step_size"] = cfg.pdca.critic.step_size;
    p["critic_steps"] = cfg.pdca.critic.n_steps;
    p["warm_start"] = cfg.pdca.warm_start;
    j["pdca"] = std::move(p);
    Json g;
    g["eta"] = cfg.grid.eta;
    g["B"] = cfg.grid.B;
    g["c_inf"] = cfg.grid.c_inf;
    g["n"] = cfg.grid.n;
    j["grid"] = std::move(g);
    return j;
}

ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig cfg) {
    reject_unknown(j,
                   {"n_states", "n_actions", "gamma", "tau", "tau_scale", "n_costs", "beta", "dataset_sizes",
                    "repeats", "seed_base", "max_draws", "epsilon", "jobs", "pdca", "grid"},
                   "config");
    if (j.contains("n_states")) cfg.n_states = get_as<Index>(j, "n_states");
    if (j.contains("n_actions")) cfg.n_actions = get_as<Index>(j, "n_actions");
    if (j.contains("gamma")) cfg.gamma = get_as<double>(j, "gamma");
    if (j.contains("tau")) cfg.tau = get_as<double>(j, "tau");
    if (j.contains("tau_scale")) cfg.tau_scale = parse_tau_scale(get_as<std::string>(j, "tau_scale"));
    if (j.contains("n_costs")) cfg.n_costs = get_as<Index>(j, "n_costs");
    if (j.contains("beta")) cfg.beta = get_as<double>(j, "beta");
    if (j.contains("dataset_sizes")) cfg.dataset_sizes = get_as<std::vector<std::size_t>>(j, "dataset_sizes");
    if (j.contains("repeats")) cfg.repeats = get_as<int>(j, "repeats");
    if (j.contains("seed_base")) cfg.seed_base = get_as<std::uint64_t>(j, "seed_base");
    if (j.contains("max_draws")) cfg.max_draws = get_as<int>(j, "max_draws");
    if (j.contains("epsilon")) cfg.epsilon = get_as<double>(j, "epsilon");
    if (j.contains("jobs")) cfg.jobs = get_as<int>(j, "jobs");
    if (j.contains("pdca")) {
        const auto& p = j.at("pdca");
        reject_unknown(p,
                       {"K", "mode", "B", "tighten_eta", "eta", "c_inf", "f_upper", "critic_step_size", "critic_steps",
                        "warm_start"},
                       "pdca");
        if (p.contains("K")) cfg.pdca.K = get_as<int>(p, "K");
        if (p.contains("mode")) cfg.pdca.mode = parse_mode(get_as<std::string>(p, "mode"));
        if (p.contains("B")) {
            if (p.at("B").is_null())
                cfg.B_override.reset();
            else
                cfg.B_override = get_as<double>(p, "B");
        }
        if (p.contains("tighten_eta")) {
            if (p.at("tighten_eta").is_null())
                cfg.tighten_eta_override.reset();
            else
                cfg.tighten_eta_override = get_as<double>(p, "tighten_eta");
        }
        if (p.contains("eta")) cfg.pdca.eta_npg = get_as<double>(p, "eta");
        if (p.contains("c_inf")) cfg.pdca.fclass.c_inf_w = get_as<double>(p, "c_inf");
        if (p.contains("f_upper")) cfg.pdca.fclass.f_upper = get_as<double>(p, "f_upper");
        if (p.contains("critic_step_size")) cfg.pdca.critic.step_size = get_as<double>(p, "critic_step_size");
        if (p.contains("critic_steps")) cfg.pdca.critic.n_steps = get_as<int>(p, "critic_steps");
        if (p.contains("warm_start")) cfg.pdca.warm_start = get_as<bool>(p, "warm_start");
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        reject_unknown(g, {"eta", "B", "c_inf", "n"}, "grid");
        if (g.contains("eta")) cfg.grid.eta = get_as<std::vector<double>>(g, "eta");
        if (g.contains("B")) cfg.grid.B = get_as<std::vector<double>>(g, "B");
        if (g.contains("c_inf")) cfg.grid.c_inf = get_as<std::vector<double>>(g, "c_inf");
        if (g.contains("n")) cfg.grid.n = get_as<std::size_t>(g, "n");
    }
    cfg.validate();
    return cfg;
}

Cmdp<double> random_cmdp(std::uint64_t seed, const ExperimentConfig& cfg) {
    cfg.validate();
    const Index S = cfg.n_states;
    const Index A = cfg.n_actions;
    const Vector<double> tau = Vector<double>::Constant(cfg.n_costs, cfg.tau_J());
    Rng rng(seed);
    for (int draw = 0; draw < cfg.max_draws; ++draw) {
        Table<double> P(S * A, S);
        for (Index i = 0; i < S * A; ++i) {
            const auto row = rng.dirichlet(static_cast<std::size_t>(S), 1.0);
            for (Index sn = 0; sn < S; ++sn) P(i, sn) = row[static_cast<std::size_t>(sn)];
        }
        Table<double> R(S, A);
        for (Index k = 0; k < S * A; ++k) R.data()[k] = rng.uniform();
        std::vector<Table<double>> costs;
        for (Index c = 0; c < cfg.n_costs; ++c) {
            Table<double> C(S, A);
            for (Index k = 0; k < S * A; ++k) C.data()[k] = rng.beta(0.2, 0.2);
            costs.push_back(std::move(C));
        }
        Cmdp<double> cmdp(std::move(P), std::move(R), std::move(costs), cfg.gamma, 0);
        const auto lp = solve_cmdp_lp(cmdp, tau);
        if (lp.status != LpStatus::Optimal) continue;
        for (Index c = 0; c < cfg.n_costs; ++c)
            if (std::abs(tau(c) - expectation(lp.occupancy, cmdp.cost(c)) / (1.0 - cfg.gamma)) <= 1e-6)
                return cmdp;
    }
    throw RetryExhausted("no CMDP with an active cost constraint within " + std::to_string(cfg.max_draws) +
                         " draws");
}

bool SweepRow::failed() const { return std::isnan(J_R_pdca) || std::isnan(J_C_pdca); }

std::uint64_t cmdp_seed(const ExperimentConfig& cfg, int repeat) {
    return cfg.seed_base + static_cast<std::uint64_t>(repeat);
}

std::uint64_t dataset_seed(std::uint64_t seed, std::size_t n) { return derive_seed(seed, n, 1); }

CellOutcome run_cell_full(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
    auto cmdp = random_cmdp(seed, cfg);
    const double tau_J = cfg.tau_J();
    const Vector<double> tau = Vector<double>::Constant(cfg.n_costs, tau_J);

    const auto lp = solve_cmdp_lp(cmdp, tau);
    if (lp.status != LpStatus::Optimal) throw Infeasible("thresholds admit no feasible policy");
    const auto slater = slater_margin(cmdp, tau);
    const auto optimal = extract_policy(lp.occupancy);

    const auto d_mu = behavior_distribution(cmdp, optimal, cfg.beta);
    Json behavior;
    behavior["kind"] = "uniform-optimal-mixture";
    behavior["beta"] = cfg.beta;
    const auto data = sample_dataset(cmdp, d_mu, n, dataset_seed(seed, n), behavior.dump());

    PdcaConfig pc = cfg.pdca;
    pc.tau_J = tau;
    apply_mode_parameters(pc, slater.margin_phi, cfg.epsilon, cfg.gamma);
    if (cfg.B_override) pc.B = *cfg.B_override;
    if (cfg.tighten_eta_override && pc.mode == PdcaMode::Tightened) pc.tighten_eta = *cfg.tighten_eta_override;
    auto log = run_pdca(data, cmdp.reward(), cmdp.costs(), cmdp.gamma(), cmdp.initial_state(), pc);

    SweepRow row;
    row.n = n;
    row.seed = seed;
    row.J_R_pdca = policy_value(cmdp, log.mixture, cmdp.reward());
    row.J_C_pdca = policy_value(cmdp, log.mixture, cmdp.cost(0));
    row.J_R_opt = lp.value_J;
    row.J_C_opt = expectation(lp.occupancy, cmdp.cost(0)) / (1.0 - cmdp.gamma());
    row.tau_J = tau_J;
    row.phi = slater.margin_phi;
    return {row, std::move(cmdp), tau, std::move(log)};
}

SweepRow run_cell(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
    return run_cell_full(cfg, n, seed).row;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<SweepRow>& existing,
                      const std::function<void(const SweepRow&)>& on_row) {
    cfg.validate();
    std::map<std::pair<std::size_t, std::uint64_t>, SweepRow> rows;
    for (const auto& r : existing) rows.emplace(std::make_pair(r.n, r.seed), r);

    std::vector<std::pair<std::size_t, std::uint64_t>> todo;
    for (auto n : cfg.dataset_sizes)
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            const auto key = std::make_pair(n, cmdp_seed(cfg, rep));
            if (!rows.contains(key) && std::find(todo.begin(), todo.end(), key) == todo.end())
                todo.push_back(key);
        }

    std::mutex mu;
    parallel_for(todo.size(), cfg.jobs, [&](std::size_t i) {
        const auto [n, seed] = todo[i];
        SweepRow row;
        try {
            row = run_cell(cfg, n, seed);
        } catch (const Error&) {
            row = failed_row(n, seed, cfg.tau_J());
        }
        const std::lock_guard lock(mu);
        rows.emplace(std::make_pair(n, seed), row);
        if (on_row) on_row(row);
    });

    SweepResult result;
    for (auto& [_, r] : rows) result.rows.push_back(r);
    result.aggregates = aggregate_rows(result.rows);
    return result;
}

std::vector<SweepAggregate> aggregate_rows(const std::vector<SweepRow>& rows) {
    std::map<std::size_t, std::vector<const SweepRow*>> by_n;
    for (const auto& r : rows) by_n[r.n].push_back(&r);
    std::vector<SweepAggregate> out;
    for (const auto& [n, group] : by_n) {
        SweepAggregate a;
        a.n = n;
        std::vector<double> jr, jc, jopt, gap;
        for (const auto* r : group) {
            a.tau_J = r->tau_J;
            if (r->failed()) {
                ++a.failed;
                continue;
            }
            jr.push_back(r->J_R_pdca);
            jc.push_back(r->J_C_pdca);
            jopt.push_back(r->J_R_opt);
            gap.push_back(r->J_R_opt - r->J_R_pdca);
        }
        a.count = jr.size();
        const auto r_stats = mean_stderr(jr);
        const auto c_stats = mean_stderr(jc);
        const auto g_stats = mean_stderr(gap);
        a.J_R_pdca_mean = r_stats.mean;
        a.J_R_pdca_stderr = r_stats.stderr_;
        a.J_C_pdca_mean = c_stats.mean;
        a.J_C_pdca_stderr = c_stats.stderr_;
        a.J_R_opt_mean = mean_stderr(jopt).mean;
        a.reward_gap_mean = g_stats.mean;
        a.reward_gap_stderr = g_stats.stderr_;
        out.push_back(a);
    }
    return out;
}

std::string sweep_row_csv(const SweepRow& r) {
    std::ostringstream os;
    os << r.n << ',' << r.seed << ',' << fmt9(r.J_R_pdca) << ',' << fmt9(r.J_C_pdca) << ',' << fmt9(r.J_R_opt)
       << ',' << fmt9(r.J_C_opt) << ',' << fmt9(r.tau_J) << ',' << fmt9(r.phi);
    return os.str();
}

std::string sweep_rows_csv(const std::vector<SweepRow>& rows) {
    std::string out = std::string(kSweepHeader) + '\n';
    for (const auto& r : rows) out += sweep_row_csv(r) + '\n';
    return out;
}

std::vector<SweepRow> sweep_rows_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != kSweepHeader) throw ParseError("unexpected CSV header", line_no);
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        // A row cut short by an interrupted write is dropped and recomputed.
        if (cells.size() != 8) continue;
        try {
            std::size_t used = 0;
            SweepRow r;
            r.n = std::stoull(cells[0], &used);
            r.seed = std::stoull(cells[1]);
            double* fields[] = {&r.J_R_pdca, &r.J_C_pdca, &r.J_R_opt, &r.J_C_opt, &r.tau_J, &r.phi};
            for (std::size_t k = 0; k < 6; ++k) *fields[k] = std::stod(cells[k + 2]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw ParseError("malformed CSV row", line_no);
        }
    }
    return rows;
}

std::string aggregates_csv(const std::vector<SweepAggregate>& aggs) {
    std::ostringstream os;
    os << "n,count,failed,J_R_pdca_mean,J_R_pdca_stderr,J_C_pdca_mean,J_C_pdca_stderr,J_R_opt_mean,"
          "reward_gap_mean,reward_gap_stderr,tau_J\n";
    for (const auto& a : aggs)
        os << a.n << ',' << a.count << ',' << a.failed << ',' << fmt9(a.J_R_pdca_mean) << ','
           << fmt9(a.J_R_pdca_stderr) << ',' << fmt9(a.J_C_pdca_mean) << ',' << fmt9(a.J_C_pdca_stderr) << ','
           << fmt9(a.J_R_opt_mean) << ',' << fmt9(a.reward_gap_mean) << ',' << fmt9(a.reward_gap_stderr) << ','
           << fmt9(a.tau_J) << '\n';
    return os.str();
}

std::vector<GridPoint> grid_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<GridPoint> points;
    for (double eta : cfg.grid.eta)
        for (double B : cfg.grid.B)
            for (double c : cfg.grid.c_inf) points.push_back({eta, B, c});

    const auto reps = static_cast<std::size_t>(cfg.repeats);
    std::vector<SweepRow> cells(points.size() * reps);
    parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
        const auto& p = points[i / reps];
        ExperimentConfig local = cfg;
        local.pdca.eta_npg = p.eta;
        local.pdca.fclass.c_inf_w = p.c_inf;
        local.B_override = p.B;
        const auto seed = cmdp_seed(cfg, static_cast<int>(i % reps));
        try {
            cells[i] = run_cell(local, cfg.grid.n, seed);
        } catch (const Error&) {
            cells[i] = failed_row(cfg.grid.n, seed, cfg.tau_J());
        }
    });

    for (std::size_t p = 0; p < points.size(); ++p) {
        std::vector<double> jr, jc;
        std::size_t feasible = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& row = cells[p * reps + r];
            if (row.failed()) continue;
            jr.push_back(row.J_R_pdca);
            jc.push_back(row.J_C_pdca);
            if (row.J_C_pdca <= row.tau_J) ++feasible;
        }
        points[p].J_R_mean = mean_stderr(jr).mean;
        points[p].J_C_mean = mean_stderr(jc).mean;
        points[p].feasible_fraction = static_cast<double>(feasible) / static_cast<double>(reps);
    }
    return points;
}

std::string grid_csv(const std::vector<GridPoint>& points) {
    std::ostringstream os;
    os << "eta,B,c_inf,J_R_mean,J_C_mean,feasible_fraction\n";
    for (const auto& p : points)
        os << fmt9(p.eta) << ',' << fmt9(p.B) << ',' << fmt9(p.c_inf) << ',' << fmt9(p.J_R_mean) << ','
           << fmt9(p.J_C_mean) << ',' << fmt9(p.feasible_fraction) << '\n';
    return os.str();
}

}  // namespace pdca
