#include "pdca/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "pdca/experiment.hpp"
#include "pdca/serialization.hpp"

namespace pdca::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error("UsageError", m) {}
};

/// Everything a command writes besides its primary output.
struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    Json config = Json::object();
    Json inputs = Json::object();
    Json outputs = Json::object();
    std::optional<std::uint64_t> seed;

    Json to_json() const {
        Json j;
        j["tool"] = "pdca";
        j["version"] = kVersion;
        j["command"] = command;
        j["argv"] = argv;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["seed"] = seed ? Json(*seed) : Json(nullptr);
        return j;
    }
};

fs::path manifest_path(const std::string& out) { return fs::path(out + ".manifest.json"); }

void write_manifest(const Manifest& m, const std::string& out) {
    write_text_file(manifest_path(out), m.to_json().dump(2) + "\n");
}

/// Writes `text` to `out` (and a manifest beside it), or to stdout.
void emit(const std::string& text, const std::string& out_path, Manifest& m, std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        return;
    }
    m.outputs["out"] = out_path;
    write_text_file(out_path, text);
    write_manifest(m, out_path);
}

Cmdp<double> load_cmdp(const std::string& path) { return cmdp_from_json(read_json_file(path)); }

Vector<double> thresholds(const std::vector<double>& values, Index n_costs) {
    if (values.size() == 1) return Vector<double>::Constant(n_costs, values.front());
    if (static_cast<Index>(values.size()) != n_costs)
        throw UsageError("expected one --tau value or one per cost function");
    return Eigen::Map<const Vector<double>>(values.data(), n_costs);
}

Json vec_json(const Vector<double>& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

/// Accepts a single policy {"probs"} or a mixture {"weights", "members"}.
MixturePolicy<double> load_any_policy(const std::string& path) {
    const auto j = read_json_file(path);
    if (j.is_object() && j.contains("members")) return mixture_from_json(j);
    return MixturePolicy<double>::uniform({policy_from_json(j)});
}

struct Command {
    CLI::App* app = nullptr;
    std::function<void()> run;
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Offline constrained RL: CMDP tools, LP ground truth and the primal-dual critic algorithm", "pdca"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);

    Manifest manifest;
    manifest.argv = args;
    std::map<std::string, std::function<void()>> handlers;

    // gen-cmdp
    std::uint64_t seed = 0;
    std::string out_path;
    std::string config_path;
    std::optional<Index> states, actions;
    std::optional<double> gamma, tau_flag;
    std::optional<std::string> tau_scale;
    auto* gen_cmdp = app.add_subcommand("gen-cmdp", "Draw a random CMDP with an active cost constraint");
    gen_cmdp->add_option("--seed", seed, "Random seed")->required();
    gen_cmdp->add_option("--out", out_path, "Output CMDP JSON")->required();
    gen_cmdp->add_option("--config", config_path, "Experiment config JSON");
    gen_cmdp->add_option("--states", states, "Number of states");
    gen_cmdp->add_option("--actions", actions, "Number of actions");
    gen_cmdp->add_option("--gamma", gamma, "Discount factor");
    gen_cmdp->add_option("--tau", tau_flag, "Cost threshold");
    gen_cmdp->add_option("--tau-scale", tau_scale, "normalized or value");

    auto experiment_config = [&] {
        ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = experiment_config_from_json(read_json_file(config_path));
            manifest.inputs["config"] = config_path;
        }
        if (states) cfg.n_states = *states;
        if (actions) cfg.n_actions = *actions;
        if (gamma) cfg.gamma = *gamma;
        if (tau_flag) cfg.tau = *tau_flag;
        if (tau_scale) cfg.tau_scale = parse_tau_scale(*tau_scale);
        cfg.validate();
        return cfg;
    };

    handlers["gen-cmdp"] = [&] {
        const auto cfg = experiment_config();
        const auto cmdp = random_cmdp(seed, cfg);
        manifest.seed = seed;
        manifest.config = experiment_config_to_json(cfg);
        emit(cmdp_to_json(cmdp).dump(2) + "\n", out_path, manifest, out);
    };

    // solve / slater
    std::string cmdp_path;
    std::vector<double> tau_values;
    auto* solve = app.add_subcommand("solve", "Solve the occupancy LP for the optimal constrained policy");
    auto* slater = app.add_subcommand("slater", "Compute the Slater margin phi");
    for (auto* sub : {solve, slater}) {
        sub->add_option("--cmdp", cmdp_path, "CMDP JSON")->required();
        sub->add_option("--tau", tau_values, "Thresholds on the value scale")->required();
        sub->add_option("--out", out_path, "Output report (default: stdout)");
    }

    handlers["solve"] = [&] {
        const auto cmdp = load_cmdp(cmdp_path);
        const auto tau = thresholds(tau_values, cmdp.n_costs());
        manifest.inputs["cmdp"] = cmdp_path;
        manifest.config["tau_J"] = vec_json(tau);
        const auto sol = solve_cmdp_lp(cmdp, tau);
        Json report = lp_solution_to_json(sol);
        if (sol.status == LpStatus::Optimal) {
            const auto policy = extract_policy(sol.occupancy);
            Vector<double> jc(cmdp.n_costs());
            for (Index i = 0; i < cmdp.n_costs(); ++i) jc(i) = policy_value(cmdp, policy, cmdp.cost(i));
            report["J_C"] = vec_json(jc);
            report["policy"] = policy_to_json(policy);
        }
        emit(dump_report(report) + "\n", out_path, manifest, out);
        if (sol.status != LpStatus::Optimal) throw Infeasible("thresholds admit no feasible policy");
    };

    handlers["slater"] = [&] {
        const auto cmdp = load_cmdp(cmdp_path);
        const auto tau = thresholds(tau_values, cmdp.n_costs());
        manifest.inputs["cmdp"] = cmdp_path;
        manifest.config["tau_J"] = vec_json(tau);
        const auto info = slater_margin(cmdp, tau);
        Json report = slater_to_json(info);
        if (info.margin_phi > 0) report["B_standard"] = 1.0 + 1.0 / info.margin_phi;
        emit(dump_report(report) + "\n", out_path, manifest, out);
        if (!info.feasible) throw Infeasible("no policy satisfies the thresholds");
    };

    // gen-data
    double beta = 0.5;
    std::size_t n_samples = 0;
    std::string policy_path;
    auto* gen_data = app.add_subcommand("gen-data", "Sample an offline dataset from a behavior mixture");
    gen_data->add_option("--cmdp", cmdp_path, "CMDP JSON")->required();
    gen_data->add_option("--beta", beta, "Weight of the second policy in the behavior mixture")->capture_default_str();
    gen_data->add_option("--n", n_samples, "Number of transitions")->required();
    gen_data->add_option("--seed", seed, "Random seed")->required();
    gen_data->add_option("--out", out_path, "Output dataset (JSON lines)")->required();
    gen_data->add_option("--tau", tau_values, "Thresholds defining the optimal policy (default 0.5 / (1 - gamma))");
    gen_data->add_option("--policy", policy_path, "Policy mixed with the uniform policy instead of the LP optimum");

    handlers["gen-data"] = [&] {
        const auto cmdp = load_cmdp(cmdp_path);
        manifest.inputs["cmdp"] = cmdp_path;
        manifest.seed = seed;
        Json behavior;
        behavior["kind"] = "uniform-mixture";
        behavior["beta"] = beta;
        std::optional<Policy<double>> target;
        if (!policy_path.empty()) {
            target = policy_from_json(read_json_file(policy_path));
            manifest.inputs["policy"] = policy_path;
            behavior["policy"] = policy_path;
        } else {
            const auto tau = tau_values.empty()
                                 ? Vector<double>::Constant(cmdp.n_costs(), 0.5 / (1.0 - cmdp.gamma()))
                                 : thresholds(tau_values, cmdp.n_costs());
            const auto sol = solve_cmdp_lp(cmdp, tau);
            if (sol.status != LpStatus::Optimal) throw Infeasible("thresholds admit no feasible policy");
            target = extract_policy(sol.occupancy);
            behavior["tau_J"] = vec_json(tau);
        }
        manifest.config["beta"] = beta;
        manifest.config["n"] = n_samples;
        const auto d_mu = behavior_distribution(cmdp, *target, beta);
        const auto data = sample_dataset(cmdp, d_mu, n_samples, seed, behavior.dump());
        emit(dataset_to_string(data), out_path, manifest, out);
    };

    // run-pdca
    std::string data_path, mode_name = "standard", log_path;
    std::optional<double> b_flag;
    int K = 500;
    double eta = 5.0, c_inf = 2.0, epsilon = 0.1;
    std::optional<double> critic_step_size;
    std::optional<int> critic_steps;
    auto* run = app.add_subcommand("run-pdca", "Run the primal-dual critic algorithm on a dataset");
    run->add_option("--cmdp", cmdp_path, "CMDP JSON (reward and cost tables, gamma, s0, Slater margin)")->required();
    run->add_option("--data", data_path, "Dataset (JSON lines)")->required();
    run->add_option("--mode", mode_name, "standard, large-b or tightened")->capture_default_str();
    run->add_option("--tau", tau_values, "Thresholds on the value scale")->required();
    run->add_option("--b", b_flag, "Radius of the lambda set (default: from the mode)");
    run->add_option("--k", K, "Number of iterations")->capture_default_str();
    run->add_option("--eta", eta, "NPG learning rate")->capture_default_str();
    run->add_option("--c-inf", c_inf, "Box bound of the weight class")->capture_default_str();
    run->add_option("--epsilon", epsilon, "Target accuracy for large-b and tightened modes")->capture_default_str();
    run->add_option("--critic-steps", critic_steps, "Subgradient steps per critic solve");
    run->add_option("--critic-step-size", critic_step_size, "Initial critic step size");
    run->add_option("--log", log_path, "Iterate log (JSON lines)");
    run->add_option("--out", out_path, "Output mixture policy JSON (default: stdout)");

    handlers["run-pdca"] = [&] {
        const auto cmdp = load_cmdp(cmdp_path);
        const auto data = read_dataset(data_path);
        manifest.inputs["cmdp"] = cmdp_path;
        manifest.inputs["data"] = data_path;
        PdcaConfig cfg;
        cfg.mode = parse_mode(mode_name);
        cfg.tau_J = thresholds(tau_values, cmdp.n_costs());
        cfg.K = K;
        cfg.eta_npg = eta;
        cfg.fclass.c_inf_w = c_inf;
        if (critic_steps) cfg.critic.n_steps = *critic_steps;
        if (critic_step_size) cfg.critic.step_size = *critic_step_size;
        const bool needs_phi = !b_flag || cfg.mode == PdcaMode::Tightened;
        const double phi = needs_phi ? slater_margin(cmdp, cfg.tau_J).margin_phi : 0.0;
        if (needs_phi || cfg.mode == PdcaMode::LargeB) apply_mode_parameters(cfg, phi, epsilon, cmdp.gamma());
        if (b_flag) cfg.B = *b_flag;

        Json resolved;
        resolved["mode"] = to_string(cfg.mode);
        resolved["tau_J"] = vec_json(cfg.tau_J);
        resolved["tau_effective"] = vec_json(effective_thresholds(cfg));
        resolved["B"] = cfg.B;
        resolved["K"] = cfg.K;
        resolved["eta"] = cfg.eta_npg;
        resolved["c_inf"] = cfg.fclass.c_inf_w;
        resolved["epsilon"] = epsilon;
        resolved["critic_steps"] = cfg.critic.n_steps;
        resolved["critic_step_size"] = cfg.critic.step_size;
        manifest.config = resolved;
        manifest.seed = data.meta.seed;

        const auto log = run_pdca(data, cmdp.reward(), cmdp.costs(), cmdp.gamma(), cmdp.initial_state(), cfg);
        if (!log_path.empty()) {
            write_text_file(log_path, iterate_log_to_jsonl(log));
            manifest.outputs["log"] = log_path;
        }
        emit(mixture_to_json(log.mixture).dump() + "\n", out_path, manifest, out);
        if (!out_path.empty()) {
            Json summary = resolved;
            summary["lambda_final"] = vec_json(log.records.back().lambda);
            summary["ope_final"] = vec_json(log.records.back().ope_estimates);
            out << dump_report(summary) << "\n";
        }
    };

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a policy or mixture exactly");
    eval->add_option("--cmdp", cmdp_path, "CMDP JSON")->required();
    eval->add_option("--policy", policy_path, "Policy or mixture JSON")->required();
    eval->add_option("--tau", tau_values, "Thresholds; adds feasibility and the LP reward gap");
    eval->add_option("--out", out_path, "Output report (default: stdout)");

    handlers["eval"] = [&] {
        const auto cmdp = load_cmdp(cmdp_path);
        const auto mix = load_any_policy(policy_path);
        manifest.inputs["cmdp"] = cmdp_path;
        manifest.inputs["policy"] = policy_path;
        Json report;
        report["J_R"] = policy_value(cmdp, mix, cmdp.reward());
        Vector<double> jc(cmdp.n_costs());
        for (Index i = 0; i < cmdp.n_costs(); ++i) jc(i) = policy_value(cmdp, mix, cmdp.cost(i));
        report["J_C"] = vec_json(jc);
        if (!tau_values.empty()) {
            const auto tau = thresholds(tau_values, cmdp.n_costs());
            manifest.config["tau_J"] = vec_json(tau);
            report["feasible"] = ((jc - tau).array() <= 0.0).all();
            const auto sol = solve_cmdp_lp(cmdp, tau);
            if (sol.status == LpStatus::Optimal) {
                report["J_R_opt"] = sol.value_J;
                report["reward_gap"] = sol.value_J - report["J_R"].get<double>();
            }
        }
        emit(dump_report(report) + "\n", out_path, manifest, out);
    };

    // sweep
    std::optional<int> jobs;
    bool resume = false, grid = false;
    auto* sweep = app.add_subcommand("sweep", "Dataset-size sweep over repeated random CMDPs");
    sweep->add_option("--config", config_path, "Experiment config JSON")->required();
    sweep->add_option("--out", out_path, "Per-row CSV; aggregates go to <stem>.agg.csv")->required();
    sweep->add_option("--jobs", jobs, "Parallel cells");
    sweep->add_flag("--resume", resume, "Keep rows already present in --out");
    sweep->add_flag("--grid", grid, "Run the hyperparameter grid instead and write it to --out");

    handlers["sweep"] = [&] {
        auto cfg = experiment_config_from_json(read_json_file(config_path));
        if (jobs) cfg.jobs = *jobs;
        cfg.validate();
        manifest.inputs["config"] = config_path;
        manifest.config = experiment_config_to_json(cfg);
        manifest.config.erase("jobs");
        manifest.seed = cfg.seed_base;
        if (grid) {
            emit(grid_csv(grid_sweep(cfg)), out_path, manifest, out);
            return;
        }
        std::vector<SweepRow> existing;
        if (resume && fs::exists(out_path)) existing = sweep_rows_from_csv(read_text_file(out_path));
        {
            // Rows are appended as they finish so an interrupted sweep can resume.
            std::ofstream partial(out_path, std::ios::binary | std::ios::trunc);
            if (!partial) throw IoError("cannot open " + out_path + " for writing");
            partial << sweep_rows_csv(existing) << std::flush;
            const auto result = run_sweep(cfg, existing, [&](const SweepRow& row) {
                partial << sweep_row_csv(row) << '\n' << std::flush;
            });
            partial.close();
            const auto agg_path = fs::path(out_path).replace_extension(".agg.csv").string();
            write_text_file(agg_path, aggregates_csv(result.aggregates));
            manifest.outputs["aggregate"] = agg_path;
            emit(sweep_rows_csv(result.rows), out_path, manifest, out);
        }
    };

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "Saddle-point diagnostics of an iterate log");
    diagnose->add_option("--cmdp", cmdp_path, "CMDP JSON")->required();
    diagnose->add_option("--log", log_path, "Iterate log written by run-pdca --log")->required();
    diagnose->add_option("--tau", tau_values, "Thresholds (default: from the log)");
    diagnose->add_option("--b", b_flag, "Radius of the lambda set (default: from the log)");
    diagnose->add_option("--out", out_path, "Output report (default: stdout)");

    handlers["diagnose"] = [&] {
        const auto cmdp = load_cmdp(cmdp_path);
        const auto log = iterate_log_from_jsonl(read_text_file(log_path));
        manifest.inputs["cmdp"] = cmdp_path;
        manifest.inputs["log"] = log_path;
        const auto tau = tau_values.empty() ? log.tau_J : thresholds(tau_values, cmdp.n_costs());
        const double B = b_flag ? *b_flag : log.B;
        manifest.config["tau_J"] = vec_json(tau);
        manifest.config["B"] = B;
        const auto report = saddle_diagnostics(cmdp, log, log.mixture, tau, B);
        emit(dump_report(saddle_report_to_json(report)) + "\n", out_path, manifest, out);
    };

    // replay
    std::string manifest_file;
    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("--manifest", manifest_file, "Manifest JSON")->required();

    int replay_code = 0;
    handlers["replay"] = [&] {
        const auto j = read_json_file(manifest_file);
        if (!j.is_object() || !j.contains("argv") || !j.at("argv").is_array())
            throw ParseError("manifest has no argv");
        std::vector<std::string> argv;
        try {
            argv = j.at("argv").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            throw ParseError("manifest argv must be an array of strings");
        }
        if (argv.empty() || argv.front() == "replay") throw ParseError("manifest does not record a command");
        replay_code = dispatch(argv, out, err);
    };

    auto diagnostic = [&](const std::string& kind, const std::string& message, int code) {
        Json j;
        j["error"] = kind;
        j["message"] = message;
        j["exit_code"] = code;
        err << j.dump() << std::endl;
        return code;
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return diagnostic("UsageError", e.what(), 2);
    }

    const auto* chosen = app.get_subcommands().front();
    manifest.command = chosen->get_name();
    try {
        handlers.at(manifest.command)();
        return replay_code;
    } catch (const Error& e) {
        const int code = e.is_domain_error() || dynamic_cast<const InternalError*>(&e) ? 1 : 2;
        return diagnostic(e.kind(), e.what(), code);
    } catch (const std::exception& e) {
        return diagnostic("InternalError", e.what(), 1);
    }
}

}  // namespace pdca::cli
