#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "pdca/lp.hpp"
#include "pdca/pdca.hpp"

namespace pdca {

using Json = nlohmann::ordered_json;

/// {n_states, n_actions, gamma, initial_state, transition: P[s][a][s'],
///  reward: R[s][a], costs: C[i][s][a]} in this field order. Floats are
/// written with round-trip precision so validation survives a reload.
Json cmdp_to_json(const Cmdp<double>& cmdp);
Cmdp<double> cmdp_from_json(const Json& j);

/// {"probs": [[...]]}
Json policy_to_json(const Policy<double>& pi);
Policy<double> policy_from_json(const Json& j);

/// {"weights": [...], "members": [[[...]]]}
Json mixture_to_json(const MixturePolicy<double>& mix);
MixturePolicy<double> mixture_from_json(const Json& j);

Json lp_solution_to_json(const LpSolution& sol);
Json slater_to_json(const SlaterInfo& info);
Json saddle_report_to_json(const SaddleReport& report);

/// JSON-lines: a header record, one record per iteration, then the final
/// mixture.
std::string iterate_log_to_jsonl(const IterateLog& log);
IterateLog iterate_log_from_jsonl(const std::string& text);

/// Reports are printed with 9 significant digits; this rounds a value the
/// same way before it is placed in a JSON document.
double round_significant(double value, int digits = 9);

/// Dump with 9-significant-digit floats.
std::string dump_report(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);

}  // namespace pdca
