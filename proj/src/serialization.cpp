#include "pdca/serialization.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pdca {

namespace {

Json table_to_json(const Table<double>& t) {
    Json rows = Json::array();
    for (Index s = 0; s < t.rows(); ++s) {
        Json row = Json::array();
        for (Index a = 0; a < t.cols(); ++a) row.push_back(t(s, a));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_to_json(const Vector<double>& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Table<double> table_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ParseError(std::string(what) + " must be a non-empty array of arrays");
    const auto rows = static_cast<Index>(j.size());
    const auto cols = static_cast<Index>(j.front().size());
    Table<double> t(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw ParseError(std::string(what) + " is ragged");
        for (Index c = 0; c < cols; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw ParseError(std::string(what) + " has a non-numeric entry");
            t(r, c) = v.get<double>();
        }
    }
    return t;
}

Vector<double> vector_from_json(const Json& j, const char* what) {
    if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
    Vector<double> v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError(std::string(what) + " has a non-numeric entry");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

template <typename T>
T scalar_field(const Json& j, const char* key) {
    const auto& v = field(j, key);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field \"") + key + "\" has the wrong type");
    }
}

void round_in_place(Json& j) {
    if (j.is_number_float()) {
        j = round_significant(j.get<double>());
    } else if (j.is_array() || j.is_object()) {
        for (auto& child : j) round_in_place(child);
    }
}

}  // namespace

Json cmdp_to_json(const Cmdp<double>& cmdp) {
    const Index S = cmdp.n_states();
    const Index A = cmdp.n_actions();
    Json j;
    j["n_states"] = S;
    j["n_actions"] = A;
    j["gamma"] = cmdp.gamma();
    j["initial_state"] = cmdp.initial_state();
    Json transition = Json::array();
    for (Index s = 0; s < S; ++s) {
        Json per_action = Json::array();
        for (Index a = 0; a < A; ++a) {
            Json row = Json::array();
            for (Index sn = 0; sn < S; ++sn) row.push_back(cmdp.transition()(flat_index(s, a, A), sn));
            per_action.push_back(std::move(row));
        }
        transition.push_back(std::move(per_action));
    }
    j["transition"] = std::move(transition);
    j["reward"] = table_to_json(cmdp.reward());
    Json costs = Json::array();
    for (const auto& c : cmdp.costs()) costs.push_back(table_to_json(c));
    j["costs"] = std::move(costs);
    return j;
}

Cmdp<double> cmdp_from_json(const Json& j) {
    const auto S = scalar_field<Index>(j, "n_states");
    const auto A = scalar_field<Index>(j, "n_actions");
    const auto gamma = scalar_field<double>(j, "gamma");
    const auto s0 = scalar_field<Index>(j, "initial_state");
    if (S <= 0 || A <= 0) throw ParseError("n_states and n_actions must be positive");

    const auto& tj = field(j, "transition");
    if (!tj.is_array() || static_cast<Index>(tj.size()) != S) throw ParseError("transition must have n_states entries");
    Table<double> transition(S * A, S);
    for (Index s = 0; s < S; ++s) {
        const auto block = table_from_json(tj[static_cast<std::size_t>(s)], "transition");
        if (block.rows() != A || block.cols() != S) throw ParseError("transition block has wrong shape");
        for (Index a = 0; a < A; ++a) transition.row(flat_index(s, a, A)) = block.row(a);
    }
    const auto reward = table_from_json(field(j, "reward"), "reward");
    if (reward.rows() != S || reward.cols() != A) throw ParseError("reward has wrong shape");
    std::vector<Table<double>> costs;
    const auto& cj = field(j, "costs");
    if (!cj.is_array()) throw ParseError("costs must be an array");
    for (const auto& c : cj) {
        costs.push_back(table_from_json(c, "cost"));
        if (costs.back().rows() != S || costs.back().cols() != A) throw ParseError("cost has wrong shape");
    }
    return Cmdp<double>(std::move(transition), reward, std::move(costs), gamma, s0);
}

Json policy_to_json(const Policy<double>& pi) {
    Json j;
    j["probs"] = table_to_json(pi.probs());
    return j;
}

Policy<double> policy_from_json(const Json& j) { return Policy<double>(table_from_json(field(j, "probs"), "probs")); }

Json mixture_to_json(const MixturePolicy<double>& mix) {
    Json j;
    j["weights"] = vector_to_json(mix.weights());
    Json members = Json::array();
    for (const auto& m : mix.members()) members.push_back(table_to_json(m.probs()));
    j["members"] = std::move(members);
    return j;
}

MixturePolicy<double> mixture_from_json(const Json& j) {
    const auto weights = vector_from_json(field(j, "weights"), "weights");
    std::vector<Policy<double>> members;
    for (const auto& m : field(j, "members")) members.emplace_back(table_from_json(m, "member"));
    return MixturePolicy<double>(std::move(members), weights);
}

Json lp_solution_to_json(const LpSolution& sol) {
    Json j;
    j["status"] = to_string(sol.status);
    if (sol.status == LpStatus::Optimal) {
        j["value_normalized"] = sol.value_normalized;
        j["value_J"] = sol.value_J;
        j["duals"] = vector_to_json(sol.duals);
        j["occupancy"] = table_to_json(sol.occupancy.d);
    }
    return j;
}

Json slater_to_json(const SlaterInfo& info) {
    Json j;
    j["margin_phi"] = info.margin_phi;
    j["raw_margin"] = info.raw_margin;
    j["feasible"] = info.feasible;
    j["witness"] = policy_to_json(info.witness);
    return j;
}

Json saddle_report_to_json(const SaddleReport& r) {
    Json j;
    j["gap"] = r.gap;
    j["lambda_bar"] = vector_to_json(r.lambda_bar);
    j["lagrangian_opt"] = r.lagrangian_opt;
    j["lagrangian_mixture_min"] = r.lagrangian_mixture_min;
    j["J_R_opt"] = r.J_R_opt;
    j["J_R_mixture"] = r.J_R_mixture;
    j["J_C_mixture"] = vector_to_json(r.J_C_mixture);
    Json traj = Json::array();
    for (double v : r.lagrangian_trajectory) traj.push_back(v);
    j["lagrangian_trajectory"] = std::move(traj);
    return j;
}

std::string iterate_log_to_jsonl(const IterateLog& log) {
    std::ostringstream os;
    Json header;
    header["type"] = "header";
    header["K"] = log.records.size();
    header["mode"] = to_string(log.mode);
    header["B"] = log.B;
    header["tau_J"] = vector_to_json(log.tau_J);
    header["tau_effective"] = vector_to_json(log.tau_effective);
    os << header.dump() << '\n';
    for (const auto& r : log.records) {
        Json j;
        j["type"] = "iteration";
        j["k"] = r.k;
        j["lambda"] = vector_to_json(r.lambda);
        j["critic_obj_reward"] = r.critic_obj_reward;
        j["critic_obj_costs"] = vector_to_json(r.critic_obj_costs);
        j["ope_estimates"] = vector_to_json(r.ope_estimates);
        j["z_range"] = Json::array({r.z_min, r.z_max});
        os << j.dump() << '\n';
    }
    Json tail = mixture_to_json(log.mixture);
    tail["type"] = "mixture";
    os << tail.dump() << '\n';
    return os.str();
}

IterateLog iterate_log_from_jsonl(const std::string& text) {
    IterateLog log;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    bool have_mixture = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError("not a JSON object", line_no);
        try {
            const auto type = scalar_field<std::string>(j, "type");
            if (type == "header") {
                log.B = scalar_field<double>(j, "B");
                log.mode = parse_mode(scalar_field<std::string>(j, "mode"));
                log.tau_J = vector_from_json(field(j, "tau_J"), "tau_J");
                log.tau_effective = vector_from_json(field(j, "tau_effective"), "tau_effective");
                have_header = true;
            } else if (type == "iteration") {
                IterationRecord r;
                r.k = scalar_field<int>(j, "k");
                r.lambda = vector_from_json(field(j, "lambda"), "lambda");
                r.critic_obj_reward = scalar_field<double>(j, "critic_obj_reward");
                r.critic_obj_costs = vector_from_json(field(j, "critic_obj_costs"), "critic_obj_costs");
                r.ope_estimates = vector_from_json(field(j, "ope_estimates"), "ope_estimates");
                const auto z = vector_from_json(field(j, "z_range"), "z_range");
                if (z.size() != 2) throw ParseError("z_range must have two entries");
                r.z_min = z(0);
                r.z_max = z(1);
                log.records.push_back(std::move(r));
            } else if (type == "mixture") {
                log.mixture = mixture_from_json(j);
                have_mixture = true;
            } else {
                throw ParseError("unknown record type '" + type + "'");
            }
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        } catch (const InvalidModel& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!have_header || !have_mixture) throw ParseError("iterate log needs a header and a mixture record");
    return log;
}

double round_significant(double value, int digits) {
    if (!std::isfinite(value) || value == 0.0) return value;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, value);
    return std::strtod(buf, nullptr);
}

std::string dump_report(const Json& j) {
    Json copy = j;
    round_in_place(copy);
    return copy.dump(2);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    auto j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON in " + path.string());
    return j;
}

}  // namespace pdca
