#include "pdca/offline_data.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pdca/random.hpp"

namespace pdca {

OccupancyMeasure<double> behavior_distribution(const Cmdp<double>& cmdp,
                                               const Policy<double>& optimal_policy, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    const auto uniform = occupancy(cmdp, Policy<double>::uniform(cmdp.n_states(), cmdp.n_actions()));
    const auto optimal = occupancy(cmdp, optimal_policy);
    return OccupancyMeasure<double>((1.0 - beta) * uniform.d + beta * optimal.d);
}

Dataset sample_dataset(const Cmdp<double>& cmdp, const OccupancyMeasure<double>& d_mu,
                       std::size_t n, std::uint64_t seed, std::string behavior) {
    const Index S = cmdp.n_states();
    const Index A = cmdp.n_actions();
    if (d_mu.d.rows() != S || d_mu.d.cols() != A)
        throw DimensionMismatch("behavior occupancy shape does not match the CMDP");
    if ((d_mu.d.array() < 0.0).any() || !(d_mu.d.sum() > 0.0))
        throw InvalidModel("behavior occupancy must be nonnegative with positive mass");

    std::vector<double> pair_cdf(static_cast<std::size_t>(S * A));
    double acc = 0.0;
    for (Index i = 0; i < S * A; ++i) pair_cdf[static_cast<std::size_t>(i)] = acc += d_mu.d.data()[i];

    std::vector<std::vector<double>> next_cdf(static_cast<std::size_t>(S * A));
    for (Index i = 0; i < S * A; ++i) {
        auto& row = next_cdf[static_cast<std::size_t>(i)];
        row.resize(static_cast<std::size_t>(S));
        double c = 0.0;
        for (Index sn = 0; sn < S; ++sn) row[static_cast<std::size_t>(sn)] = c += cmdp.transition()(i, sn);
    }

    // Stored in canonical dump form so the file round trip is lossless.
    const auto parsed = nlohmann::ordered_json::parse(behavior, nullptr, false);
    if (!parsed.is_discarded()) behavior = parsed.dump();

    Dataset out;
    out.meta = {seed, n, std::move(behavior)};
    out.transitions.reserve(n);
    Rng rng(seed);
    for (std::size_t j = 0; j < n; ++j) {
        const auto pair = static_cast<Index>(rng.categorical_from_cdf(pair_cdf));
        const auto sn = static_cast<Index>(rng.categorical_from_cdf(next_cdf[static_cast<std::size_t>(pair)]));
        out.transitions.push_back({pair / A, pair % A, sn});
    }
    return out;
}

Table<double> empirical_distribution(const Dataset& data, Index n_states, Index n_actions) {
    Table<double> freq = Table<double>::Zero(n_states, n_actions);
    if (data.empty()) return freq;
    for (const auto& t : data.transitions) freq(t.s, t.a) += 1.0;
    return freq / static_cast<double>(data.size());
}

namespace {

using nlohmann::ordered_json;

Index read_index(const ordered_json& obj, const char* key, std::size_t line) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field \"") + key + "\"", line);
    if (!it->is_number_integer()) throw ParseError(std::string("field \"") + key + "\" is not an integer", line);
    const auto v = it->get<std::int64_t>();
    if (v < 0) throw ParseError(std::string("field \"") + key + "\" is negative", line);
    return static_cast<Index>(v);
}

}  // namespace

std::string dataset_to_string(const Dataset& data) {
    std::ostringstream os;
    ordered_json header;
    header["seed"] = data.meta.seed;
    header["n"] = data.size();
    header["behavior"] = data.meta.behavior.empty()
                             ? ordered_json::object()
                             : ordered_json::parse(data.meta.behavior, nullptr, false);
    if (header["behavior"].is_discarded()) header["behavior"] = data.meta.behavior;
    os << "# " << header.dump() << '\n';
    for (const auto& t : data.transitions)
        os << "{\"s\":" << t.s << ",\"a\":" << t.a << ",\"sn\":" << t.s_next << "}\n";
    return os.str();
}

Dataset dataset_from_string(const std::string& text) {
    Dataset out;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (have_header) throw ParseError("duplicate metadata header", line_no);
            const auto header = ordered_json::parse(line.substr(1), nullptr, false);
            if (header.is_discarded() || !header.is_object())
                throw ParseError("malformed metadata header", line_no);
            try {
                out.meta.seed = header.value("seed", std::uint64_t{0});
                out.meta.n = header.value("n", std::size_t{0});
            } catch (const nlohmann::json::exception&) {
                throw ParseError("metadata seed/n must be nonnegative integers", line_no);
            }
            if (header.contains("behavior"))
                out.meta.behavior = header["behavior"].is_string() ? header["behavior"].get<std::string>()
                                                                   : header["behavior"].dump();
            have_header = true;
            continue;
        }
        const auto obj = ordered_json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw ParseError("not a JSON object", line_no);
        out.transitions.push_back(
            {read_index(obj, "s", line_no), read_index(obj, "a", line_no), read_index(obj, "sn", line_no)});
    }
    if (have_header && out.meta.n != out.transitions.size())
        throw ParseError("header announces " + std::to_string(out.meta.n) + " transitions, found " +
                         std::to_string(out.transitions.size()));
    out.meta.n = out.transitions.size();
    return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << dataset_to_string(data);
    if (!os) throw IoError("write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << is.rdbuf();
    return dataset_from_string(buf.str());
}

}  // namespace pdca
