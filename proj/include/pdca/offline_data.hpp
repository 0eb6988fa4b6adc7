#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdca/cmdp.hpp"

namespace pdca {

struct Transition {
    Index s = 0;
    Index a = 0;
    Index s_next = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    /// Free-form JSON text describing the behavior distribution.
    std::string behavior;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// i.i.d. transitions (s, a) ~ d^mu, s' ~ P(. | s, a).
struct Dataset {
    std::vector<Transition> transitions;
    DatasetMeta meta;

    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// d^mu = (1 - beta) d^uniform + beta d^{pi*}. Mixing occupancies is the
/// same as mixing the two policies at the trajectory level.
OccupancyMeasure<double> behavior_distribution(const Cmdp<double>& cmdp,
                                               const Policy<double>& optimal_policy, double beta);

/// Draws n transitions with a seeded mt19937_64 stream; (s, a) by inverse
/// CDF over the flattened d_mu, then s' by inverse CDF over P(. | s, a).
Dataset sample_dataset(const Cmdp<double>& cmdp, const OccupancyMeasure<double>& d_mu,
                       std::size_t n, std::uint64_t seed, std::string behavior = "{}");

/// Empirical (s, a) frequencies of a dataset.
Table<double> empirical_distribution(const Dataset& data, Index n_states, Index n_actions);

/// JSON-lines file: a "#"-prefixed metadata header followed by one
/// {"s":..,"a":..,"sn":..} object per line.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

std::string dataset_to_string(const Dataset& data);
Dataset dataset_from_string(const std::string& text);

}  // namespace pdca
