#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "moge/balance.hpp"
#include "moge/routing.hpp"

namespace moge {

struct StepCostReport {
    std::vector<double> per_device_cost;  ///< T_i * cost
    double makespan = 0.0;                ///< slowest device
    double mean_load = 0.0;               ///< mean T_i
    double mean_cost = 0.0;               ///< mean per-device cost
};

/// Straggler-dominated step cost. Throws ArgumentError unless cost > 0.
StepCostReport step_cost(const DeviceLoadProfile& profile, double cost_per_expert_call);

/// Paired Top-K / MoGE costs over the same per-trial token streams.
struct CostComparison {
    std::size_t batch_size = 0;
    std::vector<double> topk_makespan;
    std::vector<std::int64_t> topk_spread;  ///< max - min device load
    std::vector<double> moge_makespan;

    /// Mean Top-K imbalance score minus the MoGE one (which is always 0).
    double mean_disparity_reduction() const;
};

/// Each trial draws batch_size N(0, I) hidden states from
/// Rng::for_stream(seed, t) and routes them through `router` both ways.
CostComparison compare_routing_cost(const RouterMatrix& router, const RoutingConfig& cfg,
                                    std::size_t batch_size, double cost, std::uint64_t trials,
                                    std::uint64_t seed);

/// As above, with i.i.d. N(0, 1) logits instead of hidden states. Experts are
/// exchangeable under this stream.
CostComparison compare_routing_cost_iid(const RoutingConfig& cfg, std::size_t batch_size,
                                        double cost, std::uint64_t trials, std::uint64_t seed);

}  // namespace moge
