#include "moge/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "moge/error.hpp"
#include "moge/random.hpp"

namespace moge {

StepCostReport step_cost(const DeviceLoadProfile& profile, double cost_per_expert_call) {
    if (!(cost_per_expert_call > 0.0) || !std::isfinite(cost_per_expert_call))
        throw ArgumentError("cost per expert call must be positive and finite");
    if (profile.loads.empty()) throw EmptyInputError("load profile has no devices");

    StepCostReport report;
    report.per_device_cost.reserve(profile.loads.size());
    std::int64_t total = 0;
    for (std::int64_t load : profile.loads) {
        report.per_device_cost.push_back(static_cast<double>(load) * cost_per_expert_call);
        total += load;
    }
    report.makespan =
        *std::max_element(report.per_device_cost.begin(), report.per_device_cost.end());
    const auto devices = static_cast<double>(profile.loads.size());
    report.mean_load = static_cast<double>(total) / devices;
    report.mean_cost = report.mean_load * cost_per_expert_call;
    return report;
}

double CostComparison::mean_disparity_reduction() const {
    if (topk_spread.empty()) return 0.0;
    double total = 0.0;
    for (std::int64_t s : topk_spread) total += static_cast<double>(s);
    return total / (static_cast<double>(topk_spread.size()) * static_cast<double>(batch_size));
}

namespace {

using LogitSource = std::function<Matrix(Rng&)>;

CostComparison compare(const RoutingConfig& cfg, std::size_t batch_size, double cost,
                       std::uint64_t trials, std::uint64_t seed, const LogitSource& source) {
    if (!(cost > 0.0) || !std::isfinite(cost))
        throw ArgumentError("cost per expert call must be positive and finite");
    if (batch_size == 0) throw ArgumentError("batch size must be positive");
    if (trials == 0) throw ArgumentError("trial count must be positive");

    CostComparison out;
    out.batch_size = batch_size;
    out.topk_makespan.reserve(trials);
    out.topk_spread.reserve(trials);
    out.moge_makespan.reserve(trials);
    for (std::uint64_t t = 0; t < trials; ++t) {
        auto rng = Rng::for_stream(seed, t);
        const Matrix logits = source(rng);
        const auto topk = device_loads(route_logits_batch(logits, cfg, RoutingMode::TopK), cfg);
        const auto moge = device_loads(route_logits_batch(logits, cfg, RoutingMode::MoGE), cfg);
        out.topk_makespan.push_back(step_cost(topk, cost).makespan);
        out.topk_spread.push_back(topk.spread());
        out.moge_makespan.push_back(step_cost(moge, cost).makespan);
    }
    return out;
}

}  // namespace

CostComparison compare_routing_cost(const RouterMatrix& router, const RoutingConfig& cfg,
                                    std::size_t batch_size, double cost, std::uint64_t trials,
                                    std::uint64_t seed) {
    if (router.n_experts() != cfg.n_experts())
        throw DimensionError("router width does not match expert count");
    return compare(cfg, batch_size, cost, trials, seed, [&](Rng& rng) {
        const auto tokens = random_tokens(batch_size, router.dim(), rng);
        Matrix logits(batch_size, cfg.n_experts());
        for (std::size_t t = 0; t < batch_size; ++t) {
            const auto row = compute_logits(tokens[t], router);
            std::copy(row.begin(), row.end(), logits.row(t).begin());
        }
        return logits;
    });
}

CostComparison compare_routing_cost_iid(const RoutingConfig& cfg, std::size_t batch_size,
                                        double cost, std::uint64_t trials, std::uint64_t seed) {
    return compare(cfg, batch_size, cost, trials, seed, [&](Rng& rng) {
        Matrix logits(batch_size, cfg.n_experts());
        for (double& x : logits.data()) x = rng.normal();
        return logits;
    });
}

}  // namespace moge
