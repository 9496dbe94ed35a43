#include "moge/analytics.hpp"

#include <string>

#include "moge/error.hpp"

namespace moge {

namespace {

void check_trace(const RoutingTrace& trace, const RoutingConfig& cfg) {
    if (trace.empty()) throw EmptyInputError("analysis of an empty trace");
    for (const auto& r : trace.routes)
        for (std::size_t e : r.selected)
            if (e >= cfg.n_experts())
                throw RangeError("trace selects expert " + std::to_string(e) + " outside [0, " +
                                 std::to_string(cfg.n_experts()) + ")");
}

}  // namespace

ExpertUsageHistogram usage_histogram(const RoutingTrace& trace, const RoutingConfig& cfg) {
    check_trace(trace, cfg);
    std::vector<std::size_t> counts(cfg.n_experts(), 0);
    std::size_t slots = 0;
    for (const auto& r : trace.routes) {
        for (std::size_t e : r.selected) ++counts[e];
        slots += r.selected.size();
    }
    ExpertUsageHistogram h;
    h.token_count = trace.size();
    h.per_token.resize(counts.size());
    h.share.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto c = static_cast<double>(counts[i]);
        h.per_token[i] = c / static_cast<double>(h.token_count);
        h.share[i] = c / static_cast<double>(slots);
    }
    return h;
}

CoactivationMatrix coactivation(const RoutingTrace& trace, const RoutingConfig& cfg) {
    check_trace(trace, cfg);
    const std::size_t n = cfg.n_experts();
    std::vector<std::size_t> pairs(n * n, 0);
    for (const auto& r : trace.routes) {
        for (std::size_t a = 0; a < r.selected.size(); ++a) {
            for (std::size_t b = a + 1; b < r.selected.size(); ++b) {
                const std::size_t i = r.selected[a];
                const std::size_t j = r.selected[b];
                if (i == j) continue;
                ++pairs[i * n + j];
                ++pairs[j * n + i];
            }
        }
    }
    CoactivationMatrix m{Matrix(n, n)};
    const auto tokens = static_cast<double>(trace.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m.scores(i, j) = static_cast<double>(pairs[i * n + j]) / tokens;
    return m;
}

std::vector<double> intra_group_distribution(const RoutingTrace& trace, const RoutingConfig& cfg,
                                             std::size_t group) {
    if (group >= cfg.n_groups()) {
        throw RangeError("group " + std::to_string(group) + " outside [0, " +
                         std::to_string(cfg.n_groups()) + ")");
    }
    check_trace(trace, cfg);
    const auto [begin, end] = cfg.group_range(group);
    std::vector<double> share(end - begin, 0.0);
    double total = 0.0;
    for (const auto& r : trace.routes) {
        for (std::size_t e : r.selected) {
            if (e >= begin && e < end) {
                share[e - begin] += 1.0;
                total += 1.0;
            }
        }
    }
    if (total > 0.0)
        for (double& s : share) s /= total;
    return share;
}

}  // namespace moge
