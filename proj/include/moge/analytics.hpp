#pragma once

#include <cstddef>
#include <vector>

#include "moge/matrix.hpp"
#include "moge/routing.hpp"

namespace moge {

/// Token share of every expert, in both common normalizations.
struct ExpertUsageHistogram {
    /// Tokens selecting expert i divided by the token count. Sums to K; the
    /// uniform level is K/N per expert.
    std::vector<double> per_token;
    /// Fraction of all routed (token, expert) slots. Sums to 1; the uniform
    /// level is 1/N per expert.
    std::vector<double> share;
    std::size_t token_count = 0;
};

/// Symmetric N x N matrix of pairwise co-selection frequencies; the diagonal
/// is zero.
struct CoactivationMatrix {
    Matrix scores;
};

ExpertUsageHistogram usage_histogram(const RoutingTrace& trace, const RoutingConfig& cfg);

/// scores(i, j) = tokens selecting both i and j / token count, for i != j.
CoactivationMatrix coactivation(const RoutingTrace& trace, const RoutingConfig& cfg);

/// Share of the group's selections received by each of its N_g experts; sums
/// to 1 when the group received any selection. Throws RangeError for a bad
/// group index.
std::vector<double> intra_group_distribution(const RoutingTrace& trace, const RoutingConfig& cfg,
                                             std::size_t group);

}  // namespace moge
