#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "moge/matrix.hpp"

namespace moge {

class Rng;

enum class RoutingMode {
    TopK,  ///< softmax over the global top-K logits
    MoGE,  ///< global softmax, then top-K' within each expert group
};

std::string_view to_string(RoutingMode mode) noexcept;

/// Parses "topk" or "moge"; throws ConfigError otherwise.
RoutingMode parse_routing_mode(std::string_view text);

/// Routing dimensions: N experts, K active per token, M groups (devices).
///
/// Group j owns the contiguous expert range [j*N_g, (j+1)*N_g) where
/// N_g = N/M, and MoGE selects K' = K/M experts from every group.
class RoutingConfig {
public:
    /// Throws ConfigError unless N % M == 0, K % M == 0 and 1 <= K <= N.
    RoutingConfig(std::size_t n_experts, std::size_t n_active, std::size_t n_groups);

    std::size_t n_experts() const noexcept { return n_experts_; }
    std::size_t n_active() const noexcept { return n_active_; }
    std::size_t n_groups() const noexcept { return n_groups_; }
    std::size_t group_size() const noexcept { return n_experts_ / n_groups_; }
    std::size_t per_group_active() const noexcept { return n_active_ / n_groups_; }

    std::size_t group_of(std::size_t expert) const noexcept { return expert / group_size(); }

    /// Half-open expert index range owned by `group`.
    std::pair<std::size_t, std::size_t> group_range(std::size_t group) const noexcept {
        return {group * group_size(), (group + 1) * group_size()};
    }

    bool operator==(const RoutingConfig&) const = default;

private:
    std::size_t n_experts_;
    std::size_t n_active_;
    std::size_t n_groups_;
};

/// Hidden state of one token.
struct TokenHidden {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
};

/// Router weights W of shape d x N; logits are W^T h.
class RouterMatrix {
public:
    /// Throws DataError on non-finite entries.
    explicit RouterMatrix(Matrix weights);

    std::size_t dim() const noexcept { return weights_.rows(); }
    std::size_t n_experts() const noexcept { return weights_.cols(); }
    const Matrix& weights() const noexcept { return weights_; }

private:
    Matrix weights_;
};

/// Dense gate weights over all N experts plus the selected index set.
struct GateVector {
    std::vector<double> weights;        ///< zero outside `selected`
    std::vector<std::size_t> selected;  ///< ascending expert indices, size K
    RoutingMode mode = RoutingMode::TopK;

    double selected_sum() const noexcept;
};

/// One token's entry in a routing trace; `weights` is aligned with `selected`.
struct TokenRoute {
    std::vector<std::size_t> selected;
    std::vector<double> weights;

    bool operator==(const TokenRoute&) const = default;
};

/// Per-batch record of token -> expert assignments, in token order.
struct RoutingTrace {
    std::size_t n_experts = 0;
    std::vector<TokenRoute> routes;

    std::size_t size() const noexcept { return routes.size(); }
    bool empty() const noexcept { return routes.empty(); }
    bool operator==(const RoutingTrace&) const = default;
};

/// W^T h, accumulated left to right over the hidden dimension.
std::vector<double> compute_logits(const TokenHidden& token, const RouterMatrix& router);

/// Numerically stable softmax. Throws DataError on a non-finite entry.
std::vector<double> softmax(std::span<const double> logits);

/// Indices of the k largest values, largest first; equal values are ranked by
/// lower index first.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

/// Conventional gating on precomputed logits: softmax restricted to the top-K.
GateVector gate_topk(std::span<const double> logits, const RoutingConfig& cfg);

/// Group-balanced gating on precomputed logits: global softmax, then top-K'
/// within each group. Selected weights are the global softmax scores and are
/// not renormalized.
GateVector gate_moge(std::span<const double> logits, const RoutingConfig& cfg);

GateVector gate(std::span<const double> logits, const RoutingConfig& cfg, RoutingMode mode);

GateVector route_topk(const TokenHidden& token, const RouterMatrix& router,
                      const RoutingConfig& cfg);
GateVector route_moge(const TokenHidden& token, const RouterMatrix& router,
                      const RoutingConfig& cfg);
GateVector route(const TokenHidden& token, const RouterMatrix& router, const RoutingConfig& cfg,
                 RoutingMode mode);

/// Sparse view of a gate vector as stored in a trace.
TokenRoute to_token_route(const GateVector& gate);

/// Routes every token; throws EmptyInputError on an empty batch.
RoutingTrace route_batch(std::span<const TokenHidden> tokens, const RouterMatrix& router,
                         const RoutingConfig& cfg, RoutingMode mode);

/// Routes each row of a T x N logit matrix.
RoutingTrace route_logits_batch(const Matrix& logits, const RoutingConfig& cfg, RoutingMode mode);

/// Global softmax scores for each token, one row per token (T x N).
Matrix batch_scores(std::span<const TokenHidden> tokens, const RouterMatrix& router);

/// Router with i.i.d. N(0, 1/d) entries.
RouterMatrix random_router(std::size_t dim, std::size_t n_experts, Rng& rng);

/// Tokens with i.i.d. N(0, 1) entries.
std::vector<TokenHidden> random_tokens(std::size_t count, std::size_t dim, Rng& rng);

}  // namespace moge
