#pragma once

#include <cstddef>
#include <vector>

#include "moge/matrix.hpp"
#include "moge/routing.hpp"

namespace moge {

class Rng;

enum class Activation { Identity, Relu, Silu };

/// Two-matrix feed-forward expert: y = W_out^T act(W_in^T h).
///
/// w_in has shape d x d_ff and w_out has shape d_ff x d, matching the router
/// convention where the matrix is indexed [input][output].
struct ExpertNetwork {
    Matrix w_in;
    Matrix w_out;
    Activation activation = Activation::Identity;

    std::size_t dim() const noexcept { return w_in.rows(); }
    std::size_t hidden_dim() const noexcept { return w_in.cols(); }
};

/// Throws DimensionError on inconsistent shapes.
TokenHidden expert_forward(const ExpertNetwork& expert, const TokenHidden& token);

/// Routed and shared experts behind one router.
class MoeLayer {
public:
    /// Throws DimensionError unless there are exactly N routed experts and every
    /// expert and the router agree on d; throws DataError on non-finite weights.
    MoeLayer(RoutingConfig cfg, RouterMatrix router, std::vector<ExpertNetwork> routed,
             std::vector<ExpertNetwork> shared);

    /// Random layer with N(0, 1/fan_in) weights.
    static MoeLayer random(const RoutingConfig& cfg, std::size_t dim, std::size_t hidden_dim,
                           std::size_t n_shared, Activation activation, Rng& rng);

    const RoutingConfig& config() const noexcept { return cfg_; }
    const RouterMatrix& router() const noexcept { return router_; }
    const std::vector<ExpertNetwork>& routed() const noexcept { return routed_; }
    const std::vector<ExpertNetwork>& shared() const noexcept { return shared_; }
    std::size_t dim() const noexcept { return router_.dim(); }

private:
    RoutingConfig cfg_;
    RouterMatrix router_;
    std::vector<ExpertNetwork> routed_;
    std::vector<ExpertNetwork> shared_;
};

struct LayerOutput {
    TokenHidden output;
    GateVector gate;
    std::size_t experts_evaluated = 0;  ///< routed + shared forward passes
};

/// Sum of gate.weights[i] * E_i(h) over the selected experts only.
TokenHidden routed_output(const MoeLayer& layer, const TokenHidden& token, const GateVector& gate);

/// Routes the token, evaluates only the selected experts and adds every
/// shared expert with unit weight.
LayerOutput layer_forward(const MoeLayer& layer, const TokenHidden& token, RoutingMode mode);

}  // namespace moge
