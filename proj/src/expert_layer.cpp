#include "moge/expert_layer.hpp"

#include <cmath>
#include <string>

#include "moge/error.hpp"
#include "moge/random.hpp"

namespace moge {

namespace {

double activate(Activation a, double x) {
    switch (a) {
        case Activation::Identity:
            return x;
        case Activation::Relu:
            return x > 0.0 ? x : 0.0;
        case Activation::Silu:
            return x / (1.0 + std::exp(-x));
    }
    return x;
}

void check_expert(const ExpertNetwork& e, std::size_t dim, const std::string& label) {
    if (e.w_in.rows() != dim || e.w_out.cols() != dim || e.w_in.cols() != e.w_out.rows()) {
        throw DimensionError(label + " has shapes " + std::to_string(e.w_in.rows()) + "x" +
                             std::to_string(e.w_in.cols()) + " / " +
                             std::to_string(e.w_out.rows()) + "x" +
                             std::to_string(e.w_out.cols()) + " for layer dimension " +
                             std::to_string(dim));
    }
    for (const Matrix* m : {&e.w_in, &e.w_out})
        for (double w : m->data())
            if (!std::isfinite(w)) throw DataError(label + " has a non-finite weight");
}

ExpertNetwork random_expert(std::size_t dim, std::size_t hidden, Activation a, Rng& rng) {
    ExpertNetwork e{Matrix(dim, hidden), Matrix(hidden, dim), a};
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(dim));
    const double out_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& w : e.w_in.data()) w = rng.normal() * in_scale;
    for (double& w : e.w_out.data()) w = rng.normal() * out_scale;
    return e;
}

}  // namespace

TokenHidden expert_forward(const ExpertNetwork& expert, const TokenHidden& token) {
    if (token.dim() != expert.dim() || expert.w_out.rows() != expert.hidden_dim()) {
        throw DimensionError("expert expects dimension " + std::to_string(expert.dim()) +
                             ", got " + std::to_string(token.dim()));
    }
    std::vector<double> hidden(expert.hidden_dim(), 0.0);
    for (std::size_t i = 0; i < token.dim(); ++i) {
        const auto row = expert.w_in.row(i);
        for (std::size_t j = 0; j < hidden.size(); ++j) hidden[j] += token.values[i] * row[j];
    }
    for (double& v : hidden) v = activate(expert.activation, v);

    TokenHidden out{std::vector<double>(expert.w_out.cols(), 0.0)};
    for (std::size_t j = 0; j < hidden.size(); ++j) {
        const auto row = expert.w_out.row(j);
        for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += hidden[j] * row[k];
    }
    return out;
}

MoeLayer::MoeLayer(RoutingConfig cfg, RouterMatrix router, std::vector<ExpertNetwork> routed,
                   std::vector<ExpertNetwork> shared)
    : cfg_(cfg), router_(std::move(router)), routed_(std::move(routed)), shared_(std::move(shared)) {
    if (router_.n_experts() != cfg_.n_experts())
        throw DimensionError("router width does not match expert count");
    if (routed_.size() != cfg_.n_experts()) {
        throw DimensionError("layer has " + std::to_string(routed_.size()) +
                             " routed experts, config requires " +
                             std::to_string(cfg_.n_experts()));
    }
    for (std::size_t i = 0; i < routed_.size(); ++i)
        check_expert(routed_[i], router_.dim(), "routed expert " + std::to_string(i));
    for (std::size_t i = 0; i < shared_.size(); ++i)
        check_expert(shared_[i], router_.dim(), "shared expert " + std::to_string(i));
}

MoeLayer MoeLayer::random(const RoutingConfig& cfg, std::size_t dim, std::size_t hidden_dim,
                          std::size_t n_shared, Activation activation, Rng& rng) {
    auto router = random_router(dim, cfg.n_experts(), rng);
    std::vector<ExpertNetwork> routed;
    for (std::size_t i = 0; i < cfg.n_experts(); ++i)
        routed.push_back(random_expert(dim, hidden_dim, activation, rng));
    std::vector<ExpertNetwork> shared;
    for (std::size_t i = 0; i < n_shared; ++i)
        shared.push_back(random_expert(dim, hidden_dim, activation, rng));
    return MoeLayer(cfg, std::move(router), std::move(routed), std::move(shared));
}

TokenHidden routed_output(const MoeLayer& layer, const TokenHidden& token, const GateVector& gate) {
    if (gate.weights.size() != layer.config().n_experts())
        throw DimensionError("gate vector width does not match expert count");
    TokenHidden out{std::vector<double>(layer.dim(), 0.0)};
    for (std::size_t i : gate.selected) {
        const auto y = expert_forward(layer.routed().at(i), token);
        for (std::size_t k = 0; k < out.values.size(); ++k)
            out.values[k] += gate.weights[i] * y.values[k];
    }
    return out;
}

LayerOutput layer_forward(const MoeLayer& layer, const TokenHidden& token, RoutingMode mode) {
    LayerOutput result;
    result.gate = route(token, layer.router(), layer.config(), mode);
    result.output = routed_output(layer, token, result.gate);
    for (const auto& s : layer.shared()) {
        const auto y = expert_forward(s, token);
        for (std::size_t k = 0; k < y.values.size(); ++k) result.output.values[k] += y.values[k];
    }
    result.experts_evaluated = result.gate.selected.size() + layer.shared().size();
    return result;
}

}  // namespace moge
