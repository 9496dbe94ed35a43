#include "moge/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moge/error.hpp"
#include "moge/random.hpp"

namespace moge {

std::string_view to_string(RoutingMode mode) noexcept {
    return mode == RoutingMode::TopK ? "topk" : "moge";
}

RoutingMode parse_routing_mode(std::string_view text) {
    if (text == "topk") return RoutingMode::TopK;
    if (text == "moge") return RoutingMode::MoGE;
    throw ConfigError("unknown routing mode '" + std::string(text) + "' (expected topk or moge)");
}

RoutingConfig::RoutingConfig(std::size_t n_experts, std::size_t n_active, std::size_t n_groups)
    : n_experts_(n_experts), n_active_(n_active), n_groups_(n_groups) {
    const auto dims = "N=" + std::to_string(n_experts) + ", K=" + std::to_string(n_active) +
                      ", M=" + std::to_string(n_groups);
    if (n_experts == 0 || n_active == 0 || n_groups == 0)
        throw ConfigError("routing dimensions must be positive (" + dims + ")");
    if (n_active > n_experts)
        throw ConfigError("cannot activate more experts than exist (" + dims + ")");
    if (n_experts % n_groups != 0)
        throw ConfigError("expert count must be divisible by group count (" + dims + ")");
    if (n_active % n_groups != 0)
        throw ConfigError("active count must be divisible by group count (" + dims + ")");
}

RouterMatrix::RouterMatrix(Matrix weights) : weights_(std::move(weights)) {
    for (double w : weights_.data())
        if (!std::isfinite(w)) throw DataError("router matrix has a non-finite entry");
}

double GateVector::selected_sum() const noexcept {
    double total = 0.0;
    for (std::size_t i : selected) total += weights[i];
    return total;
}

std::vector<double> compute_logits(const TokenHidden& token, const RouterMatrix& router) {
    if (token.dim() != router.dim()) {
        throw DimensionError("token has dimension " + std::to_string(token.dim()) +
                             " but router expects " + std::to_string(router.dim()));
    }
    const Matrix& w = router.weights();
    std::vector<double> logits(router.n_experts(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double h = token.values[r];
        const auto row = w.row(r);
        for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += row[i] * h;
    }
    return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) return {};
    for (double x : logits)
        if (!std::isfinite(x)) throw DataError("softmax input has a non-finite entry");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
    if (k > values.size())
        throw RangeError("top-k of " + std::to_string(k) + " from " +
                         std::to_string(values.size()) + " values");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto ranked_before = [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      ranked_before);
    order.resize(k);
    return order;
}

namespace {

void check_width(std::span<const double> logits, const RoutingConfig& cfg) {
    if (logits.size() != cfg.n_experts()) {
        throw DimensionError("got " + std::to_string(logits.size()) + " logits for " +
                             std::to_string(cfg.n_experts()) + " experts");
    }
}

}  // namespace

GateVector gate_topk(std::span<const double> logits, const RoutingConfig& cfg) {
    check_width(logits, cfg);
    GateVector gate;
    gate.mode = RoutingMode::TopK;
    gate.selected = top_k_indices(logits, cfg.n_active());
    std::sort(gate.selected.begin(), gate.selected.end());

    // Softmax over the selected logits only; the rest are implicitly -inf.
    std::vector<double> chosen;
    chosen.reserve(gate.selected.size());
    for (std::size_t i : gate.selected) chosen.push_back(logits[i]);
    const auto probs = softmax(chosen);

    gate.weights.assign(cfg.n_experts(), 0.0);
    for (std::size_t j = 0; j < gate.selected.size(); ++j) gate.weights[gate.selected[j]] = probs[j];
    return gate;
}

GateVector gate_moge(std::span<const double> logits, const RoutingConfig& cfg) {
    check_width(logits, cfg);
    const auto scores = softmax(logits);
    GateVector gate;
    gate.mode = RoutingMode::MoGE;
    gate.weights.assign(cfg.n_experts(), 0.0);
    gate.selected.reserve(cfg.n_active());
    const std::span<const double> all(scores);
    for (std::size_t g = 0; g < cfg.n_groups(); ++g) {
        const auto [begin, end] = cfg.group_range(g);
        auto local = top_k_indices(all.subspan(begin, end - begin), cfg.per_group_active());
        std::sort(local.begin(), local.end());
        for (std::size_t j : local) {
            gate.selected.push_back(begin + j);
            gate.weights[begin + j] = scores[begin + j];
        }
    }
    return gate;
}

GateVector gate(std::span<const double> logits, const RoutingConfig& cfg, RoutingMode mode) {
    return mode == RoutingMode::TopK ? gate_topk(logits, cfg) : gate_moge(logits, cfg);
}

namespace {

void check_router(const RouterMatrix& router, const RoutingConfig& cfg) {
    if (router.n_experts() != cfg.n_experts()) {
        throw DimensionError("router has " + std::to_string(router.n_experts()) +
                             " columns but config has " + std::to_string(cfg.n_experts()) +
                             " experts");
    }
}

}  // namespace

GateVector route_topk(const TokenHidden& token, const RouterMatrix& router,
                      const RoutingConfig& cfg) {
    check_router(router, cfg);
    return gate_topk(compute_logits(token, router), cfg);
}

GateVector route_moge(const TokenHidden& token, const RouterMatrix& router,
                      const RoutingConfig& cfg) {
    check_router(router, cfg);
    return gate_moge(compute_logits(token, router), cfg);
}

GateVector route(const TokenHidden& token, const RouterMatrix& router, const RoutingConfig& cfg,
                 RoutingMode mode) {
    return mode == RoutingMode::TopK ? route_topk(token, router, cfg)
                                     : route_moge(token, router, cfg);
}

TokenRoute to_token_route(const GateVector& gate) {
    TokenRoute r;
    r.selected = gate.selected;
    r.weights.reserve(gate.selected.size());
    for (std::size_t i : gate.selected) r.weights.push_back(gate.weights[i]);
    return r;
}

RoutingTrace route_batch(std::span<const TokenHidden> tokens, const RouterMatrix& router,
                         const RoutingConfig& cfg, RoutingMode mode) {
    if (tokens.empty()) throw EmptyInputError("cannot route an empty batch");
    RoutingTrace trace;
    trace.n_experts = cfg.n_experts();
    trace.routes.reserve(tokens.size());
    for (const auto& token : tokens) trace.routes.push_back(to_token_route(route(token, router, cfg, mode)));
    return trace;
}

RoutingTrace route_logits_batch(const Matrix& logits, const RoutingConfig& cfg, RoutingMode mode) {
    if (logits.rows() == 0) throw EmptyInputError("cannot route an empty batch");
    RoutingTrace trace;
    trace.n_experts = cfg.n_experts();
    trace.routes.reserve(logits.rows());
    for (std::size_t t = 0; t < logits.rows(); ++t)
        trace.routes.push_back(to_token_route(gate(logits.row(t), cfg, mode)));
    return trace;
}

Matrix batch_scores(std::span<const TokenHidden> tokens, const RouterMatrix& router) {
    Matrix scores(tokens.size(), router.n_experts());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto s = softmax(compute_logits(tokens[t], router));
        std::copy(s.begin(), s.end(), scores.row(t).begin());
    }
    return scores;
}

RouterMatrix random_router(std::size_t dim, std::size_t n_experts, Rng& rng) {
    Matrix w(dim, n_experts);
    const double scale = dim > 0 ? 1.0 / std::sqrt(static_cast<double>(dim)) : 1.0;
    for (double& x : w.data()) x = rng.normal() * scale;
    return RouterMatrix(std::move(w));
}

std::vector<TokenHidden> random_tokens(std::size_t count, std::size_t dim, Rng& rng) {
    std::vector<TokenHidden> tokens(count);
    for (auto& t : tokens) {
        t.values.resize(dim);
        for (double& x : t.values) x = rng.normal();
    }
    return tokens;
}

}  // namespace moge
