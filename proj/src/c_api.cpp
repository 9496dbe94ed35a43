#include "moge/moge.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "moge/analytics.hpp"
#include "moge/balance.hpp"
#include "moge/device_sim.hpp"
#include "moge/error.hpp"
#include "moge/expert_layer.hpp"
#include "moge/model_ops.hpp"
#include "moge/random.hpp"
#include "moge/routing.hpp"
#include "moge/serialization.hpp"
#include "moge/version.hpp"

struct moge_string {
    std::string value;
};

struct moge_router {
    moge::RouterMatrix value;
};

struct moge_trace {
    moge::RoutingTrace value;
};

struct moge_histogram {
    moge::IsHistogram value;
    std::vector<moge::IsHistogram::Bin> bins;
};

struct moge_layer {
    moge::MoeLayer value;
};

struct moge_params {
    moge::ParameterSet value;
    std::vector<std::string> names;

    explicit moge_params(moge::ParameterSet p) : value(std::move(p)) {
        for (const auto& entry : value) names.push_back(entry.first);
    }
};

namespace {

thread_local std::string last_error;

moge_status fail(moge_status status, const std::string& message) {
    last_error = message;
    return status;
}

// Runs `body`, translating library exceptions into status codes.
template <typename Body>
moge_status guarded(Body&& body) {
    try {
        body();
        last_error.clear();
        return MOGE_OK;
    } catch (const moge::ConfigError& e) {
        return fail(MOGE_E_CONFIG, e.what());
    } catch (const moge::DimensionError& e) {
        return fail(MOGE_E_DIMENSION, e.what());
    } catch (const moge::DataError& e) {
        return fail(MOGE_E_DATA, e.what());
    } catch (const moge::EmptyInputError& e) {
        return fail(MOGE_E_EMPTY, e.what());
    } catch (const moge::RangeError& e) {
        return fail(MOGE_E_RANGE, e.what());
    } catch (const moge::ArgumentError& e) {
        return fail(MOGE_E_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(MOGE_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(MOGE_E_INTERNAL, e.what());
    } catch (...) {
        return fail(MOGE_E_INTERNAL, "unknown error");
    }
}

void require(bool condition, const char* what) {
    if (!condition) throw moge::ArgumentError(std::string(what) + " must not be null");
}

moge::RoutingConfig to_config(moge_dims dims) {
    if (dims.n_experts <= 0 || dims.n_active <= 0 || dims.n_groups <= 0)
        throw moge::ConfigError("routing dimensions must be positive");
    return moge::RoutingConfig(static_cast<std::size_t>(dims.n_experts),
                               static_cast<std::size_t>(dims.n_active),
                               static_cast<std::size_t>(dims.n_groups));
}

moge::RoutingMode to_mode(moge_mode mode) {
    switch (mode) {
        case MOGE_MODE_TOPK:
            return moge::RoutingMode::TopK;
        case MOGE_MODE_MOGE:
            return moge::RoutingMode::MoGE;
    }
    throw moge::ArgumentError("unknown routing mode");
}

moge::Activation to_activation(moge_activation a) {
    switch (a) {
        case MOGE_ACTIVATION_IDENTITY:
            return moge::Activation::Identity;
        case MOGE_ACTIVATION_RELU:
            return moge::Activation::Relu;
        case MOGE_ACTIVATION_SILU:
            return moge::Activation::Silu;
    }
    throw moge::ArgumentError("unknown activation");
}

std::vector<moge::TokenHidden> to_tokens(const double* data, std::size_t n_tokens,
                                         std::size_t dim) {
    require(data != nullptr || n_tokens * dim == 0, "tokens");
    std::vector<moge::TokenHidden> tokens(n_tokens);
    for (std::size_t t = 0; t < n_tokens; ++t)
        tokens[t].values.assign(data + t * dim, data + (t + 1) * dim);
    return tokens;
}

void check_trace_config(const moge::RoutingTrace& trace, const moge::RoutingConfig& cfg) {
    if (trace.n_experts != cfg.n_experts())
        throw moge::DimensionError("trace was recorded for " + std::to_string(trace.n_experts) +
                                   " experts, dims specify " + std::to_string(cfg.n_experts()));
}

void emit(std::string text, moge_string** out) {
    require(out != nullptr, "output");
    *out = new moge_string{std::move(text)};
}

}  // namespace

extern "C" {

const char* moge_version(void) { return moge::version; }

const char* moge_status_name(moge_status status) {
    switch (status) {
        case MOGE_OK:
            return "ok";
        case MOGE_E_INVALID_ARGUMENT:
            return "invalid argument";
        case MOGE_E_CONFIG:
            return "invalid routing configuration";
        case MOGE_E_DIMENSION:
            return "dimension mismatch";
        case MOGE_E_DATA:
            return "invalid data";
        case MOGE_E_EMPTY:
            return "empty input";
        case MOGE_E_RANGE:
            return "index out of range";
        case MOGE_E_INTERNAL:
            return "internal error";
    }
    return "unknown status";
}

const char* moge_last_error(void) { return last_error.c_str(); }

moge_status moge_dims_validate(moge_dims dims) {
    return guarded([&] { to_config(dims); });
}

moge_status moge_format_real(double value, char* buffer, size_t capacity) {
    return guarded([&] {
        require(buffer != nullptr, "buffer");
        const auto text = moge::format_real(value);
        if (text.size() + 1 > capacity) throw moge::ArgumentError("buffer too small");
        std::memcpy(buffer, text.c_str(), text.size() + 1);
    });
}

const char* moge_string_data(const moge_string* str) { return str ? str->value.c_str() : nullptr; }
size_t moge_string_size(const moge_string* str) { return str ? str->value.size() : 0; }
void moge_string_destroy(moge_string* str) { delete str; }

moge_status moge_router_create(const double* weights, size_t dim, size_t n_experts,
                               moge_router** out) {
    return guarded([&] {
        require(out != nullptr, "output");
        require(weights != nullptr || dim * n_experts == 0, "weights");
        std::vector<double> data(weights, weights + dim * n_experts);
        *out = new moge_router{moge::RouterMatrix(moge::Matrix(dim, n_experts, std::move(data)))};
    });
}

moge_status moge_router_create_random(size_t dim, size_t n_experts, uint64_t seed,
                                      moge_router** out) {
    return guarded([&] {
        require(out != nullptr, "output");
        auto rng = moge::Rng::for_stream(seed, 0);
        *out = new moge_router{moge::random_router(dim, n_experts, rng)};
    });
}

size_t moge_router_dim(const moge_router* router) { return router ? router->value.dim() : 0; }
size_t moge_router_experts(const moge_router* router) {
    return router ? router->value.n_experts() : 0;
}
void moge_router_destroy(moge_router* router) { delete router; }

moge_status moge_synthesize_tokens(size_t n_tokens, size_t dim, uint64_t seed, double* out) {
    return guarded([&] {
        require(out != nullptr || n_tokens * dim == 0, "output");
        auto rng = moge::Rng::for_stream(seed, 1);
        const auto tokens = moge::random_tokens(n_tokens, dim, rng);
        for (std::size_t t = 0; t < n_tokens; ++t)
            std::memcpy(out + t * dim, tokens[t].values.data(), dim * sizeof(double));
    });
}

moge_status moge_route_token(const moge_router* router, moge_dims dims, moge_mode mode,
                             const double* token, size_t dim, double* weights_out,
                             int32_t* selected_out) {
    return guarded([&] {
        require(router != nullptr, "router");
        const auto cfg = to_config(dims);
        const auto tokens = to_tokens(token, 1, dim);
        const auto g = moge::route(tokens[0], router->value, cfg, to_mode(mode));
        if (weights_out) std::copy(g.weights.begin(), g.weights.end(), weights_out);
        if (selected_out)
            for (std::size_t j = 0; j < g.selected.size(); ++j)
                selected_out[j] = static_cast<int32_t>(g.selected[j]);
    });
}

moge_status moge_global_scores(const moge_router* router, const double* tokens, size_t n_tokens,
                               size_t dim, double* scores_out) {
    return guarded([&] {
        require(router != nullptr, "router");
        require(scores_out != nullptr || n_tokens == 0, "output");
        const auto scores = moge::batch_scores(to_tokens(tokens, n_tokens, dim), router->value);
        std::copy(scores.data().begin(), scores.data().end(), scores_out);
    });
}

moge_status moge_route_batch(const moge_router* router, moge_dims dims, moge_mode mode,
                             const double* tokens, size_t n_tokens, size_t dim, moge_trace** out) {
    return guarded([&] {
        require(router != nullptr, "router");
        require(out != nullptr, "output");
        const auto cfg = to_config(dims);
        const auto batch = to_tokens(tokens, n_tokens, dim);
        *out = new moge_trace{moge::route_batch(batch, router->value, cfg, to_mode(mode))};
    });
}

size_t moge_trace_size(const moge_trace* trace) { return trace ? trace->value.size() : 0; }

moge_status moge_trace_token_size(const moge_trace* trace, size_t token, size_t* out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        require(out != nullptr, "output");
        if (token >= trace->value.size()) throw moge::RangeError("token index out of range");
        *out = trace->value.routes[token].selected.size();
    });
}

moge_status moge_trace_get(const moge_trace* trace, size_t token, int32_t* selected,
                           double* weights) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        if (token >= trace->value.size()) throw moge::RangeError("token index out of range");
        const auto& r = trace->value.routes[token];
        for (std::size_t j = 0; j < r.selected.size(); ++j) {
            if (selected) selected[j] = static_cast<int32_t>(r.selected[j]);
            if (weights) weights[j] = r.weights[j];
        }
    });
}

moge_status moge_trace_to_jsonl(const moge_trace* trace, moge_string** out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        emit(moge::trace_to_jsonl(trace->value), out);
    });
}

moge_status moge_trace_from_jsonl(const char* data, size_t size, moge_dims dims,
                                  moge_trace** out) {
    return guarded([&] {
        require(data != nullptr || size == 0, "data");
        require(out != nullptr, "output");
        const auto cfg = to_config(dims);
        *out = new moge_trace{moge::trace_from_jsonl(std::string_view(data, size), cfg)};
    });
}

void moge_trace_destroy(moge_trace* trace) { delete trace; }

moge_status moge_device_loads(const moge_trace* trace, moge_dims dims, int64_t* loads_out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        require(loads_out != nullptr, "output");
        const auto cfg = to_config(dims);
        check_trace_config(trace->value, cfg);
        const auto profile = moge::device_loads(trace->value, cfg);
        std::copy(profile.loads.begin(), profile.loads.end(), loads_out);
    });
}

moge_status moge_imbalance_score(const int64_t* loads, size_t n_devices, size_t batch_size,
                                 double* out) {
    return guarded([&] {
        require(loads != nullptr || n_devices == 0, "loads");
        require(out != nullptr, "output");
        moge::DeviceLoadProfile profile{std::vector<std::int64_t>(loads, loads + n_devices),
                                        batch_size};
        *out = moge::imbalance_score(profile);
    });
}

moge_status moge_aux_loss(const moge_trace* trace, const double* scores, size_t n_tokens,
                          moge_dims dims, double alpha, double* f_out, double* p_out,
                          double* loss_out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        require(loss_out != nullptr, "output");
        const auto cfg = to_config(dims);
        require(scores != nullptr || n_tokens == 0, "scores");
        moge::Matrix s(n_tokens, cfg.n_experts(),
                       std::vector<double>(scores, scores + n_tokens * cfg.n_experts()));
        const auto report = moge::aux_loss(trace->value, s, alpha, cfg);
        if (f_out) std::copy(report.f.begin(), report.f.end(), f_out);
        if (p_out) std::copy(report.p.begin(), report.p.end(), p_out);
        *loss_out = report.loss;
    });
}

moge_status moge_simulate_is(moge_dims dims, moge_mode mode, size_t batch_size, uint64_t trials,
                             uint64_t seed, uint32_t threads, moge_histogram** out) {
    return guarded([&] {
        require(out != nullptr, "output");
        const auto cfg = to_config(dims);
        auto h = moge::simulate_is_distribution(cfg, batch_size, trials, seed,
                                                {to_mode(mode), threads});
        auto bins = h.bins();
        *out = new moge_histogram{std::move(h), std::move(bins)};
    });
}

size_t moge_histogram_bins(const moge_histogram* histogram) {
    return histogram ? histogram->bins.size() : 0;
}

moge_status moge_histogram_bin(const moge_histogram* histogram, size_t index, double* is_value,
                               double* probability) {
    return guarded([&] {
        require(histogram != nullptr, "histogram");
        if (index >= histogram->bins.size()) throw moge::RangeError("bin index out of range");
        if (is_value) *is_value = histogram->bins[index].is_value;
        if (probability) *probability = histogram->bins[index].probability;
    });
}

moge_status moge_histogram_to_csv(const moge_histogram* histogram, moge_string** out) {
    return guarded([&] {
        require(histogram != nullptr, "histogram");
        emit(moge::histogram_to_csv(histogram->value), out);
    });
}

void moge_histogram_destroy(moge_histogram* histogram) { delete histogram; }

moge_status moge_usage_histogram(const moge_trace* trace, moge_dims dims, double* per_token_out,
                                 double* share_out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        const auto cfg = to_config(dims);
        check_trace_config(trace->value, cfg);
        const auto h = moge::usage_histogram(trace->value, cfg);
        if (per_token_out) std::copy(h.per_token.begin(), h.per_token.end(), per_token_out);
        if (share_out) std::copy(h.share.begin(), h.share.end(), share_out);
    });
}

moge_status moge_coactivation(const moge_trace* trace, moge_dims dims, double* scores_out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        require(scores_out != nullptr, "output");
        const auto cfg = to_config(dims);
        check_trace_config(trace->value, cfg);
        const auto m = moge::coactivation(trace->value, cfg);
        std::copy(m.scores.data().begin(), m.scores.data().end(), scores_out);
    });
}

moge_status moge_intra_group(const moge_trace* trace, moge_dims dims, int32_t group,
                             double* share_out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        require(share_out != nullptr, "output");
        const auto cfg = to_config(dims);
        check_trace_config(trace->value, cfg);
        if (group < 0) throw moge::RangeError("group index must be non-negative");
        const auto share =
            moge::intra_group_distribution(trace->value, cfg, static_cast<std::size_t>(group));
        std::copy(share.begin(), share.end(), share_out);
    });
}

moge_status moge_analysis_to_csv(const moge_trace* trace, moge_dims dims, moge_report report,
                                 moge_string** out) {
    return guarded([&] {
        require(trace != nullptr, "trace");
        const auto cfg = to_config(dims);
        check_trace_config(trace->value, cfg);
        switch (report) {
            case MOGE_REPORT_USAGE:
                emit(moge::usage_to_csv(moge::usage_histogram(trace->value, cfg)), out);
                return;
            case MOGE_REPORT_USAGE_SHARE:
                emit(moge::usage_share_to_csv(moge::usage_histogram(trace->value, cfg)), out);
                return;
            case MOGE_REPORT_COACTIVATION:
                emit(moge::coactivation_to_csv(moge::coactivation(trace->value, cfg)), out);
                return;
            case MOGE_REPORT_INTRA_GROUP:
                if (trace->value.empty()) throw moge::EmptyInputError("analysis of an empty trace");
                emit(moge::intra_group_to_csv(trace->value, cfg), out);
                return;
        }
        throw moge::ArgumentError("unknown report kind");
    });
}

moge_status moge_step_cost(const int64_t* loads, size_t n_devices, size_t batch_size, double cost,
                           double* per_device_out, double* makespan_out) {
    return guarded([&] {
        require(loads != nullptr || n_devices == 0, "loads");
        moge::DeviceLoadProfile profile{std::vector<std::int64_t>(loads, loads + n_devices),
                                        batch_size};
        const auto report = moge::step_cost(profile, cost);
        if (per_device_out)
            std::copy(report.per_device_cost.begin(), report.per_device_cost.end(), per_device_out);
        if (makespan_out) *makespan_out = report.makespan;
    });
}

moge_status moge_compare_routing_cost(const moge_router* router, moge_dims dims,
                                      size_t batch_size, double cost, uint64_t trials,
                                      uint64_t seed, double* topk_makespan_out,
                                      double* moge_makespan_out) {
    return guarded([&] {
        const auto cfg = to_config(dims);
        const auto result =
            router ? moge::compare_routing_cost(router->value, cfg, batch_size, cost, trials, seed)
                   : moge::compare_routing_cost_iid(cfg, batch_size, cost, trials, seed);
        if (topk_makespan_out)
            std::copy(result.topk_makespan.begin(), result.topk_makespan.end(), topk_makespan_out);
        if (moge_makespan_out)
            std::copy(result.moge_makespan.begin(), result.moge_makespan.end(), moge_makespan_out);
    });
}

moge_status moge_layer_create_random(moge_dims dims, size_t dim, size_t hidden_dim,
                                     size_t n_shared, moge_activation activation, uint64_t seed,
                                     moge_layer** out) {
    return guarded([&] {
        require(out != nullptr, "output");
        const auto cfg = to_config(dims);
        auto rng = moge::Rng::for_stream(seed, 2);
        *out = new moge_layer{
            moge::MoeLayer::random(cfg, dim, hidden_dim, n_shared, to_activation(activation), rng)};
    });
}

moge_status moge_layer_forward(const moge_layer* layer, moge_mode mode, const double* token,
                               size_t dim, double* output_out, double* gate_out) {
    return guarded([&] {
        require(layer != nullptr, "layer");
        require(output_out != nullptr, "output");
        const auto tokens = to_tokens(token, 1, dim);
        const auto result = moge::layer_forward(layer->value, tokens[0], to_mode(mode));
        std::copy(result.output.values.begin(), result.output.values.end(), output_out);
        if (gate_out) std::copy(result.gate.weights.begin(), result.gate.weights.end(), gate_out);
    });
}

void moge_layer_destroy(moge_layer* layer) { delete layer; }

moge_status moge_params_from_json(const char* data, size_t size, moge_params** out) {
    return guarded([&] {
        require(data != nullptr || size == 0, "data");
        require(out != nullptr, "output");
        *out = new moge_params(moge::params_from_json(std::string_view(data, size)));
    });
}

moge_status moge_params_to_json(const moge_params* params, moge_string** out) {
    return guarded([&] {
        require(params != nullptr, "params");
        emit(moge::params_to_json(params->value), out);
    });
}

size_t moge_params_count(const moge_params* params) { return params ? params->names.size() : 0; }

const char* moge_params_name(const moge_params* params, size_t index) {
    if (!params || index >= params->names.size()) return nullptr;
    return params->names[index].c_str();
}

moge_status moge_params_get(const moge_params* params, const char* name, const double** values,
                            size_t* size, const size_t** shape, size_t* rank) {
    return guarded([&] {
        require(params != nullptr, "params");
        require(name != nullptr, "name");
        const auto it = params->value.find(name);
        if (it == params->value.end())
            throw moge::RangeError(std::string("no parameter named '") + name + "'");
        if (values) *values = it->second.values.data();
        if (size) *size = it->second.values.size();
        if (shape) *shape = it->second.shape.data();
        if (rank) *rank = it->second.shape.size();
    });
}

void moge_params_destroy(moge_params* params) { delete params; }

moge_status moge_merge_checkpoints(const moge_params* base, size_t n_groups, const double* lambdas,
                                   const size_t* group_sizes,
                                   const moge_params* const* checkpoints, moge_params** out) {
    return guarded([&] {
        require(base != nullptr, "base");
        require(out != nullptr, "output");
        require((lambdas != nullptr && group_sizes != nullptr) || n_groups == 0, "plan");
        moge::MergePlan plan;
        std::size_t next = 0;
        for (std::size_t k = 0; k < n_groups; ++k) {
            moge::MergeGroup group{lambdas[k], {}};
            for (std::size_t i = 0; i < group_sizes[k]; ++i, ++next) {
                require(checkpoints != nullptr && checkpoints[next] != nullptr, "checkpoint");
                group.checkpoints.push_back(checkpoints[next]->value);
            }
            plan.groups.push_back(std::move(group));
        }
        *out = new moge_params(moge::merge_checkpoints(base->value, plan));
    });
}

moge_status moge_smoothing_vector(const double* act_absmax, size_t dim,
                                  const double* expert_w_absmax, size_t n_experts,
                                  const double* router_w_absmax, double alpha, double* out) {
    return guarded([&] {
        require(out != nullptr || dim == 0, "output");
        require((act_absmax != nullptr && router_w_absmax != nullptr) || dim == 0, "maxima");
        require(expert_w_absmax != nullptr || n_experts * dim == 0, "expert maxima");
        moge::SmoothingInput input;
        input.act_absmax.assign(act_absmax, act_absmax + dim);
        input.router_w_absmax.assign(router_w_absmax, router_w_absmax + dim);
        input.expert_w_absmax = moge::Matrix(
            n_experts, dim, std::vector<double>(expert_w_absmax, expert_w_absmax + n_experts * dim));
        input.migration_strength = alpha;
        const auto s = moge::smoothing_vector(input);
        std::copy(s.begin(), s.end(), out);
    });
}

}  // extern "C"
