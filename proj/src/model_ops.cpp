#include "moge/model_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "moge/error.hpp"

namespace moge {

double exact_sum(std::vector<double> values) {
    // Shewchuk's non-overlapping partials, rounded half-even at the end.
    std::vector<double> partials;
    for (double x : values) {
        std::size_t used = 0;
        for (double y : partials) {
            if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
            const double hi = x + y;
            const double lo = y - (hi - x);
            if (lo != 0.0) partials[used++] = lo;
            x = hi;
        }
        partials.resize(used);
        partials.push_back(x);
    }

    std::size_t n = partials.size();
    if (n == 0) return 0.0;
    double hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials[--n];
        hi = x + y;
        lo = y - (hi - x);
        if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        if (y == x - hi) hi = x;
    }
    return hi;
}

namespace {

std::string shape_text(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void check_compatible(const ParameterSet& base, const ParameterSet& other, std::size_t group,
                      std::size_t index) {
    const std::string where =
        " (group " + std::to_string(group) + ", checkpoint " + std::to_string(index) + ")";
    for (const auto& [name, tensor] : base) {
        const auto it = other.find(name);
        if (it == other.end()) throw DimensionError("parameter '" + name + "' is missing" + where);
        if (it->second.shape != tensor.shape || it->second.values.size() != tensor.values.size()) {
            throw DimensionError("parameter '" + name + "' has shape " +
                                 shape_text(it->second.shape) + ", base has " +
                                 shape_text(tensor.shape) + where);
        }
    }
    for (const auto& [name, tensor] : other)
        if (!base.contains(name))
            throw DimensionError("parameter '" + name + "' is not in the base" + where);
}

// Appends a*b as an unevaluated pair of doubles.
void push_product(std::vector<double>& terms, double a, double b) {
    const double p = a * b;
    terms.push_back(p);
    terms.push_back(std::fma(a, b, -p));
}

}  // namespace

ParameterSet merge_checkpoints(const ParameterSet& base, const MergePlan& plan) {
    for (std::size_t k = 0; k < plan.groups.size(); ++k) {
        const auto& group = plan.groups[k];
        if (group.checkpoints.empty())
            throw ArgumentError("merge group " + std::to_string(k) + " has no checkpoints");
        if (!std::isfinite(group.lambda))
            throw ArgumentError("merge group " + std::to_string(k) + " has a non-finite weight");
        for (std::size_t i = 0; i < group.checkpoints.size(); ++i)
            check_compatible(base, group.checkpoints[i], k, i);
    }

    ParameterSet merged;
    std::vector<double> terms;
    for (const auto& [name, tensor] : base) {
        Tensor out{tensor.shape, std::vector<double>(tensor.values.size())};
        for (std::size_t e = 0; e < tensor.values.size(); ++e) {
            const double b = tensor.values[e];
            terms.clear();
            terms.push_back(b);
            for (const auto& group : plan.groups) {
                if (group.lambda == 0.0) continue;
                const double weight =
                    group.lambda / static_cast<double>(group.checkpoints.size());
                for (const auto& ckpt : group.checkpoints) {
                    push_product(terms, weight, ckpt.at(name).values[e]);
                    push_product(terms, weight, -b);
                }
            }
            out.values[e] = exact_sum(terms);
            if (!std::isfinite(out.values[e]))
                throw DataError("parameter '" + name + "' merged to a non-finite value");
        }
        merged.emplace(name, std::move(out));
    }
    return merged;
}

double smoothing_requirement(double act_absmax, double weight_absmax, double alpha) {
    return std::pow(act_absmax, alpha) / std::pow(weight_absmax, 1.0 - alpha);
}

std::vector<double> smoothing_vector(const SmoothingInput& input) {
    const double alpha = input.migration_strength;
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ArgumentError("migration strength must lie in [0, 1]");
    const std::size_t d = input.act_absmax.size();
    if (input.router_w_absmax.size() != d)
        throw DimensionError("router maxima have " + std::to_string(input.router_w_absmax.size()) +
                             " channels, activations have " + std::to_string(d));
    if (input.expert_w_absmax.cols() != d)
        throw DimensionError("expert maxima have " + std::to_string(input.expert_w_absmax.cols()) +
                             " channels, activations have " + std::to_string(d));

    const auto positive = [](double v, const std::string& what) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw DataError(what + " must be positive and finite");
    };

    std::vector<double> scale(d);
    for (std::size_t j = 0; j < d; ++j) {
        const std::string channel = " of channel " + std::to_string(j);
        positive(input.act_absmax[j], "activation maximum" + channel);
        positive(input.router_w_absmax[j], "router weight maximum" + channel);
        double best = smoothing_requirement(input.act_absmax[j], input.router_w_absmax[j], alpha);
        for (std::size_t i = 0; i < input.expert_w_absmax.rows(); ++i) {
            const double w = input.expert_w_absmax(i, j);
            positive(w, "expert " + std::to_string(i) + " weight maximum" + channel);
            best = std::max(best, smoothing_requirement(input.act_absmax[j], w, alpha));
        }
        scale[j] = best;
    }
    return scale;
}

}  // namespace moge
