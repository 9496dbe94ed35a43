#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "moge/matrix.hpp"

namespace moge {

/// Real array of arbitrary shape; a scalar has an empty shape.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    bool operator==(const Tensor&) const = default;
};

/// Named arrays standing in for a model checkpoint.
using ParameterSet = std::map<std::string, Tensor>;

struct MergeGroup {
    double lambda = 0.0;
    std::vector<ParameterSet> checkpoints;
};

struct MergePlan {
    std::vector<MergeGroup> groups;
};

/// base + sum_k lambda_k * (1/N_k) * sum_i (ckpt_i^k - base), per element.
///
/// Every element is evaluated as a correctly rounded sum of exact products, so
/// the result does not depend on group or checkpoint order and the degenerate
/// plans (zero lambdas, a single checkpoint with lambda 1, checkpoints equal to
/// base) reproduce their inputs bit for bit. Throws DimensionError naming the
/// offending parameter on a name or shape mismatch and ArgumentError on an
/// empty group.
ParameterSet merge_checkpoints(const ParameterSet& base, const MergePlan& plan);

/// Correctly rounded sum of `values` (Shewchuk / msum).
double exact_sum(std::vector<double> values);

struct SmoothingInput {
    std::vector<double> act_absmax;       ///< max |x_j| per channel, length d
    Matrix expert_w_absmax;               ///< n x d, max |W^i_j|
    std::vector<double> router_w_absmax;  ///< max |W^gate_j|, length d
    double migration_strength = 0.5;      ///< alpha in [0, 1]
};

/// a^alpha / w^(1 - alpha): the scale one weight matrix asks of channel j.
double smoothing_requirement(double act_absmax, double weight_absmax, double alpha);

/// Channel-wise maximum over every expert's requirement and the router's.
/// Throws DataError for a non-positive maximum, ArgumentError for alpha outside
/// [0, 1] and DimensionError on length mismatch.
std::vector<double> smoothing_vector(const SmoothingInput& input);

}  // namespace moge
