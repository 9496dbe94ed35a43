#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "moge/matrix.hpp"
#include "moge/routing.hpp"

namespace moge {

/// Expert computations T_i handled by each device for one batch.
struct DeviceLoadProfile {
    std::vector<std::int64_t> loads;
    std::size_t batch_size = 0;

    std::int64_t max_load() const;
    std::int64_t min_load() const;
    /// max - min; the numerator of the imbalance score.
    std::int64_t spread() const { return max_load() - min_load(); }
};

/// Counts (token, expert) pairs per device, with group j placed on device j.
/// Throws RangeError if a trace index is outside [0, N).
DeviceLoadProfile device_loads(const RoutingTrace& trace, const RoutingConfig& cfg);

/// (max_i T_i - min_i T_i) / |X|.
double imbalance_score(const DeviceLoadProfile& profile);

/// Empirical distribution of the imbalance score over D simulated batches.
///
/// Bins are keyed by the integer spread (max - min load); the score itself is
/// spread / batch_size, so every observed value is an exact multiple of
/// 1/|X|.
class IsHistogram {
public:
    struct Bin {
        std::int64_t spread;
        double is_value;
        double probability;
    };

    IsHistogram(std::size_t batch_size, std::uint64_t trials,
                std::map<std::int64_t, std::uint64_t> counts);

    std::size_t batch_size() const noexcept { return batch_size_; }
    std::uint64_t trials() const noexcept { return trials_; }
    const std::map<std::int64_t, std::uint64_t>& counts() const noexcept { return counts_; }

    /// Bins in ascending order of IS value.
    std::vector<Bin> bins() const;

    /// Estimated P(IS > 0).
    double probability_imbalanced() const;

    bool operator==(const IsHistogram&) const = default;

private:
    std::size_t batch_size_;
    std::uint64_t trials_;
    std::map<std::int64_t, std::uint64_t> counts_;
};

struct SimulationOptions {
    /// TopK draws a uniform K-subset of all N experts per token; MoGE draws a
    /// uniform K'-subset inside every group.
    RoutingMode mode = RoutingMode::TopK;
    /// Worker threads; 0 means hardware concurrency. Results do not depend on it.
    unsigned threads = 0;
};

/// Monte Carlo estimate of the imbalance score distribution under random
/// routing. Trial t draws from Rng::for_stream(seed, t). Throws ArgumentError
/// when trials or batch_size is zero.
IsHistogram simulate_is_distribution(const RoutingConfig& cfg, std::size_t batch_size,
                                     std::uint64_t trials, std::uint64_t seed,
                                     SimulationOptions options = {});

struct AuxLossReport {
    double alpha = 0.0;
    std::vector<double> f;  ///< N/(K|B|) * selection counts; sums to N
    std::vector<double> p;  ///< mean global softmax score; sums to 1
    double loss = 0.0;      ///< alpha * sum_i f_i p_i
};

/// Batch-level load-balancing loss. `scores` holds the pre-selection global
/// softmax vector of every token (|B| x N). Throws DimensionError when the
/// trace and score rows disagree and ArgumentError for negative alpha.
AuxLossReport aux_loss(const RoutingTrace& trace, const Matrix& scores, double alpha,
                       const RoutingConfig& cfg);

}  // namespace moge
