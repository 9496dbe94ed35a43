#include "moge/balance.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <thread>

#include "moge/error.hpp"
#include "moge/random.hpp"

namespace moge {

std::int64_t DeviceLoadProfile::max_load() const {
    if (loads.empty()) return 0;
    return *std::max_element(loads.begin(), loads.end());
}

std::int64_t DeviceLoadProfile::min_load() const {
    if (loads.empty()) return 0;
    return *std::min_element(loads.begin(), loads.end());
}

DeviceLoadProfile device_loads(const RoutingTrace& trace, const RoutingConfig& cfg) {
    DeviceLoadProfile profile;
    profile.loads.assign(cfg.n_groups(), 0);
    profile.batch_size = trace.size();
    for (std::size_t t = 0; t < trace.size(); ++t) {
        for (std::size_t e : trace.routes[t].selected) {
            if (e >= cfg.n_experts()) {
                throw RangeError("token " + std::to_string(t) + " selects expert " +
                                 std::to_string(e) + " outside [0, " +
                                 std::to_string(cfg.n_experts()) + ")");
            }
            ++profile.loads[cfg.group_of(e)];
        }
    }
    return profile;
}

double imbalance_score(const DeviceLoadProfile& profile) {
    if (profile.batch_size == 0) throw EmptyInputError("imbalance score of an empty batch");
    return static_cast<double>(profile.spread()) / static_cast<double>(profile.batch_size);
}

IsHistogram::IsHistogram(std::size_t batch_size, std::uint64_t trials,
                         std::map<std::int64_t, std::uint64_t> counts)
    : batch_size_(batch_size), trials_(trials), counts_(std::move(counts)) {}

std::vector<IsHistogram::Bin> IsHistogram::bins() const {
    std::vector<Bin> out;
    out.reserve(counts_.size());
    for (const auto& [spread, count] : counts_) {
        out.push_back({spread, static_cast<double>(spread) / static_cast<double>(batch_size_),
                       static_cast<double>(count) / static_cast<double>(trials_)});
    }
    return out;
}

double IsHistogram::probability_imbalanced() const {
    std::uint64_t imbalanced = 0;
    for (const auto& [spread, count] : counts_)
        if (spread > 0) imbalanced += count;
    return static_cast<double>(imbalanced) / static_cast<double>(trials_);
}

namespace {

// Spread (max - min device load) of one simulated batch.
std::int64_t simulate_batch(const RoutingConfig& cfg, std::size_t batch_size, RoutingMode mode,
                            Rng& rng, std::vector<std::size_t>& experts,
                            std::vector<std::int64_t>& loads) {
    std::fill(loads.begin(), loads.end(), 0);
    const std::span<std::size_t> all(experts);
    for (std::size_t t = 0; t < batch_size; ++t) {
        if (mode == RoutingMode::TopK) {
            rng.partial_shuffle(all, cfg.n_active());
            for (std::size_t j = 0; j < cfg.n_active(); ++j) ++loads[cfg.group_of(all[j])];
        } else {
            for (std::size_t g = 0; g < cfg.n_groups(); ++g) {
                const auto [begin, end] = cfg.group_range(g);
                auto group = all.subspan(begin, end - begin);
                rng.partial_shuffle(group, cfg.per_group_active());
                for (std::size_t j = 0; j < cfg.per_group_active(); ++j) ++loads[cfg.group_of(group[j])];
            }
        }
    }
    const auto [lo, hi] = std::minmax_element(loads.begin(), loads.end());
    return *hi - *lo;
}

}  // namespace

IsHistogram simulate_is_distribution(const RoutingConfig& cfg, std::size_t batch_size,
                                     std::uint64_t trials, std::uint64_t seed,
                                     SimulationOptions options) {
    if (trials == 0) throw ArgumentError("trial count must be positive");
    if (batch_size == 0) throw ArgumentError("batch size must be positive");

    // spread <= K * |X|, so a dense count vector indexed by spread suffices.
    const std::size_t max_spread = cfg.n_active() * batch_size;
    unsigned workers = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
    workers = static_cast<unsigned>(std::clamp<std::uint64_t>(workers, 1, trials));

    std::vector<std::vector<std::uint64_t>> partial(workers,
                                                    std::vector<std::uint64_t>(max_spread + 1, 0));
    const auto run = [&](unsigned w) {
        const std::uint64_t begin = trials * w / workers;
        const std::uint64_t end = trials * (w + 1) / workers;
        std::vector<std::size_t> experts(cfg.n_experts());
        std::iota(experts.begin(), experts.end(), std::size_t{0});
        std::vector<std::int64_t> loads(cfg.n_groups());
        for (std::uint64_t t = begin; t < end; ++t) {
            auto rng = Rng::for_stream(seed, t);
            // Start every trial from the identity permutation so it depends
            // only on its own stream.
            std::iota(experts.begin(), experts.end(), std::size_t{0});
            ++partial[w][static_cast<std::size_t>(
                simulate_batch(cfg, batch_size, options.mode, rng, experts, loads))];
        }
    };

    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }

    std::map<std::int64_t, std::uint64_t> counts;
    for (std::size_t s = 0; s <= max_spread; ++s) {
        std::uint64_t total = 0;
        for (const auto& p : partial) total += p[s];
        if (total != 0) counts.emplace(static_cast<std::int64_t>(s), total);
    }
    return IsHistogram(batch_size, trials, std::move(counts));
}

AuxLossReport aux_loss(const RoutingTrace& trace, const Matrix& scores, double alpha,
                       const RoutingConfig& cfg) {
    if (trace.empty()) throw EmptyInputError("auxiliary loss of an empty batch");
    if (scores.rows() != trace.size()) {
        throw DimensionError("trace has " + std::to_string(trace.size()) + " tokens but " +
                             std::to_string(scores.rows()) + " score rows were given");
    }
    if (scores.cols() != cfg.n_experts())
        throw DimensionError("score rows must have one entry per expert");
    if (!(alpha >= 0.0)) throw ArgumentError("alpha must be non-negative");

    const std::size_t n = cfg.n_experts();
    const double batch = static_cast<double>(trace.size());
    std::vector<double> counts(n, 0.0);
    for (std::size_t t = 0; t < trace.size(); ++t) {
        for (std::size_t e : trace.routes[t].selected) {
            if (e >= n) throw RangeError("trace selects expert " + std::to_string(e));
            counts[e] += 1.0;
        }
    }

    AuxLossReport report;
    report.alpha = alpha;
    report.f.resize(n);
    report.p.assign(n, 0.0);
    const double f_scale = static_cast<double>(n) / (static_cast<double>(cfg.n_active()) * batch);
    for (std::size_t i = 0; i < n; ++i) report.f[i] = f_scale * counts[i];
    for (std::size_t t = 0; t < scores.rows(); ++t) {
        const auto row = scores.row(t);
        for (std::size_t i = 0; i < n; ++i) report.p[i] += row[i];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        report.p[i] /= batch;
        total += report.f[i] * report.p[i];
    }
    report.loss = alpha * total;
    return report;
}

}  // namespace moge
