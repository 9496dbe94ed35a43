#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>

namespace moge {

/// Seeded random source used by every simulation in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The mapping to bounded integers, uniform reals and normals is
/// done here rather than through <random> distributions, which are
/// implementation-defined, so a given seed produces the same numbers with any
/// standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent stream `stream` of the generator family identified by
    /// `seed`. Monte Carlo trial t uses for_stream(seed, t), which makes
    /// results independent of how trials are scheduled across threads.
    static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t uniform_below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Standard normal variate (Box-Muller).
    double normal();

    /// Moves a uniformly random k-subset of `items` into items[0..k).
    /// Works from any starting permutation, so callers may reuse the buffer.
    template <typename T>
    void partial_shuffle(std::span<T> items, std::size_t k) {
        for (std::size_t i = 0; i < k; ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_below(items.size() - i));
            std::swap(items[i], items[j]);
        }
    }

private:
    explicit Rng(std::seed_seq& seq) : engine_(seq) {}

    std::mt19937_64 engine_;
    std::optional<double> spare_normal_;
};

}  // namespace moge
