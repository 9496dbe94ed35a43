#include "moge/random.hpp"

#include <cmath>
#include <numbers>

namespace moge {

namespace {

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::seed_seq seq{lo32(seed), hi32(seed)};
    engine_.seed(seq);
}

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t stream) {
    // Tagged so that stream seeding never coincides with Rng(seed).
    std::seed_seq seq{lo32(seed), hi32(seed), lo32(stream), hi32(stream), 0x6d6f6765u};
    return Rng(seq);
}

std::uint64_t Rng::uniform_below(std::uint64_t bound) {
    // 2^64 mod bound; rejecting values below it leaves a multiple of bound.
    const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return x % bound;
    }
}

double Rng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (spare_normal_) {
        const double v = *spare_normal_;
        spare_normal_.reset();
        return v;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 == 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

}  // namespace moge
