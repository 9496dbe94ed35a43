#include <doctest.h>

#include <cmath>

#include "moge/device_sim.hpp"
#include "moge/error.hpp"
#include "moge/random.hpp"

using namespace moge;

TEST_CASE("step_cost") {
    SUBCASE("figure loads") {
        const auto r = step_cost({{0, 4, 1, 3}, 1}, 1.0);
        CHECK(r.makespan == 4.0);
        CHECK(r.per_device_cost == std::vector<double>{0, 4, 1, 3});
        CHECK(r.mean_load == 2.0);
    }
    SUBCASE("equal loads") {
        // K' * |X| = 2 * 16 on each of 4 devices, K = 8.
        const auto r = step_cost({{32, 32, 32, 32}, 16}, 0.5);
        CHECK(r.makespan == 8.0 * 16.0 * 0.5 / 4.0);
        CHECK(r.makespan == r.mean_cost);
    }
    SUBCASE("hand multiply") {
        const auto r = step_cost({{7, 3, 5, 1}, 2}, 2.0);
        CHECK(r.makespan == 14.0);
        CHECK(r.makespan >= r.mean_cost);
    }
    SUBCASE("non-positive cost") {
        CHECK_THROWS_AS(step_cost({{1, 2}, 1}, 0.0), ArgumentError);
        CHECK_THROWS_AS(step_cost({{1, 2}, 1}, -1.0), ArgumentError);
    }
}

TEST_CASE("compare_routing_cost") {
    const RoutingConfig cfg(64, 8, 8);

    SUBCASE("moge never slower and constant") {
        Rng rng(1);
        const auto router = random_router(16, 64, rng);
        const auto r = compare_routing_cost(router, cfg, 16, 1.5, 500, 7);
        REQUIRE(r.topk_makespan.size() == 500);
        for (std::size_t t = 0; t < 500; ++t) {
            CHECK(r.moge_makespan[t] == 8.0 * 16.0 * 1.5 / 8.0);
            CHECK(r.moge_makespan[t] <= r.topk_makespan[t]);
        }
    }
    SUBCASE("disparity reduction is positive") {
        const auto r = compare_routing_cost_iid(cfg, 16, 1.0, 10000, 3);
        CHECK(r.mean_disparity_reduction() > 0.0);
        std::size_t strict = 0;
        for (std::size_t t = 0; t < r.topk_makespan.size(); ++t)
            strict += r.moge_makespan[t] < r.topk_makespan[t];
        CHECK(strict > r.topk_makespan.size() / 2);
    }
    SUBCASE("large batches approach the mean") {
        const auto r = compare_routing_cost_iid(cfg, 4096, 1.0, 20, 5);
        for (std::size_t t = 0; t < 20; ++t)
            CHECK(r.topk_makespan[t] / r.moge_makespan[t] < 1.05);
    }
    SUBCASE("deterministic given seed") {
        const auto a = compare_routing_cost_iid(cfg, 16, 1.0, 50, 11);
        const auto b = compare_routing_cost_iid(cfg, 16, 1.0, 50, 11);
        CHECK(a.topk_makespan == b.topk_makespan);
        CHECK(a.topk_spread == b.topk_spread);
    }
    SUBCASE("argument checks") {
        CHECK_THROWS_AS(compare_routing_cost_iid(cfg, 16, 0.0, 5, 1), ArgumentError);
        Rng rng(2);
        CHECK_THROWS_AS(compare_routing_cost(random_router(4, 32, rng), cfg, 16, 1.0, 5, 1),
                        DimensionError);
    }
}
