#include <doctest.h>

#include <cmath>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include "moge/error.hpp"
#include "moge/model_ops.hpp"
#include "oracles.hpp"

using namespace moge;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

ParameterSet scalar_set(double v) { return {{"w", Tensor{{}, {v}}}}; }

ParameterSet random_set(oracle::Gen& gen, double scale) {
    ParameterSet p;
    p["layer.bias"] = Tensor{{3}, gen.normals(3)};
    p["layer.weight"] = Tensor{{2, 3}, gen.normals(6)};
    p["scalar"] = Tensor{{}, {gen.normal()}};
    for (auto& [name, t] : p)
        for (double& v : t.values) v *= std::pow(10.0, gen.uniform(-scale, scale));
    return p;
}

}  // namespace

TEST_CASE("exact_sum is correctly rounded") {
    CHECK(exact_sum({}) == 0.0);
    CHECK(exact_sum({1e100, 1.0, -1e100}) == 1.0);
    CHECK(exact_sum(std::vector<double>(10, 0.1)) == 1.0);
    CHECK(exact_sum({1.0, 1e-16, 1e-16}) == 1.0 + 2e-16);
    oracle::Gen gen(3);
    for (int rep = 0; rep < 200; ++rep) {
        // 400 binary digits hold these sums exactly.
        using Wide = boost::multiprecision::number<
            boost::multiprecision::cpp_bin_float<400, boost::multiprecision::digit_base_2>>;
        std::vector<double> v;
        Wide want = 0;
        for (int i = 0; i < 20; ++i) {
            v.push_back(gen.normal() * std::pow(10.0, gen.uniform(-20, 20)));
            want += Wide(v.back());
        }
        CHECK(exact_sum(v) == static_cast<double>(want));
    }
}

TEST_CASE("merge_checkpoints") {
    SUBCASE("one checkpoint with unit weight returns it") {
        oracle::Gen gen(1);
        for (int rep = 0; rep < 50; ++rep) {
            const auto base = random_set(gen, 8.0);
            const auto ckpt = random_set(gen, 8.0);
            CHECK(merge_checkpoints(base, {{{1.0, {ckpt}}}}) == ckpt);
        }
    }
    SUBCASE("zero weights return the base") {
        oracle::Gen gen(2);
        const auto base = random_set(gen, 4.0);
        const MergePlan plan{{{0.0, {random_set(gen, 4.0), random_set(gen, 4.0)}},
                              {0.0, {random_set(gen, 4.0)}}}};
        CHECK(merge_checkpoints(base, plan) == base);
    }
    SUBCASE("checkpoints equal to the base return the base") {
        oracle::Gen gen(3);
        const auto base = random_set(gen, 6.0);
        const MergePlan plan{{{0.3, {base, base, base}}, {0.9, {base}}, {-1.7, {base, base}}}};
        CHECK(merge_checkpoints(base, plan) == base);
    }
    SUBCASE("identical checkpoints with unit weight") {
        oracle::Gen gen(4);
        const auto base = random_set(gen, 1.0);
        const auto p = random_set(gen, 1.0);
        const auto merged = merge_checkpoints(base, {{{1.0, {p, p, p}}}});
        for (const auto& [name, t] : p)
            for (std::size_t i = 0; i < t.values.size(); ++i)
                CHECK(merged.at(name).values[i] == doctest::Approx(t.values[i]).epsilon(1e-15));
    }
    SUBCASE("two groups of scalars match the hand formula") {
        // 1 + 0.5 * ((2 + 4)/2 - 1) + 0.5 * (-3 - 1) = 0
        const auto merged = merge_checkpoints(
            scalar_set(1.0), {{{0.5, {scalar_set(2.0), scalar_set(4.0)}}, {0.5, {scalar_set(-3.0)}}}});
        CHECK(merged.at("w").values[0] == 0.0);

        oracle::Gen gen(5);
        for (int rep = 0; rep < 200; ++rep) {
            const double b = gen.normal(), a = gen.normal(), bb = gen.normal(), c = gen.normal();
            const double l1 = gen.uniform(-1, 1), l2 = gen.uniform(-1, 1);
            const Big want = Big(b) + Big(l1) * ((Big(a) + Big(bb)) / 2 - Big(b)) +
                             Big(l2) * (Big(c) - Big(b));
            const auto got = merge_checkpoints(
                scalar_set(b), {{{l1, {scalar_set(a), scalar_set(bb)}}, {l2, {scalar_set(c)}}}});
            CHECK(std::fabs(got.at("w").values[0] - static_cast<double>(want)) < 1e-12);
        }
    }
    SUBCASE("mismatches name the parameter") {
        const ParameterSet base{{"a", Tensor{{2}, {1, 2}}}, {"b", Tensor{{}, {0}}}};
        ParameterSet wrong_shape = base;
        wrong_shape["a"] = Tensor{{1, 2}, {1, 2}};
        ParameterSet missing{{"b", Tensor{{}, {0}}}};
        ParameterSet extra = base;
        extra["c"] = Tensor{{}, {1}};
        for (const auto& bad : {wrong_shape, missing, extra}) {
            try {
                merge_checkpoints(base, {{{0.5, {bad}}}});
                FAIL("expected a DimensionError");
            } catch (const DimensionError& e) {
                const std::string msg = e.what();
                CHECK((msg.find("'a'") != std::string::npos || msg.find("'c'") != std::string::npos));
            }
        }
        CHECK_THROWS_AS(merge_checkpoints(base, {{{0.5, {}}}}), ArgumentError);
    }
}

TEST_CASE("smoothing_vector") {
    SUBCASE("symmetric input") {
        for (double c : {0.25, 1.0, 3.0, 17.5}) {
            for (double alpha : {0.0, 0.3, 0.5, 0.85, 1.0}) {
                SmoothingInput in{std::vector<double>(4, c), Matrix(3, 4, c),
                                  std::vector<double>(4, c), alpha};
                const auto s = smoothing_vector(in);
                for (double v : s) CHECK(v == doctest::Approx(std::pow(c, 2 * alpha - 1)).epsilon(1e-14));
                if (alpha == 0.5)
                    for (double v : s) CHECK(v == 1.0);
            }
        }
    }
    SUBCASE("hand value") {
        SmoothingInput in{{4.0}, Matrix(2, 1, 1.0), {1.0}, 0.5};
        CHECK(smoothing_vector(in)[0] == 2.0);
    }
    SUBCASE("max over experts and router") {
        oracle::Gen gen(7);
        for (int rep = 0; rep < 200; ++rep) {
            const std::size_t d = gen.index(1, 6);
            const std::size_t n = gen.index(1, 5);
            SmoothingInput in{{}, Matrix(n, d), {}, gen.uniform(0.0, 1.0)};
            for (std::size_t j = 0; j < d; ++j) {
                in.act_absmax.push_back(gen.uniform(0.01, 50.0));
                in.router_w_absmax.push_back(gen.uniform(0.01, 5.0));
            }
            for (double& w : in.expert_w_absmax.data()) w = gen.uniform(0.01, 5.0);
            const auto s = smoothing_vector(in);
            const double a = in.migration_strength;
            for (std::size_t j = 0; j < d; ++j) {
                bool attained = false;
                std::vector<double> reqs{smoothing_requirement(in.act_absmax[j], in.router_w_absmax[j], a)};
                for (std::size_t i = 0; i < n; ++i)
                    reqs.push_back(smoothing_requirement(in.act_absmax[j], in.expert_w_absmax(i, j), a));
                for (double r : reqs) {
                    CHECK(s[j] >= r);
                    attained |= s[j] == r;
                }
                CHECK(attained);
            }

            // Scaling activations by c scales the vector by c^alpha.
            const double c = gen.uniform(0.1, 10.0);
            auto scaled = in;
            for (double& x : scaled.act_absmax) x *= c;
            const auto s2 = smoothing_vector(scaled);
            for (std::size_t j = 0; j < d; ++j)
                CHECK(std::fabs(s2[j] - std::pow(c, a) * s[j]) <= 1e-9 * std::max(1.0, s2[j]));

            // Monotone: larger activations never shrink, larger weights never grow.
            auto bigger_w = in;
            for (double& w : bigger_w.expert_w_absmax.data()) w *= 1.5;
            for (double& w : bigger_w.router_w_absmax) w *= 1.5;
            const auto s3 = smoothing_vector(bigger_w);
            for (std::size_t j = 0; j < d; ++j) CHECK(s3[j] <= s[j]);
            if (c >= 1.0)
                for (std::size_t j = 0; j < d; ++j) CHECK(s2[j] >= s[j]);
        }
    }
    SUBCASE("errors") {
        SmoothingInput ok{{1.0, 2.0}, Matrix(1, 2, 1.0), {1.0, 1.0}, 0.5};
        CHECK_NOTHROW(smoothing_vector(ok));
        auto zero = ok;
        zero.expert_w_absmax(0, 1) = 0.0;
        CHECK_THROWS_AS(smoothing_vector(zero), DataError);
        auto neg = ok;
        neg.act_absmax[0] = -1.0;
        CHECK_THROWS_AS(smoothing_vector(neg), DataError);
        auto bad_alpha = ok;
        bad_alpha.migration_strength = 1.5;
        CHECK_THROWS_AS(smoothing_vector(bad_alpha), ArgumentError);
        auto short_router = ok;
        short_router.router_w_absmax.pop_back();
        CHECK_THROWS_AS(smoothing_vector(short_router), DimensionError);
    }
}
