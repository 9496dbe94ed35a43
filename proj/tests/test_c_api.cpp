#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "moge/moge.h"

namespace {

std::string take(moge_string* s) {
    std::string out(moge_string_data(s), moge_string_size(s));
    moge_string_destroy(s);
    return out;
}

}  // namespace

TEST_CASE("status names and version") {
    CHECK(std::string(moge_version()) == "0.1.0");
    CHECK(std::string(moge_status_name(MOGE_OK)) == "ok");
    CHECK(std::string(moge_status_name(MOGE_E_CONFIG)) != "ok");
}

TEST_CASE("dims validation reports config errors") {
    CHECK(moge_dims_validate({64, 8, 8}) == MOGE_OK);
    CHECK(moge_dims_validate({10, 8, 8}) == MOGE_E_CONFIG);
    CHECK(std::strlen(moge_last_error()) > 0);
    CHECK(moge_dims_validate({8, 2, 4}) == MOGE_E_CONFIG);
    CHECK(moge_dims_validate({0, 0, 0}) == MOGE_E_CONFIG);
}

TEST_CASE("null arguments are rejected") {
    moge_router* router = nullptr;
    CHECK(moge_router_create(nullptr, 2, 2, &router) == MOGE_E_INVALID_ARGUMENT);
    CHECK(router == nullptr);
    const double w[4] = {1, 2, 3, 4};
    CHECK(moge_router_create(w, 2, 2, nullptr) == MOGE_E_INVALID_ARGUMENT);
    CHECK(moge_simulate_is({4, 2, 2}, MOGE_MODE_TOPK, 1, 10, 1, 1, nullptr) ==
          MOGE_E_INVALID_ARGUMENT);
    char buf[4];
    CHECK(moge_format_real(0.125, buf, sizeof buf) != MOGE_OK);
}

TEST_CASE("router rejects non-finite weights") {
    const double w[4] = {1, NAN, 3, 4};
    moge_router* router = nullptr;
    CHECK(moge_router_create(w, 2, 2, &router) == MOGE_E_DATA);
    CHECK(router == nullptr);
}

TEST_CASE("route a token") {
    // Identity router: logits equal the token.
    std::vector<double> w(16, 0.0);
    for (int i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
    moge_router* router = nullptr;
    REQUIRE(moge_router_create(w.data(), 4, 4, &router) == MOGE_OK);
    CHECK(moge_router_dim(router) == 4);
    CHECK(moge_router_experts(router) == 4);

    const double token[4] = {3.0, 2.0, 1.0, 0.0};
    double weights[4];
    std::int32_t selected[2];
    SUBCASE("top-k concentrates on one group") {
        REQUIRE(moge_route_token(router, {4, 2, 2}, MOGE_MODE_TOPK, token, 4, weights, selected) ==
                MOGE_OK);
        CHECK(selected[0] == 0);
        CHECK(selected[1] == 1);
        CHECK(weights[0] + weights[1] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(weights[2] == 0.0);
        CHECK(weights[3] == 0.0);
    }
    SUBCASE("moge picks one expert per group") {
        REQUIRE(moge_route_token(router, {4, 2, 2}, MOGE_MODE_MOGE, token, 4, weights, selected) ==
                MOGE_OK);
        CHECK(selected[0] == 0);
        CHECK(selected[1] == 2);
        double scores[4];
        REQUIRE(moge_global_scores(router, token, 1, 4, scores) == MOGE_OK);
        CHECK(weights[0] == scores[0]);
        CHECK(weights[2] == scores[2]);
        CHECK(weights[1] == 0.0);
    }
    SUBCASE("dimension mismatch") {
        CHECK(moge_route_token(router, {4, 2, 2}, MOGE_MODE_TOPK, token, 3, weights, selected) ==
              MOGE_E_DIMENSION);
    }
    moge_router_destroy(router);
}

TEST_CASE("trace round trip through jsonl") {
    moge_router* router = nullptr;
    REQUIRE(moge_router_create_random(6, 16, 5, &router) == MOGE_OK);
    std::vector<double> tokens(20 * 6);
    REQUIRE(moge_synthesize_tokens(20, 6, 5, tokens.data()) == MOGE_OK);
    const moge_dims dims{16, 4, 4};
    moge_trace* trace = nullptr;
    REQUIRE(moge_route_batch(router, dims, MOGE_MODE_MOGE, tokens.data(), 20, 6, &trace) == MOGE_OK);
    CHECK(moge_trace_size(trace) == 20);

    moge_string* text = nullptr;
    REQUIRE(moge_trace_to_jsonl(trace, &text) == MOGE_OK);
    const auto jsonl = take(text);
    moge_trace* back = nullptr;
    REQUIRE(moge_trace_from_jsonl(jsonl.data(), jsonl.size(), dims, &back) == MOGE_OK);
    REQUIRE(moge_trace_size(back) == 20);
    for (std::size_t t = 0; t < 20; ++t) {
        std::size_t n = 0;
        REQUIRE(moge_trace_token_size(back, t, &n) == MOGE_OK);
        REQUIRE(n == 4);
        std::int32_t a_sel[4], b_sel[4];
        double a_w[4], b_w[4];
        moge_trace_get(trace, t, a_sel, a_w);
        moge_trace_get(back, t, b_sel, b_w);
        for (int k = 0; k < 4; ++k) {
            CHECK(a_sel[k] == b_sel[k]);
            CHECK(a_w[k] == b_w[k]);
            CHECK(a_sel[k] / 4 == k);
        }
    }
    std::int64_t loads[4];
    REQUIRE(moge_device_loads(trace, dims, loads) == MOGE_OK);
    for (auto l : loads) CHECK(l == 20);
    double is = -1.0;
    REQUIRE(moge_imbalance_score(loads, 4, 20, &is) == MOGE_OK);
    CHECK(is == 0.0);

    std::size_t n = 0;
    CHECK(moge_trace_token_size(trace, 20, &n) == MOGE_E_RANGE);
    const char bad[] = "{\"token_index\":0,\"selected\":[99],\"weights\":[1.0]}\n";
    moge_trace* rejected = nullptr;
    CHECK(moge_trace_from_jsonl(bad, sizeof bad - 1, dims, &rejected) != MOGE_OK);
    CHECK(rejected == nullptr);

    moge_trace_destroy(back);
    moge_trace_destroy(trace);
    moge_router_destroy(router);
}

TEST_CASE("aux loss on uniform routing") {
    const char text[] =
        "{\"token_index\":0,\"selected\":[0,2],\"weights\":[0.5,0.5]}\n"
        "{\"token_index\":1,\"selected\":[1,3],\"weights\":[0.5,0.5]}\n";
    const moge_dims dims{4, 2, 2};
    moge_trace* trace = nullptr;
    REQUIRE(moge_trace_from_jsonl(text, sizeof text - 1, dims, &trace) == MOGE_OK);
    std::vector<double> scores(8, 0.25);
    double loss = 0.0;
    double f[4], p[4];
    REQUIRE(moge_aux_loss(trace, scores.data(), 2, dims, 0.01, f, p, &loss) == MOGE_OK);
    CHECK(std::fabs(loss - 0.01) < 1e-15);
    CHECK(f[0] == 1.0);
    CHECK(p[3] == 0.25);
    CHECK(moge_aux_loss(trace, scores.data(), 3, dims, 0.01, f, p, &loss) == MOGE_E_DIMENSION);
    moge_trace_destroy(trace);
}

TEST_CASE("imbalance simulation") {
    moge_histogram* h = nullptr;
    REQUIRE(moge_simulate_is({64, 8, 8}, MOGE_MODE_MOGE, 16, 1000, 3, 2, &h) == MOGE_OK);
    REQUIRE(moge_histogram_bins(h) == 1);
    double v = -1.0, p = -1.0;
    REQUIRE(moge_histogram_bin(h, 0, &v, &p) == MOGE_OK);
    CHECK(v == 0.0);
    CHECK(p == 1.0);
    CHECK(moge_histogram_bin(h, 1, &v, &p) == MOGE_E_RANGE);
    moge_string* csv = nullptr;
    REQUIRE(moge_histogram_to_csv(h, &csv) == MOGE_OK);
    CHECK(take(csv) == "is_value,probability\n0.0,1.0\n");
    moge_histogram_destroy(h);

    REQUIRE(moge_simulate_is({64, 8, 8}, MOGE_MODE_TOPK, 16, 2000, 3, 0, &h) == MOGE_OK);
    double imbalanced = 0.0;
    for (std::size_t i = 0; i < moge_histogram_bins(h); ++i) {
        moge_histogram_bin(h, i, &v, &p);
        if (v > 0.0) imbalanced += p;
    }
    CHECK(imbalanced >= 0.99);
    moge_histogram_destroy(h);

    CHECK(moge_simulate_is({64, 8, 8}, MOGE_MODE_TOPK, 16, 0, 3, 0, &h) ==
          MOGE_E_INVALID_ARGUMENT);
}

TEST_CASE("analytics") {
    const char text[] =
        "{\"token_index\":0,\"selected\":[0,2],\"weights\":[0.6,0.4]}\n"
        "{\"token_index\":1,\"selected\":[0,3],\"weights\":[0.5,0.5]}\n";
    const moge_dims dims{4, 2, 2};
    moge_trace* trace = nullptr;
    REQUIRE(moge_trace_from_jsonl(text, sizeof text - 1, dims, &trace) == MOGE_OK);
    double per_token[4], share[4];
    REQUIRE(moge_usage_histogram(trace, dims, per_token, share) == MOGE_OK);
    CHECK(per_token[0] == 1.0);
    CHECK(per_token[1] == 0.0);
    CHECK(per_token[2] == 0.5);
    CHECK(share[0] == 0.5);
    double coact[16];
    REQUIRE(moge_coactivation(trace, dims, coact) == MOGE_OK);
    CHECK(coact[0 * 4 + 2] == 0.5);
    CHECK(coact[2 * 4 + 0] == 0.5);
    CHECK(coact[0 * 4 + 1] == 0.0);
    double intra[2];
    REQUIRE(moge_intra_group(trace, dims, 1, intra) == MOGE_OK);
    CHECK(intra[0] == 0.5);
    CHECK(intra[1] == 0.5);
    CHECK(moge_intra_group(trace, dims, 2, intra) == MOGE_E_RANGE);
    moge_string* csv = nullptr;
    REQUIRE(moge_analysis_to_csv(trace, dims, MOGE_REPORT_USAGE, &csv) == MOGE_OK);
    CHECK(take(csv) == "expert,proportion\n0,1.0\n1,0.0\n2,0.5\n3,0.5\n");
    REQUIRE(moge_analysis_to_csv(trace, dims, MOGE_REPORT_COACTIVATION, &csv) == MOGE_OK);
    CHECK(take(csv).rfind("i,j,score\n0,1,0.0\n0,2,0.5\n", 0) == 0);
    moge_trace_destroy(trace);
}

TEST_CASE("device cost") {
    const std::int64_t loads[4] = {0, 4, 1, 3};
    double per_device[4];
    double makespan = 0.0;
    REQUIRE(moge_step_cost(loads, 4, 1, 2.0, per_device, &makespan) == MOGE_OK);
    CHECK(makespan == 8.0);
    CHECK(per_device[2] == 2.0);

    std::vector<double> topk(200), moge(200);
    REQUIRE(moge_compare_routing_cost(nullptr, {64, 8, 8}, 16, 1.0, 200, 4, topk.data(),
                                      moge.data()) == MOGE_OK);
    for (std::size_t t = 0; t < 200; ++t) {
        CHECK(moge[t] == 16.0);
        CHECK(moge[t] <= topk[t]);
    }
}

TEST_CASE("layer forward through the handle") {
    moge_layer* layer = nullptr;
    REQUIRE(moge_layer_create_random({8, 4, 2}, 5, 10, 1, MOGE_ACTIVATION_RELU, 7, &layer) ==
            MOGE_OK);
    std::vector<double> token(5, 0.5), out(5), gate(8);
    REQUIRE(moge_layer_forward(layer, MOGE_MODE_MOGE, token.data(), 5, out.data(), gate.data()) ==
            MOGE_OK);
    int active = 0;
    for (double g : gate) active += g > 0.0;
    CHECK(active == 4);
    CHECK(moge_layer_forward(layer, MOGE_MODE_MOGE, token.data(), 4, out.data(), nullptr) ==
          MOGE_E_DIMENSION);
    moge_layer_destroy(layer);
}

TEST_CASE("parameter sets, merging and smoothing") {
    const std::string base_json = R"({"w": [[1.0, 2.0], [3.0, 4.0]], "b": 0.5})";
    const std::string ckpt_json = R"({"w": [[2.0, 2.0], [3.0, 8.0]], "b": 1.5})";
    moge_params* base = nullptr;
    moge_params* ckpt = nullptr;
    REQUIRE(moge_params_from_json(base_json.data(), base_json.size(), &base) == MOGE_OK);
    REQUIRE(moge_params_from_json(ckpt_json.data(), ckpt_json.size(), &ckpt) == MOGE_OK);
    CHECK(moge_params_count(base) == 2);
    CHECK(std::string(moge_params_name(base, 0)) == "b");
    CHECK(moge_params_name(base, 2) == nullptr);

    const double* values = nullptr;
    const std::size_t* shape = nullptr;
    std::size_t size = 0, rank = 0;
    REQUIRE(moge_params_get(base, "w", &values, &size, &shape, &rank) == MOGE_OK);
    CHECK(size == 4);
    CHECK(rank == 2);
    CHECK(shape[1] == 2);
    CHECK(values[3] == 4.0);
    CHECK(moge_params_get(base, "missing", &values, &size, &shape, &rank) == MOGE_E_RANGE);

    const moge_params* ckpts[] = {ckpt};
    const double lambda = 0.25;
    const std::size_t sizes[] = {1};
    moge_params* merged = nullptr;
    REQUIRE(moge_merge_checkpoints(base, 1, &lambda, sizes, ckpts, &merged) == MOGE_OK);
    REQUIRE(moge_params_get(merged, "w", &values, &size, &shape, &rank) == MOGE_OK);
    CHECK(values[0] == 1.25);
    CHECK(values[3] == 5.0);
    moge_string* text = nullptr;
    REQUIRE(moge_params_to_json(merged, &text) == MOGE_OK);
    CHECK(take(text) == "{\"b\":0.75,\"w\":[[1.25,2.0],[3.0,5.0]]}\n");
    moge_params_destroy(merged);

    const std::string bad_json = R"({"w": [1.0, 2.0], "b": 0.5})";
    moge_params* bad = nullptr;
    REQUIRE(moge_params_from_json(bad_json.data(), bad_json.size(), &bad) == MOGE_OK);
    const moge_params* bad_ckpts[] = {bad};
    merged = nullptr;
    CHECK(moge_merge_checkpoints(base, 1, &lambda, sizes, bad_ckpts, &merged) == MOGE_E_DIMENSION);
    CHECK(merged == nullptr);
    CHECK(std::string(moge_last_error()).find("'w'") != std::string::npos);
    moge_params_destroy(bad);

    const std::string junk = "{\"w\": [1, \"x\"]}";
    moge_params* rejected = nullptr;
    CHECK(moge_params_from_json(junk.data(), junk.size(), &rejected) == MOGE_E_DATA);

    const double act[3] = {4.0, 4.0, 4.0};
    const double experts[6] = {4.0, 4.0, 4.0, 4.0, 4.0, 4.0};
    const double gate[3] = {4.0, 4.0, 4.0};
    double scale[3];
    REQUIRE(moge_smoothing_vector(act, 3, experts, 2, gate, 0.5, scale) == MOGE_OK);
    for (double s : scale) CHECK(s == 1.0);
    CHECK(moge_smoothing_vector(act, 3, experts, 2, gate, 1.5, scale) == MOGE_E_INVALID_ARGUMENT);

    moge_params_destroy(ckpt);
    moge_params_destroy(base);
}

TEST_CASE("last error describes the failure") {
    CHECK(moge_dims_validate({10, 8, 8}) == MOGE_E_CONFIG);
    const std::string message = moge_last_error();
    CHECK(message.find("divisible") != std::string::npos);
}
