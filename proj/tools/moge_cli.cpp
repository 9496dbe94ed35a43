// Command-line front end over the moge C API.
//
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moge/moge.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDataError = 1;
constexpr int kUsageError = 2;

struct CommandError {
    int code;
    std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CommandError{kUsageError, message}; }
[[noreturn]] void data_error(const std::string& message) { throw CommandError{kDataError, message}; }

void check(moge_status status) {
    if (status == MOGE_OK) return;
    const bool usage = status == MOGE_E_CONFIG || status == MOGE_E_INVALID_ARGUMENT;
    throw CommandError{usage ? kUsageError : kDataError, moge_last_error()};
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
    void operator()(T* p) const { Destroy(p); }
};
template <typename T, void (*Destroy)(T*)>
using Handle = std::unique_ptr<T, Deleter<T, Destroy>>;

using String = Handle<moge_string, moge_string_destroy>;
using Router = Handle<moge_router, moge_router_destroy>;
using Trace = Handle<moge_trace, moge_trace_destroy>;
using Histogram = Handle<moge_histogram, moge_histogram_destroy>;
using Params = Handle<moge_params, moge_params_destroy>;

std::string take(moge_string* raw) {
    String s(raw);
    return std::string(moge_string_data(s.get()), moge_string_size(s.get()));
}

std::string real(double v) {
    char buf[64];
    check(moge_format_real(v, buf, sizeof buf));
    return buf;
}

std::string read_input(const std::string& path) {
    if (path == "-") {
        return std::string(std::istreambuf_iterator<char>(std::cin), {});
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) data_error("cannot write '" + path + "'");
    out << content;
    if (!out) data_error("failed writing '" + path + "'");
}

struct Dims {
    int n_experts = 64;
    int n_active = 8;
    int n_groups = 8;

    moge_dims c() const { return {n_experts, n_active, n_groups}; }
};

void add_dims(CLI::App* cmd, Dims& d, bool required) {
    auto* e = cmd->add_option("--experts", d.n_experts, "Total experts N");
    auto* k = cmd->add_option("--active", d.n_active, "Experts activated per token K");
    auto* m = cmd->add_option("--groups", d.n_groups, "Expert groups / devices M");
    if (required) {
        e->required();
        k->required();
        m->required();
    } else {
        e->capture_default_str();
        k->capture_default_str();
        m->capture_default_str();
    }
}

moge_mode parse_mode(const std::string& text) {
    return text == "moge" ? MOGE_MODE_MOGE : MOGE_MODE_TOPK;
}

// Records everything needed to reproduce a run.
struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> outputs;
    json parameters = json::object();

    void collect(const CLI::App* cmd) {
        for (const CLI::Option* opt : cmd->get_options()) {
            if (opt->get_single_name() == "help") continue;
            const auto name = opt->get_single_name();
            if (opt->count() > 0) {
                const auto& res = opt->results();
                parameters[name] = res.size() == 1 ? json(res.front()) : json(res);
            } else if (!opt->get_default_str().empty()) {
                parameters[name] = opt->get_default_str();
            }
        }
    }

    void write(const std::string& path) const {
        json doc;
        doc["command"] = command;
        doc["argv"] = argv;
        doc["parameters"] = parameters;
        doc["seed"] = seed ? json(*seed) : json(nullptr);
        doc["version"] = moge_version();
        doc["outputs"] = outputs;
        write_output(path, doc.dump(2) + "\n");
    }
};

// Manifest path: explicit flag, else next to the primary output.
std::optional<std::string> manifest_path(const std::string& flag, const std::string& output) {
    if (!flag.empty()) return flag;
    if (output == "-") return std::nullopt;
    return output + ".manifest.json";
}

struct SimulateArgs {
    Dims dims;
    std::size_t batch = 16;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
    std::string mode = "topk";
    unsigned threads = 0;
    std::string out;
    std::string manifest;
};

void run_simulate(const SimulateArgs& a, Manifest& m) {
    moge_histogram* raw = nullptr;
    check(moge_simulate_is(a.dims.c(), parse_mode(a.mode), a.batch, a.trials, a.seed, a.threads, &raw));
    Histogram h(raw);
    moge_string* csv = nullptr;
    check(moge_histogram_to_csv(h.get(), &csv));
    write_output(a.out, take(csv));
    m.seed = a.seed;
    m.outputs = {a.out};
}

struct RouteArgs {
    Dims dims;
    std::string mode = "topk";
    std::optional<std::uint64_t> seed;
    std::size_t tokens = 16;
    std::size_t dim = 16;
    std::string input;
    std::string out;
    std::string manifest;
};

// Reads {"router": d x N, "tokens": T x d} nested arrays.
std::vector<double> rows_of(const json& node, const char* field, std::size_t& rows,
                            std::size_t& cols) {
    if (!node.contains(field) || !node.at(field).is_array() || node.at(field).empty())
        data_error(std::string("input needs a non-empty '") + field + "' array");
    const auto& arr = node.at(field);
    rows = arr.size();
    cols = 0;
    std::vector<double> flat;
    for (const auto& row : arr) {
        if (!row.is_array()) data_error(std::string("'") + field + "' must be a nested array");
        if (cols == 0) cols = row.size();
        if (row.size() != cols || cols == 0)
            data_error(std::string("'") + field + "' rows must have equal, non-zero length");
        for (const auto& v : row) {
            if (!v.is_number()) data_error(std::string("'") + field + "' has a non-numeric entry");
            flat.push_back(v.get<double>());
        }
    }
    return flat;
}

void run_route(const RouteArgs& a, Manifest& m) {
    Router router;
    std::vector<double> tokens;
    std::size_t n_tokens = 0;
    std::size_t dim = 0;
    if (!a.input.empty()) {
        json doc;
        try {
            doc = json::parse(read_input(a.input));
        } catch (const json::exception& e) {
            data_error("malformed input file: " + std::string(e.what()));
        }
        if (!doc.is_object()) data_error("input file must be a JSON object");
        std::size_t router_rows = 0;
        std::size_t router_cols = 0;
        const auto weights = rows_of(doc, "router", router_rows, router_cols);
        tokens = rows_of(doc, "tokens", n_tokens, dim);
        if (router_cols != static_cast<std::size_t>(a.dims.n_experts))
            data_error("router has " + std::to_string(router_cols) + " columns, expected " +
                       std::to_string(a.dims.n_experts));
        moge_router* raw = nullptr;
        check(moge_router_create(weights.data(), router_rows, router_cols, &raw));
        router.reset(raw);
    } else {
        if (!a.seed) usage_error("--seed is required when tokens are synthesized");
        n_tokens = a.tokens;
        dim = a.dim;
        if (n_tokens == 0 || dim == 0) usage_error("--tokens and --dim must be positive");
        check(moge_dims_validate(a.dims.c()));
        moge_router* raw = nullptr;
        check(moge_router_create_random(dim, static_cast<std::size_t>(a.dims.n_experts), *a.seed, &raw));
        router.reset(raw);
        tokens.resize(n_tokens * dim);
        check(moge_synthesize_tokens(n_tokens, dim, *a.seed, tokens.data()));
    }
    moge_trace* raw = nullptr;
    check(moge_route_batch(router.get(), a.dims.c(), parse_mode(a.mode), tokens.data(), n_tokens,
                           dim, &raw));
    Trace trace(raw);
    moge_string* text = nullptr;
    check(moge_trace_to_jsonl(trace.get(), &text));
    write_output(a.out, take(text));
    m.seed = a.seed;
    m.outputs = {a.out};
}

struct AnalyzeArgs {
    Dims dims;
    std::string trace;
    std::string out_dir;
    std::string manifest;
};

void run_analyze(const AnalyzeArgs& a, Manifest& m) {
    const auto text = read_input(a.trace);
    moge_trace* raw = nullptr;
    check(moge_trace_from_jsonl(text.data(), text.size(), a.dims.c(), &raw));
    Trace trace(raw);
    if (moge_trace_size(trace.get()) == 0) data_error("trace '" + a.trace + "' is empty");

    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (ec) data_error("cannot create '" + a.out_dir + "': " + ec.message());
    const std::pair<moge_report, const char*> reports[] = {
        {MOGE_REPORT_USAGE, "usage.csv"},
        {MOGE_REPORT_USAGE_SHARE, "usage_share.csv"},
        {MOGE_REPORT_COACTIVATION, "coact.csv"},
        {MOGE_REPORT_INTRA_GROUP, "intragroup.csv"},
    };
    for (const auto& [kind, name] : reports) {
        moge_string* csv = nullptr;
        check(moge_analysis_to_csv(trace.get(), a.dims.c(), kind, &csv));
        const auto path = (fs::path(a.out_dir) / name).string();
        write_output(path, take(csv));
        m.outputs.push_back(path);
    }
}

Params load_params(const std::string& path) {
    const auto text = read_input(path);
    moge_params* raw = nullptr;
    const auto status = moge_params_from_json(text.data(), text.size(), &raw);
    if (status != MOGE_OK) data_error(path + ": " + moge_last_error());
    return Params(raw);
}

struct MergeArgs {
    std::string base;
    std::vector<std::string> groups;
    std::string out;
    std::string manifest;
};

void run_merge(const MergeArgs& a, Manifest& m) {
    const auto base = load_params(a.base);
    std::vector<double> lambdas;
    std::vector<std::size_t> sizes;
    std::vector<Params> owned;
    for (const auto& spec : a.groups) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size())
            usage_error("--group expects LAMBDA:CKPT[,CKPT...], got '" + spec + "'");
        double lambda = 0.0;
        const auto res = std::from_chars(spec.data(), spec.data() + colon, lambda);
        if (res.ec != std::errc{} || res.ptr != spec.data() + colon)
            usage_error("invalid group weight in '" + spec + "'");
        std::size_t count = 0;
        std::stringstream paths(spec.substr(colon + 1));
        for (std::string path; std::getline(paths, path, ',');) {
            if (path.empty()) usage_error("empty checkpoint path in '" + spec + "'");
            owned.push_back(load_params(path));
            ++count;
        }
        lambdas.push_back(lambda);
        sizes.push_back(count);
    }
    std::vector<const moge_params*> ckpts;
    for (const auto& p : owned) ckpts.push_back(p.get());

    moge_params* raw = nullptr;
    check(moge_merge_checkpoints(base.get(), lambdas.size(), lambdas.data(), sizes.data(),
                                 ckpts.data(), &raw));
    Params merged(raw);
    moge_string* text = nullptr;
    check(moge_params_to_json(merged.get(), &text));
    write_output(a.out, take(text));
    m.outputs = {a.out};
}

struct SmoothArgs {
    std::string input;
    double alpha = 0.5;
    std::string out;
    std::string manifest;
};

struct ArrayView {
    const double* values = nullptr;
    std::size_t size = 0;
    const std::size_t* shape = nullptr;
    std::size_t rank = 0;
};

ArrayView get_array(const moge_params* p, const char* name, std::size_t rank) {
    ArrayView v;
    if (moge_params_get(p, name, &v.values, &v.size, &v.shape, &v.rank) != MOGE_OK)
        data_error(std::string("smoothing input lacks '") + name + "'");
    if (v.rank != rank)
        data_error(std::string("'") + name + "' must have rank " + std::to_string(rank));
    return v;
}

void run_smooth(const SmoothArgs& a, Manifest& m) {
    const auto params = load_params(a.input);
    const auto act = get_array(params.get(), "act_absmax", 1);
    const auto experts = get_array(params.get(), "expert_w_absmax", 2);
    const auto gate = get_array(params.get(), "router_w_absmax", 1);
    const std::size_t d = act.size;
    if (gate.size != d || experts.shape[1] != d)
        data_error("channel counts differ between act_absmax, expert_w_absmax and router_w_absmax");

    std::vector<double> scale(d);
    check(moge_smoothing_vector(act.values, d, experts.values, experts.shape[0], gate.values,
                                a.alpha, scale.data()));
    std::string csv = "channel,scale\n";
    for (std::size_t j = 0; j < d; ++j) csv += std::to_string(j) + "," + real(scale[j]) + "\n";
    write_output(a.out, csv);
    m.outputs = {a.out};
}

struct CompareArgs {
    Dims dims;
    std::size_t batch = 16;
    std::uint64_t trials = 10000;
    std::uint64_t seed = 0;
    double cost = 1.0;
    std::size_t dim = 0;
    std::string out;
    std::string manifest;
};

void run_compare(const CompareArgs& a, Manifest& m) {
    Router router;
    if (a.dim > 0) {
        moge_router* raw = nullptr;
        check(moge_dims_validate(a.dims.c()));
        check(moge_router_create_random(a.dim, static_cast<std::size_t>(a.dims.n_experts), a.seed, &raw));
        router.reset(raw);
    }
    std::vector<double> topk(a.trials);
    std::vector<double> moge(a.trials);
    check(moge_compare_routing_cost(router.get(), a.dims.c(), a.batch, a.cost, a.trials, a.seed,
                                    topk.data(), moge.data()));
    std::string csv = "trial,topk_makespan,moge_makespan\n";
    for (std::size_t t = 0; t < a.trials; ++t)
        csv += std::to_string(t) + "," + real(topk[t]) + "," + real(moge[t]) + "\n";
    write_output(a.out, csv);
    m.seed = a.seed;
    m.outputs = {a.out};
}

int run(const std::vector<std::string>& args, int depth = 0);

int run_rerun(const std::string& manifest_file, int depth) {
    if (depth > 0) usage_error("a manifest cannot invoke rerun");
    json doc;
    try {
        doc = json::parse(read_input(manifest_file));
    } catch (const json::exception& e) {
        data_error("malformed manifest: " + std::string(e.what()));
    }
    if (!doc.is_object() || !doc.contains("argv") || !doc.at("argv").is_array())
        data_error("manifest has no argv array");
    std::vector<std::string> argv;
    for (const auto& v : doc.at("argv")) {
        if (!v.is_string()) data_error("manifest argv entries must be strings");
        argv.push_back(v.get<std::string>());
    }
    return run(argv, depth + 1);
}

int run(const std::vector<std::string>& args, int depth) {
    CLI::App app{"Top-K and group-balanced (MoGE) expert routing toolkit", "moge"};
    app.set_version_flag("--version", std::string(moge_version()));
    app.require_subcommand(1);

    const std::vector<std::string> modes{"topk", "moge"};

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate-is", "Monte Carlo imbalance score distribution");
    add_dims(sim_cmd, sim.dims, true);
    sim_cmd->add_option("--batch", sim.batch, "Tokens per simulated batch")->required();
    sim_cmd->add_option("--trials", sim.trials, "Number of simulated batches")->required();
    sim_cmd->add_option("--seed", sim.seed, "Random seed")->required();
    sim_cmd->add_option("--mode", sim.mode, "Routing mode")->check(CLI::IsMember(modes))->capture_default_str();
    sim_cmd->add_option("--threads", sim.threads, "Worker threads (0 = all cores)")->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "Output CSV ('-' for stdout)")->required();
    sim_cmd->add_option("--manifest", sim.manifest, "Manifest path");

    RouteArgs route;
    std::uint64_t route_seed = 0;
    auto* route_cmd = app.add_subcommand("route", "Route tokens and emit a JSON-lines trace");
    add_dims(route_cmd, route.dims, true);
    route_cmd->add_option("--mode", route.mode, "Routing mode")->check(CLI::IsMember(modes))->capture_default_str();
    auto* route_seed_opt = route_cmd->add_option("--seed", route_seed, "Seed for synthesized router and tokens");
    auto* tokens_opt = route_cmd->add_option("--tokens", route.tokens, "Synthesized token count")->capture_default_str();
    auto* dim_opt = route_cmd->add_option("--dim", route.dim, "Synthesized hidden dimension")->capture_default_str();
    auto* input_opt = route_cmd->add_option("--input", route.input, "JSON file with 'router' and 'tokens'");
    input_opt->excludes(tokens_opt)->excludes(dim_opt);
    route_cmd->add_option("--out", route.out, "Output JSONL ('-' for stdout)")->required();
    route_cmd->add_option("--manifest", route.manifest, "Manifest path");

    AnalyzeArgs analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "Expert usage, co-activation and intra-group CSVs");
    add_dims(analyze_cmd, analyze.dims, true);
    analyze_cmd->add_option("--trace", analyze.trace, "Trace JSONL ('-' for stdin)")->required();
    analyze_cmd->add_option("--out-dir", analyze.out_dir, "Directory for the CSV reports")->required();
    analyze_cmd->add_option("--manifest", analyze.manifest, "Manifest path");

    MergeArgs merge;
    auto* merge_cmd = app.add_subcommand("merge", "Merge checkpoints by grouped delta averaging");
    merge_cmd->add_option("--base", merge.base, "Base parameter JSON")->required();
    merge_cmd->add_option("--group", merge.groups, "LAMBDA:CKPT[,CKPT...]; repeat per group")->required();
    merge_cmd->add_option("--out", merge.out, "Merged parameter JSON ('-' for stdout)")->required();
    merge_cmd->add_option("--manifest", merge.manifest, "Manifest path");

    SmoothArgs smooth;
    auto* smooth_cmd = app.add_subcommand("smooth", "Expert-aware channel smoothing vector");
    smooth_cmd->add_option("--input", smooth.input,
                           "JSON with act_absmax, expert_w_absmax and router_w_absmax")->required();
    smooth_cmd->add_option("--alpha", smooth.alpha, "Migration strength in [0, 1]")->required();
    smooth_cmd->add_option("--out", smooth.out, "Output CSV ('-' for stdout)")->required();
    smooth_cmd->add_option("--manifest", smooth.manifest, "Manifest path");

    CompareArgs compare;
    auto* compare_cmd = app.add_subcommand("compare", "Per-trial Top-K vs MoGE makespans");
    add_dims(compare_cmd, compare.dims, true);
    compare_cmd->add_option("--batch", compare.batch, "Tokens per batch")->required();
    compare_cmd->add_option("--trials", compare.trials, "Number of batches")->required();
    compare_cmd->add_option("--seed", compare.seed, "Random seed")->required();
    compare_cmd->add_option("--cost", compare.cost, "Cost per expert call")->capture_default_str();
    compare_cmd->add_option("--dim", compare.dim,
                            "Hidden dimension of a random router (0 = i.i.d. logits)")->capture_default_str();
    compare_cmd->add_option("--out", compare.out, "Output CSV ('-' for stdout)")->required();
    compare_cmd->add_option("--manifest", compare.manifest, "Manifest path");

    std::string rerun_manifest;
    auto* rerun_cmd = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
    rerun_cmd->add_option("--manifest", rerun_manifest, "Manifest written by an earlier run")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        Manifest manifest;
        manifest.argv = args;
        std::optional<std::string> manifest_file;
        if (*sim_cmd) {
            manifest.command = "simulate-is";
            run_simulate(sim, manifest);
            manifest.collect(sim_cmd);
            manifest_file = manifest_path(sim.manifest, sim.out);
        } else if (*route_cmd) {
            if (route_seed_opt->count() > 0) route.seed = route_seed;
            manifest.command = "route";
            run_route(route, manifest);
            manifest.collect(route_cmd);
            manifest_file = manifest_path(route.manifest, route.out);
        } else if (*analyze_cmd) {
            manifest.command = "analyze";
            run_analyze(analyze, manifest);
            manifest.collect(analyze_cmd);
            manifest_file = analyze.manifest.empty()
                                ? (fs::path(analyze.out_dir) / "manifest.json").string()
                                : analyze.manifest;
        } else if (*merge_cmd) {
            manifest.command = "merge";
            run_merge(merge, manifest);
            manifest.collect(merge_cmd);
            manifest_file = manifest_path(merge.manifest, merge.out);
        } else if (*smooth_cmd) {
            manifest.command = "smooth";
            run_smooth(smooth, manifest);
            manifest.collect(smooth_cmd);
            manifest_file = manifest_path(smooth.manifest, smooth.out);
        } else if (*compare_cmd) {
            manifest.command = "compare";
            run_compare(compare, manifest);
            manifest.collect(compare_cmd);
            manifest_file = manifest_path(compare.manifest, compare.out);
        } else if (*rerun_cmd) {
            return run_rerun(rerun_manifest, depth);
        }
        if (manifest_file) manifest.write(*manifest_file);
    } catch (const CommandError& e) {
        std::cerr << "moge: " << e.message << "\n";
        return e.code;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(std::vector<std::string>(argv + 1, argv + argc));
    } catch (const CommandError& e) {
        std::cerr << "moge: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "moge: " << e.what() << "\n";
        return kDataError;
    }
}
