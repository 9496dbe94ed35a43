#include "moge/serialization.hpp"

#include <charconv>
#include <set>
#include <string>

#include <json.hpp>

#include "moge/error.hpp"

namespace moge {

using nlohmann::json;

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eni") == std::string::npos) s += ".0";
    return s;
}

std::string format_real17(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string trace_to_jsonl(const RoutingTrace& trace) {
    std::string out;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        const auto& r = trace.routes[t];
        out += "{\"token_index\":" + std::to_string(t) + ",\"selected\":[";
        for (std::size_t j = 0; j < r.selected.size(); ++j) {
            if (j) out += ',';
            out += std::to_string(r.selected[j]);
        }
        out += "],\"weights\":[";
        for (std::size_t j = 0; j < r.weights.size(); ++j) {
            if (j) out += ',';
            out += format_real17(r.weights[j]);
        }
        out += "]}\n";
    }
    return out;
}

namespace {

TokenRoute parse_route(const json& obj, std::size_t expected_index, const RoutingConfig& cfg) {
    if (!obj.is_object()) throw DataError("expected a JSON object");
    for (const char* key : {"token_index", "selected", "weights"})
        if (!obj.contains(key)) throw DataError(std::string("missing field '") + key + "'");
    const auto& index = obj.at("token_index");
    if (!index.is_number_unsigned() || index.get<std::size_t>() != expected_index)
        throw DataError("token_index must be " + std::to_string(expected_index));

    const auto& sel = obj.at("selected");
    const auto& wts = obj.at("weights");
    if (!sel.is_array() || !wts.is_array()) throw DataError("selected and weights must be arrays");
    if (sel.size() != cfg.n_active() || wts.size() != cfg.n_active()) {
        throw DataError("expected " + std::to_string(cfg.n_active()) +
                        " selections and weights, got " + std::to_string(sel.size()) + " and " +
                        std::to_string(wts.size()));
    }
    TokenRoute r;
    std::set<std::size_t> seen;
    for (const auto& v : sel) {
        if (!v.is_number_unsigned() || v.get<std::size_t>() >= cfg.n_experts())
            throw DataError("selected index out of range [0, " + std::to_string(cfg.n_experts()) + ")");
        const auto e = v.get<std::size_t>();
        if (!seen.insert(e).second) throw DataError("duplicate selected index " + std::to_string(e));
        r.selected.push_back(e);
    }
    for (const auto& v : wts) {
        if (!v.is_number()) throw DataError("weights must be numbers");
        r.weights.push_back(v.get<double>());
    }
    return r;
}

}  // namespace

RoutingTrace trace_from_jsonl(std::string_view text, const RoutingConfig& cfg) {
    RoutingTrace trace;
    trace.n_experts = cfg.n_experts();
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            trace.routes.push_back(parse_route(json::parse(line), trace.size(), cfg));
        } catch (const json::exception& e) {
            throw DataError("trace line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trace;
}

std::string histogram_to_csv(const IsHistogram& histogram) {
    std::string out = "is_value,probability\n";
    for (const auto& bin : histogram.bins())
        out += format_real(bin.is_value) + "," + format_real(bin.probability) + "\n";
    return out;
}

std::string usage_to_csv(const ExpertUsageHistogram& usage) {
    std::string out = "expert,proportion\n";
    for (std::size_t i = 0; i < usage.per_token.size(); ++i)
        out += std::to_string(i) + "," + format_real(usage.per_token[i]) + "\n";
    return out;
}

std::string usage_share_to_csv(const ExpertUsageHistogram& usage) {
    std::string out = "expert,share\n";
    for (std::size_t i = 0; i < usage.share.size(); ++i)
        out += std::to_string(i) + "," + format_real(usage.share[i]) + "\n";
    return out;
}

std::string coactivation_to_csv(const CoactivationMatrix& coact) {
    std::string out = "i,j,score\n";
    const Matrix& m = coact.scores;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            out += std::to_string(i) + "," + std::to_string(j) + "," + format_real(m(i, j)) + "\n";
    return out;
}

std::string intra_group_to_csv(const RoutingTrace& trace, const RoutingConfig& cfg) {
    std::string out = "group,expert,share\n";
    for (std::size_t g = 0; g < cfg.n_groups(); ++g) {
        const auto share = intra_group_distribution(trace, cfg, g);
        const auto begin = cfg.group_range(g).first;
        for (std::size_t j = 0; j < share.size(); ++j)
            out += std::to_string(g) + "," + std::to_string(begin + j) + "," +
                   format_real(share[j]) + "\n";
    }
    return out;
}

namespace {

// Appends the numbers of a rectangular nested array and records its shape.
void flatten(const json& node, std::size_t depth, std::vector<std::size_t>& shape,
             std::vector<double>& values, const std::string& name) {
    if (node.is_number()) {
        if (depth != shape.size())
            throw DataError("parameter '" + name + "' is not a rectangular array");
        values.push_back(node.get<double>());
        return;
    }
    if (!node.is_array())
        throw DataError("parameter '" + name + "' contains a non-numeric value");
    if (depth == shape.size()) {
        if (!values.empty()) throw DataError("parameter '" + name + "' is not a rectangular array");
        shape.push_back(node.size());
    } else if (depth > shape.size() || shape[depth] != node.size()) {
        throw DataError("parameter '" + name + "' is not a rectangular array");
    }
    for (const auto& child : node) flatten(child, depth + 1, shape, values, name);
}

json unflatten(const Tensor& t, std::size_t depth, std::size_t& offset) {
    if (depth == t.shape.size()) return t.values[offset++];
    json arr = json::array();
    for (std::size_t i = 0; i < t.shape[depth]; ++i) arr.push_back(unflatten(t, depth + 1, offset));
    return arr;
}

std::size_t volume(const std::vector<std::size_t>& shape) {
    std::size_t v = 1;
    for (std::size_t s : shape) v *= s;
    return v;
}

}  // namespace

ParameterSet params_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid parameter file: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("parameter file must be a JSON object");
    ParameterSet params;
    for (const auto& [name, node] : doc.items()) {
        Tensor t;
        flatten(node, 0, t.shape, t.values, name);
        if (t.values.size() != volume(t.shape))
            throw DataError("parameter '" + name + "' is not a rectangular array");
        params.emplace(name, std::move(t));
    }
    return params;
}

std::string params_to_json(const ParameterSet& params) {
    json doc = json::object();
    for (const auto& [name, tensor] : params) {
        std::size_t offset = 0;
        doc[name] = unflatten(tensor, 0, offset);
    }
    return doc.dump() + "\n";
}

}  // namespace moge
