#pragma once

#include <string>
#include <string_view>

#include "moge/analytics.hpp"
#include "moge/balance.hpp"
#include "moge/model_ops.hpp"
#include "moge/routing.hpp"

namespace moge {

/// Shortest round-trip decimal, always with a '.' or exponent ("1.0", "0.0625").
std::string format_real(double value);

/// printf("%.17g")-style formatting without locale dependence.
std::string format_real17(double value);

/// One JSON object per token:
/// {"token_index":0,"selected":[0,3],"weights":[0.4,0.3]}
std::string trace_to_jsonl(const RoutingTrace& trace);

/// Inverse of trace_to_jsonl. Blank lines are ignored. Throws DataError on a
/// malformed line, an out-of-order token index or a selection inconsistent
/// with `cfg`.
RoutingTrace trace_from_jsonl(std::string_view text, const RoutingConfig& cfg);

/// "is_value,probability" rows in ascending IS order.
std::string histogram_to_csv(const IsHistogram& histogram);

std::string usage_to_csv(const ExpertUsageHistogram& usage);        // expert,proportion
std::string usage_share_to_csv(const ExpertUsageHistogram& usage);  // expert,share
std::string coactivation_to_csv(const CoactivationMatrix& coact);   // i,j,score (i < j)
/// group,expert,share for every group; expert is the global index.
std::string intra_group_to_csv(const RoutingTrace& trace, const RoutingConfig& cfg);

/// Top-level JSON object mapping names to numbers or rectangular nested
/// arrays. Throws DataError on anything else.
ParameterSet params_from_json(std::string_view text);
std::string params_to_json(const ParameterSet& params);

}  // namespace moge
