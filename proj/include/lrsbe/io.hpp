#pragma once

#include "lrsbe/beamspace.hpp"
#include "lrsbe/eval.hpp"
#include "lrsbe/measurement.hpp"
#include "lrsbe/solvers.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace lrsbe {

using json = nlohmann::json;

// Channel document:
//   {"dims":[M_h,M_v,K], "seed":s,
//    "users":[{"lowrank_re":[...], "lowrank_im":[...], "sparse_re":[...], "sparse_im":[...]}, ...]}
// Each array holds the M_h x M_v beam matrix in row-major order.
json channel_to_json(const ChannelRealization& ch);
ChannelRealization channel_from_json(const json& doc);

// Measurement document:
//   {"dims":[M_h,M_v,K], "n_pilots":N, "seed":s, "snr_db":x|"inf", "sigma2":v,
//    "y_re":[...], "y_im":[...]}
// y is stored in its natural (pilot-major) order.
json measurement_to_json(const Measurement& m, const ChannelDims& dims, Index n_pilots);
Measurement measurement_from_json(const json& doc, ChannelDims* dims = nullptr, Index* n_pilots = nullptr);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
/// Shortest text that parses back to the same double; inf / -inf / nan spelled out.
std::string format_double(double v);

inline constexpr const char* kResultsHeader =
    "solver,snr_db,trial,seed,nmse_db,iterations,runtime_ms,converged";

void write_results_csv(std::ostream& os, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_results_csv(std::istream& is);

json summary_to_json(const std::vector<SummaryRow>& rows, const std::vector<TargetSummary>& targets = {});

inline constexpr const char* kTraceHeader = "iter,rel_change,residual_norm,alpha,beta,nnz_blocks,rank_hl";
void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace lrsbe
