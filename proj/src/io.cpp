#include "lrsbe/io.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace lrsbe {

namespace {

void require_keys(const json& doc, const std::set<std::string>& allowed, const std::set<std::string>& required,
                  const std::string& what) {
    if (!doc.is_object()) throw ParameterError(what + ": expected a JSON object");
    for (const auto& [key, _] : doc.items())
        if (!allowed.count(key)) throw ParameterError(what + ": unknown key '" + key + "'");
    for (const auto& key : required)
        if (!doc.contains(key)) throw ParameterError(what + ": missing key '" + key + "'");
}

ChannelDims dims_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ParameterError("dims must be [M_h, M_v, K]");
    ChannelDims d{j[0].get<Index>(), j[1].get<Index>(), j[2].get<Index>()};
    check_dims(d);
    return d;
}

json dims_to_json(const ChannelDims& d) { return json::array({d.m_h, d.m_v, d.k_users}); }

// Column-major vec of an M_h x M_v matrix <-> row-major arrays.
std::pair<std::vector<double>, std::vector<double>> to_row_major(const CVec& v, const ChannelDims& d) {
    std::vector<double> re, im;
    re.reserve(std::size_t(v.size()));
    im.reserve(std::size_t(v.size()));
    const auto mat = v.reshaped(d.m_h, d.m_v);
    for (Index p = 0; p < d.m_h; ++p)
        for (Index q = 0; q < d.m_v; ++q) {
            re.push_back(mat(p, q).real());
            im.push_back(mat(p, q).imag());
        }
    return {re, im};
}

CVec from_row_major(const json& re, const json& im, const ChannelDims& d, const std::string& what) {
    const auto r = re.get<std::vector<double>>();
    const auto i = im.get<std::vector<double>>();
    const auto m = std::size_t(d.antennas());
    if (r.size() != m || i.size() != m)
        throw DimensionError(what + ": expected " + std::to_string(m) + " entries");
    CVec out(d.antennas());
    auto mat = out.reshaped(d.m_h, d.m_v);
    std::size_t idx = 0;
    for (Index p = 0; p < d.m_h; ++p)
        for (Index q = 0; q < d.m_v; ++q, ++idx) mat(p, q) = cplx(r[idx], i[idx]);
    return out;
}

json snr_to_json(double snr) {
    if (std::isinf(snr)) return "inf";
    return snr;
}

double snr_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return kNoiseless;
        throw ParameterError("snr_db: only the string \"inf\" is accepted");
    }
    return j.get<double>();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

} // namespace

json channel_to_json(const ChannelRealization& ch) {
    json users = json::array();
    for (Index k = 0; k < ch.dims.k_users; ++k) {
        auto [lr, li] = to_row_major(ch.lowrank.col(k), ch.dims);
        auto [sr, si] = to_row_major(ch.sparse.col(k), ch.dims);
        users.push_back({{"lowrank_re", lr}, {"lowrank_im", li}, {"sparse_re", sr}, {"sparse_im", si}});
    }
    return {{"dims", dims_to_json(ch.dims)}, {"seed", ch.seed}, {"users", users}};
}

ChannelRealization channel_from_json(const json& doc) {
    require_keys(doc, {"dims", "seed", "users"}, {"dims", "users"}, "channel");
    ChannelRealization ch;
    ch.dims = dims_from_json(doc["dims"]);
    ch.seed = doc.value("seed", std::uint64_t{0});
    const auto& users = doc["users"];
    if (!users.is_array() || Index(users.size()) != ch.dims.k_users)
        throw DimensionError("channel: expected " + std::to_string(ch.dims.k_users) + " users");
    ch.lowrank.resize(ch.dims.antennas(), ch.dims.k_users);
    ch.sparse.resize(ch.dims.antennas(), ch.dims.k_users);
    for (Index k = 0; k < ch.dims.k_users; ++k) {
        const auto& u = users[std::size_t(k)];
        const std::set<std::string> keys{"lowrank_re", "lowrank_im", "sparse_re", "sparse_im"};
        require_keys(u, keys, keys, "channel user " + std::to_string(k));
        ch.lowrank.col(k) = from_row_major(u["lowrank_re"], u["lowrank_im"], ch.dims, "lowrank");
        ch.sparse.col(k) = from_row_major(u["sparse_re"], u["sparse_im"], ch.dims, "sparse");
    }
    return ch;
}

json measurement_to_json(const Measurement& m, const ChannelDims& dims, Index n_pilots) {
    std::vector<double> re(std::size_t(m.y.size())), im(std::size_t(m.y.size()));
    for (Index i = 0; i < m.y.size(); ++i) {
        re[std::size_t(i)] = m.y(i).real();
        im[std::size_t(i)] = m.y(i).imag();
    }
    return {{"dims", dims_to_json(dims)}, {"n_pilots", n_pilots}, {"seed", m.seed},
            {"snr_db", snr_to_json(m.snr_db)}, {"sigma2", m.sigma2}, {"y_re", re}, {"y_im", im}};
}

Measurement measurement_from_json(const json& doc, ChannelDims* dims_out, Index* n_out) {
    const std::set<std::string> keys{"dims", "n_pilots", "seed", "snr_db", "sigma2", "y_re", "y_im"};
    require_keys(doc, keys, {"dims", "n_pilots", "sigma2", "y_re", "y_im"}, "measurement");
    const ChannelDims dims = dims_from_json(doc["dims"]);
    const Index n = doc["n_pilots"].get<Index>();
    const auto re = doc["y_re"].get<std::vector<double>>();
    const auto im = doc["y_im"].get<std::vector<double>>();
    if (re.size() != im.size() || Index(re.size()) != dims.antennas() * n)
        throw DimensionError("measurement: y must have M N entries");
    Measurement m;
    m.y.resize(Index(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i) m.y(Index(i)) = cplx(re[i], im[i]);
    m.sigma2 = doc["sigma2"].get<double>();
    m.snr_db = doc.contains("snr_db") ? snr_from_json(doc["snr_db"]) : kNoiseless;
    m.seed = doc.value("seed", std::uint64_t{0});
    if (dims_out) *dims_out = dims;
    if (n_out) *n_out = n;
    return m;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_results_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
    os << kResultsHeader << "\r\n";
    for (const auto& r : records) {
        char rt[32];
        std::snprintf(rt, sizeof rt, "%.3f", r.runtime_ms);
        os << csv_field(r.solver) << ',' << format_double(r.snr_db) << ',' << r.trial << ',' << r.seed << ','
           << format_double(r.nmse_db) << ',' << r.iterations << ',' << rt << ','
           << (r.converged ? "true" : "false") << "\r\n";
    }
}

std::vector<ResultRecord> read_results_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParameterError("results CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsHeader) throw ParameterError("results CSV: unexpected header '" + line + "'");
    std::vector<ResultRecord> out;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8) throw ParameterError("results CSV: expected 8 fields in '" + line + "'");
        ResultRecord r;
        r.solver = f[0];
        r.snr_db = parse_double(f[1]);
        r.trial = std::stoi(f[2]);
        r.seed = std::stoull(f[3]);
        r.nmse_db = parse_double(f[4]);
        r.nmse_linear = std::pow(10.0, r.nmse_db / 10.0);
        r.iterations = std::stoi(f[5]);
        r.runtime_ms = parse_double(f[6]);
        r.converged = f[7] == "true";
        r.failed = std::isnan(r.nmse_db);
        out.push_back(r);
    }
    return out;
}

json summary_to_json(const std::vector<SummaryRow>& rows, const std::vector<TargetSummary>& targets) {
    json groups = json::array();
    for (const auto& r : rows)
        groups.push_back({{"solver", r.solver},
                          {"snr_db", finite_or_null(r.snr_db)},
                          {"trials", r.trials},
                          {"failed", r.failed},
                          {"mean_nmse_db", finite_or_null(r.mean_nmse_db)},
                          {"median_nmse_db", finite_or_null(r.median_nmse_db)},
                          {"nmse_db_of_mean", finite_or_null(r.nmse_db_of_mean)},
                          {"mean_iterations", finite_or_null(r.mean_iterations)},
                          {"mean_runtime_ms", finite_or_null(r.mean_runtime_ms)}});
    json doc = {{"groups", groups}};
    if (!targets.empty()) {
        json t = json::array();
        for (const auto& s : targets)
            t.push_back({{"solver", s.solver},
                         {"mean_iterations", s.mean_iterations},
                         {"mean_runtime_ms", s.mean_runtime_ms},
                         {"trials", s.trials}});
        doc["iterations_to_target"] = t;
    }
    return doc;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceEntry>& trace) {
    os << kTraceHeader << "\r\n";
    for (const auto& t : trace)
        os << t.iter << ',' << format_double(t.rel_change) << ',' << format_double(t.residual_norm) << ','
           << format_double(t.alpha) << ',' << format_double(t.beta) << ',' << t.nnz_blocks << ',' << t.rank_hl
           << "\r\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParameterError("'" + path + "': " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

} // namespace lrsbe
