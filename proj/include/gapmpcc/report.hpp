#pragma once

// JSON and text renderings of solve runs and certificates. Doubles go through
// nlohmann's shortest round-trip formatting in JSON and %.17g in text, so a
// value read back from either is the same double.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapmpcc/outer.hpp"
#include "gapmpcc/stationarity.hpp"

namespace gapmpcc {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Six significant digits, for human-facing summaries.
inline std::string format_short(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline std::string format_vector(const Vec &v) {
    std::string s = "[";
    for (Index i = 0; i < v.size(); ++i) {
        if (i > 0)
            s += ", ";
        s += format_double(v[i]);
    }
    return s + "]";
}

inline nlohmann::json vector_json(const Vec &v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline nlohmann::json index_sets_json(const IndexSets &idx) {
    return {{"lambda_active", idx.lambda_active}, {"eta_active", idx.eta_active}, {"biactive", idx.biactive}};
}

/// z, u, v, w plus the certificate fields.
inline nlohmann::json certificate_json(const StationarityCertificate &cert, const Vec &z, const Vec &u,
                                       const Vec &v, const Vec &w) {
    nlohmann::json j;
    j["z"] = vector_json(z);
    j["u"] = vector_json(u);
    j["v"] = vector_json(v);
    j["w"] = vector_json(w);
    j["class"] = to_string(cert.klass);
    j["licq"] = cert.licq;
    j["ulsc"] = cert.ulsc;
    j["second_order_min"] = cert.second_order_min ? nlohmann::json(*cert.second_order_min) : nlohmann::json();
    j["feasible"] = cert.feasible;
    j["stat_residual"] = cert.stat_residual;
    j["index_sets"] = index_sets_json(cert.index_sets);
    return j;
}

inline nlohmann::json report_json(const SolveReport &r) {
    nlohmann::json j;
    j["problem"] = r.problem;
    j["gap"] = {{"a", r.gap.a()}, {"b", r.gap.b()}};
    nlohmann::json iters = nlohmann::json::array();
    for (const auto &rec : r.records)
        iters.push_back({{"k", rec.k},
                         {"mu", rec.mu},
                         {"phi", rec.phi},
                         {"h_norm", rec.h_norm},
                         {"kkt_res", rec.kkt_res},
                         {"inner_iters", rec.inner_iters}});
    j["iterations"] = iters;
    j["final"] = certificate_json(r.final_certificate, r.limit.z, r.limit.u, r.limit.v, r.limit.w);
    j["final"]["J"] = r.final_cost;
    j["status"] = to_string(r.status);
    if (!r.message.empty())
        j["message"] = r.message;
    return j;
}

inline void print_certificate(std::ostream &os, const StationarityCertificate &cert) {
    auto list = [](const std::vector<Index> &v) {
        std::string s = "{";
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? ", " : "") + std::to_string(v[i]);
        return s + "}";
    };
    os << "class: " << to_string(cert.klass) << '\n'
       << "feasible: " << (cert.feasible ? "yes" : "no") << '\n'
       << "index sets: I_lambda=" << list(cert.index_sets.lambda_active)
       << " I_eta=" << list(cert.index_sets.eta_active) << " I_bi=" << list(cert.index_sets.biactive) << '\n'
       << "MPCC-LICQ: " << (cert.licq ? "holds" : "fails") << " (rank " << cert.licq_rank << " of "
       << cert.licq_rows << " rows)\n"
       << "ULSC: " << (cert.ulsc ? "true" : "false") << '\n'
       << "stationarity residual: " << format_double(cert.stat_residual) << '\n';
    for (const auto &bp : cert.biactive_products)
        os << "biactive " << bp.index << ": v=" << format_double(bp.v) << " w=" << format_double(bp.w)
           << " v*w=" << format_double(bp.v * bp.w) << '\n';
    os << "second-order probe min: "
       << (cert.second_order_min ? format_double(*cert.second_order_min) : std::string("n/a")) << '\n';
}

inline void print_iteration_table(std::ostream &os, const std::vector<OuterRecord> &records) {
    char line[160];
    std::snprintf(line, sizeof line, "%3s %10s %12s %12s %12s %6s  %s\n", "k", "mu", "phi", "|h|", "kkt_res",
                  "inner", "status");
    os << line;
    for (const auto &r : records) {
        std::snprintf(line, sizeof line, "%3d %10.3e %12.4e %12.4e %12.4e %6d  %s\n", r.k, r.mu, r.phi, r.h_norm,
                      r.kkt_res, r.inner_iters, to_string(r.inner_status));
        os << line;
    }
}

} // namespace gapmpcc
