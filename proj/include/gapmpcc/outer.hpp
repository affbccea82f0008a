#pragma once

// Gap penalty method: solve P_gap(mu_k) for mu_k = mu0 * kappa^k, warm
// starting each solve from the previous KKT point, until the D-gap value
// drops below tol_comp.
//
// The certificate is issued for the limit the iterates approach. The region
// of each pair at the last iterate predicts the limit index sets
// (A, B, C -> I_lambda; E, F, G -> I_eta; D, H -> biactive), and a few Newton
// steps on the tightened problem (predicted zeros fixed, h = 0) move the
// iterate onto the complementarity set. The multipliers of the fixed
// components are the MPCC multipliers (v, w) of that point.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "gapmpcc/dgap.hpp"
#include "gapmpcc/inner.hpp"
#include "gapmpcc/model.hpp"
#include "gapmpcc/stationarity.hpp"

namespace gapmpcc {

struct OuterOptions {
    double mu0 = 1.0;
    double kappa = 10.0;
    double tol_comp = 1e-8;
    int max_outer = 12;
    InnerOptions inner;
    GapParams gap;
    /// Multiplier and stationarity tolerance handed to classify.
    double tol_stationarity = kDefaultStationarityTol;
    int second_order_samples = kDefaultSecondOrderSamples;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(mu0 > 0.0))
            throw std::invalid_argument("OuterOptions: mu0 must be positive");
        if (!(kappa > 1.0))
            throw std::invalid_argument("OuterOptions: kappa must exceed 1");
        if (!(tol_comp > 0.0))
            throw std::invalid_argument("OuterOptions: tol_comp must be positive");
        if (max_outer < 1)
            throw std::invalid_argument("OuterOptions: max_outer must be >= 1");
        inner.validate();
    }
};

struct OuterRecord {
    int k = 0;
    double mu = 0.0;
    Vec z, u;
    double phi = 0.0;
    double h_norm = 0.0;
    double kkt_res = 0.0;
    int inner_iters = 0;
    KktStatus inner_status = KktStatus::max_iter;
    Vec v, w;
};

enum class SolveStatus { strong, clarke, weak, infeasible_stall, max_outer, inner_failure };

inline const char *to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::strong: return "strong";
    case SolveStatus::clarke: return "clarke";
    case SolveStatus::weak: return "weak";
    case SolveStatus::infeasible_stall: return "infeasible_stall";
    case SolveStatus::max_outer: return "max_outer";
    case SolveStatus::inner_failure: return "inner_failure";
    }
    return "?";
}

/// Point on the complementarity set with its MPCC multipliers.
struct LimitPoint {
    Vec z, u, v, w;
    double residual = 0.0;
    bool converged = false;
};

struct SolveReport {
    std::string problem;
    GapParams gap;
    std::vector<OuterRecord> records;
    StationarityCertificate final_certificate;
    SolveStatus status = SolveStatus::max_outer;
    LimitPoint limit;
    double final_cost = 0.0;
    std::string message;
};

/// v = -mu grad_lambda phi, w = -mu grad_eta phi.
inline std::pair<Vec, Vec> recover_multipliers(const VecRef &lambda, const VecRef &eta, double mu,
                                               const GapParams &p = {}) {
    if (!(mu > 0.0))
        throw std::invalid_argument("recover_multipliers: mu must be positive");
    GapGradient g = grad_phi_ab(lambda, eta, p);
    return {-mu * g.lambda, -mu * g.eta};
}

inline std::pair<Vec, Vec> recover_multipliers(const MpccProblem &problem, const Vec &z, double mu,
                                               const GapParams &p = {}) {
    problem.check_point(z);
    return recover_multipliers(problem.lambda_part(z), problem.eta_part(z), mu, p);
}

/// Index sets of the limit predicted from the region of each pair. On the
/// rays B and C the eta-multiplier vanishes, on F and G the lambda-multiplier.
inline IndexSets limit_index_sets(const MpccProblem &problem, const Vec &z, const GapParams &p = {},
                                  double tol = kDefaultRegionTol) {
    problem.check_point(z);
    const auto lambda = problem.lambda_part(z), eta = problem.eta_part(z);
    IndexSets idx;
    for (Index i = 0; i < problem.n_lambda; ++i) {
        switch (region_of(lambda[i], eta[i], p, tol)) {
        case PairRegion::A:
        case PairRegion::B:
        case PairRegion::C: idx.lambda_active.push_back(i); break;
        case PairRegion::E:
        case PairRegion::F:
        case PairRegion::G: idx.eta_active.push_back(i); break;
        case PairRegion::D:
        case PairRegion::H: idx.biactive.push_back(i); break;
        }
    }
    return idx;
}

/// Newton iteration on min J s.t. h = 0 with the components predicted zero
/// by idx held at zero.
inline LimitPoint estimate_limit_point(const MpccProblem &problem, const Vec &z0, const Vec &u0,
                                       const IndexSets &idx, int max_iter = 30, double tol = 1e-11) {
    problem.check_point(z0);
    const Index n = problem.dim();
    LimitPoint lp;
    lp.z = z0;
    Vec y = Vec::Zero(problem.n_h + static_cast<Index>(idx.lambda_active.size() + idx.eta_active.size() +
                                                       2 * idx.biactive.size()));
    y.head(problem.n_h) = u0.size() == problem.n_h ? u0 : Vec::Zero(problem.n_h);

    auto fixed_values = [&](const Vec &z) {
        const Mat rows = licq_rows(problem, z, idx);
        Vec c(rows.rows());
        if (problem.n_h > 0)
            c.head(problem.n_h) = problem.constraints(z);
        c.tail(rows.rows() - problem.n_h) = rows.bottomRows(rows.rows() - problem.n_h) * z;
        return std::pair<Mat, Vec>{rows, c};
    };

    for (int it = 0; it <= max_iter; ++it) {
        auto [rows, c] = fixed_values(lp.z);
        const Vec grad = problem.cost_gradient(lp.z);
        if (it == 0) {
            Eigen::CompleteOrthogonalDecomposition<Mat> cod(rows.transpose());
            y = cod.solve(-grad);
        }
        const Vec stat = grad + rows.transpose() * y;
        const double scale = std::max(1.0, detail::inf_norm(grad));
        lp.residual = std::max(detail::inf_norm(stat) / scale, detail::inf_norm(c));
        if (lp.residual <= tol) {
            lp.converged = true;
            break;
        }
        if (it == max_iter)
            break;
        const Index m = rows.rows();
        Mat kkt = Mat::Zero(n + m, n + m);
        Mat hess = problem.cost_hessian(lp.z);
        if (problem.n_h > 0 && problem.constraint_hessians) {
            const auto hh = problem.constraint_hessians(lp.z);
            for (Index j = 0; j < problem.n_h && j < static_cast<Index>(hh.size()); ++j)
                hess += y[j] * hh[static_cast<std::size_t>(j)];
        }
        kkt.topLeftCorner(n, n) = hess;
        kkt.topRightCorner(n, m) = rows.transpose();
        kkt.bottomLeftCorner(m, n) = rows;
        Vec rhs(n + m);
        rhs.head(n) = -stat;
        rhs.tail(m) = -c;
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(kkt);
        const Vec step = cod.solve(rhs);
        lp.z += step.head(n);
        y += step.tail(m);
    }

    lp.u = y.head(problem.n_h);
    lp.v = Vec::Zero(problem.n_lambda);
    lp.w = Vec::Zero(problem.n_lambda);
    Index r = problem.n_h;
    for (const auto &set : {idx.lambda_active, idx.biactive})
        for (Index i : set)
            lp.v[i] = -y[r++];
    for (const auto &set : {idx.eta_active, idx.biactive})
        for (Index i : set)
            lp.w[i] = -y[r++];
    // Snap the held components to exact zeros.
    for (const auto &set : {idx.lambda_active, idx.biactive})
        for (Index i : set)
            lp.z[problem.lambda_offset() + i] = 0.0;
    for (const auto &set : {idx.eta_active, idx.biactive})
        for (Index i : set)
            lp.z[problem.eta_offset() + i] = 0.0;
    return lp;
}

namespace detail {

inline SolveStatus status_from_class(StationarityClass c) {
    switch (c) {
    case StationarityClass::strong: return SolveStatus::strong;
    case StationarityClass::clarke: return SolveStatus::clarke;
    case StationarityClass::weak: return SolveStatus::weak;
    case StationarityClass::none: return SolveStatus::infeasible_stall;
    }
    return SolveStatus::infeasible_stall;
}

} // namespace detail

/// Certificate for the last iterate of a run: limit estimate, first-order
/// class, and the second-order probes of P_gap(mu) at the iterate itself.
inline StationarityCertificate certify_iterate(const MpccProblem &problem, const OuterRecord &rec,
                                               const OuterOptions &opts, LimitPoint *limit_out = nullptr) {
    const IndexSets predicted = limit_index_sets(problem, rec.z, opts.gap);
    LimitPoint lp = estimate_limit_point(problem, rec.z, rec.u, predicted);

    StationarityCertificate cert;
    bool usable = lp.converged;
    if (usable) {
        cert = classify(problem, lp.z, lp.u, lp.v, lp.w, opts.tol_stationarity);
        usable = cert.feasible;
    }
    if (!usable) {
        lp = LimitPoint{rec.z, rec.u, rec.v, rec.w, lp.residual, false};
        cert = classify(problem, rec.z, rec.u, rec.v, rec.w, opts.tol_stationarity);
    }

    const SecondOrderProbe probe =
        second_order_check(problem, rec.z, rec.u, rec.mu, opts.gap, opts.second_order_samples, opts.seed);
    cert.second_order_min = probe.min_value;
    const NegativeCurvature nc = find_negative_curvature(problem, rec.z, rec.u, rec.mu, predicted, opts.gap);
    if (nc.status == CurvatureSearch::found) {
        cert.witness_direction = nc.d;
        cert.second_order_min = std::min(probe.min_value, nc.value);
    } else if (probe.min_value < 0.0) {
        cert.witness_direction = probe.argmin_d;
    }
    if (limit_out)
        *limit_out = std::move(lp);
    return cert;
}

inline SolveReport solve_mpcc(const MpccProblem &problem, const Vec &z0, const OuterOptions &opts = {}) {
    opts.validate();
    problem.check_point(z0);

    SolveReport report;
    report.problem = problem.name;
    report.gap = opts.gap;

    Vec z = z0;
    Vec u = Vec::Zero(problem.n_h);
    bool terminated = false;
    for (int k = 0; k < opts.max_outer; ++k) {
        const double mu = opts.mu0 * std::pow(opts.kappa, k);
        KktPoint kp = solve_pgap(problem, mu, z, u, opts.inner, opts.gap);

        OuterRecord rec;
        rec.k = k;
        rec.mu = mu;
        rec.z = kp.z;
        rec.u = kp.u;
        const FeasibilityResidual feas = feasibility_residual(problem, kp.z, opts.gap);
        rec.phi = feas.comp_gap;
        rec.h_norm = feas.h_norm;
        rec.kkt_res = kp.residual;
        rec.inner_iters = kp.iterations;
        rec.inner_status = kp.status;
        std::tie(rec.v, rec.w) = recover_multipliers(problem, kp.z, mu, opts.gap);
        report.records.push_back(rec);

        if (kp.status == KktStatus::diverged || kp.status == KktStatus::linalg_failure) {
            report.status = SolveStatus::inner_failure;
            report.message = std::string("inner solve ") + to_string(kp.status) +
                             (kp.message.empty() ? "" : ": " + kp.message);
            report.limit = LimitPoint{kp.z, kp.u, rec.v, rec.w, kp.residual, false};
            report.final_cost = problem.cost(kp.z);
            return report;
        }
        z = kp.z;
        u = kp.u;
        if (kp.status == KktStatus::converged && rec.phi <= opts.tol_comp) {
            terminated = true;
            break;
        }
    }

    const OuterRecord &last = report.records.back();
    report.final_certificate = certify_iterate(problem, last, opts, &report.limit);
    report.final_cost = problem.cost(report.limit.z);
    if (terminated) {
        report.status = detail::status_from_class(report.final_certificate.klass);
    } else if (last.phi > opts.tol_comp) {
        report.status = SolveStatus::infeasible_stall;
        report.message = "complementarity gap above tolerance after max_outer rounds";
    } else {
        report.status = SolveStatus::max_outer;
        report.message = "inner solve did not converge in the last round";
    }
    return report;
}

struct DecayAudit {
    double max_product = 0.0;
    std::vector<double> products; ///< phi(z^k) * mu^k per record
};

/// phi(z^k) * mu^k along a run; a bounded sequence is the numerical face of
/// phi(z^k) <= M1 / mu^k.
inline DecayAudit feasibility_decay_audit(const SolveReport &report) {
    if (report.records.size() < 2)
        throw std::invalid_argument("feasibility_decay_audit: need at least two records");
    DecayAudit audit;
    for (const auto &rec : report.records) {
        audit.products.push_back(rec.phi * rec.mu);
        audit.max_product = std::max(audit.max_product, audit.products.back());
    }
    return audit;
}

} // namespace gapmpcc
