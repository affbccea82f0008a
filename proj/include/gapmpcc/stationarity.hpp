#pragma once

// Stationarity certificates for MPCC points.
//
// A feasible point z is weakly stationary when multipliers (u, v, w) satisfy
//
//   grad J + jac_h^T u - sum_i v_i e_lambda_i - sum_i w_i e_eta_i = 0,
//   w_i = 0 on I_lambda,   v_i = 0 on I_eta,
//
// Clarke stationary when additionally v_i w_i >= 0 on the biactive set, and
// strongly stationary when v_i >= 0 and w_i >= 0 there.
//
// The second-order half works on iterates of the penalty subproblem. At a KKT
// point of the subproblem and for d in ker(jac_h),
//
//   D^2(J + mu phi; d, d) = mu sum_i [D^2(delta_i; d, d) - D(delta_i; d)]
//                           + 1/2 d^T (grad^2 J + sum_j u_j grad^2 h_j) d,
//
// which second_order_value evaluates with the closed-form sod_diff.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "gapmpcc/dgap.hpp"
#include "gapmpcc/inner.hpp"
#include "gapmpcc/model.hpp"

namespace gapmpcc {

enum class StationarityClass { none, weak, clarke, strong };

inline const char *to_string(StationarityClass c) {
    switch (c) {
    case StationarityClass::none: return "none";
    case StationarityClass::weak: return "weak";
    case StationarityClass::clarke: return "clarke";
    case StationarityClass::strong: return "strong";
    }
    return "?";
}

struct BiactiveProduct {
    Index index = 0;
    double v = 0.0;
    double w = 0.0;
};

struct StationarityCertificate {
    StationarityClass klass = StationarityClass::none;
    IndexSets index_sets;
    bool feasible = false;
    bool licq = false;
    Index licq_rank = 0;
    Index licq_rows = 0;
    bool ulsc = false;
    double stat_residual = std::numeric_limits<double>::infinity();
    std::vector<BiactiveProduct> biactive_products;
    std::optional<double> second_order_min;
    std::optional<Vec> witness_direction;
};

inline constexpr double kDefaultStationarityTol = 1e-6;

/// |v_i w_i| > tol for every biactive i.
inline bool ulsc_check(const Vec &v, const Vec &w, const IndexSets &idx, double tol) {
    return std::all_of(idx.biactive.begin(), idx.biactive.end(),
                       [&](Index i) { return std::abs(v[i] * w[i]) > tol; });
}

/// grad J + jac^T u - v e_lambda - w e_eta.
inline Vec stationarity_vector(const MpccProblem &problem, const Vec &z, const Vec &u, const Vec &v,
                               const Vec &w) {
    Vec r = problem.cost_gradient(z);
    if (problem.n_h > 0)
        r += problem.constraint_jacobian(z).transpose() * u;
    r.segment(problem.lambda_offset(), problem.n_lambda) -= v;
    r.segment(problem.eta_offset(), problem.n_lambda) -= w;
    return r;
}

/// Grade (z, u, v, w). tol scales the stationarity and sign tests; the
/// activity tolerance that defines the index sets is separate, so enlarging
/// tol never moves an index between sets.
inline StationarityCertificate classify(const MpccProblem &problem, const Vec &z, const Vec &u,
                                        const Vec &v, const Vec &w,
                                        double tol = kDefaultStationarityTol,
                                        std::optional<double> activity_tol = std::nullopt) {
    problem.check_point(z);
    detail::require_same_size(u.size(), problem.n_h, "classify u");
    detail::require_same_size(v.size(), problem.n_lambda, "classify v");
    detail::require_same_size(w.size(), problem.n_lambda, "classify w");

    const double act = activity_tol.value_or(default_activity_tol(z));
    StationarityCertificate cert;
    cert.index_sets = index_sets(problem, z, act);
    const IndexSets &idx = cert.index_sets;

    const Vec lambda = problem.lambda_part(z), eta = problem.eta_part(z);
    const double h_inf = problem.n_h > 0 ? detail::inf_norm(problem.constraints(z)) : 0.0;
    const double min_comp = problem.n_lambda > 0 ? std::min(lambda.minCoeff(), eta.minCoeff()) : 0.0;
    cert.feasible = idx.size() == static_cast<std::size_t>(problem.n_lambda) && h_inf <= act &&
                    min_comp >= -act;

    const Vec grad_j = problem.cost_gradient(z);
    cert.stat_residual = detail::inf_norm(stationarity_vector(problem, z, u, v, w));

    const double vw_scale = std::max(detail::inf_norm(v), detail::inf_norm(w));
    const double tol_sign = tol * (1.0 + vw_scale);
    cert.ulsc = ulsc_check(v, w, idx, tol_sign);
    for (Index i : idx.biactive)
        cert.biactive_products.push_back({i, v[i], w[i]});

    if (cert.feasible) {
        const LicqResult licq = licq_check(problem, z, idx);
        cert.licq = licq.holds;
        cert.licq_rank = licq.rank;
        cert.licq_rows = licq.rows;
    }
    if (!cert.feasible)
        return cert;

    bool weak = cert.stat_residual <= tol * std::max(1.0, detail::inf_norm(grad_j));
    for (Index i : idx.lambda_active)
        weak = weak && std::abs(w[i]) <= tol_sign;
    for (Index i : idx.eta_active)
        weak = weak && std::abs(v[i]) <= tol_sign;
    if (!weak)
        return cert;

    bool clarke = true, strong = true;
    for (Index i : idx.biactive) {
        const double vi = v[i], wi = w[i];
        clarke = clarke && vi * wi >= -tol_sign * std::max(std::abs(vi), std::abs(wi));
        strong = strong && vi >= -tol_sign && wi >= -tol_sign;
    }
    cert.klass = strong ? StationarityClass::strong
                        : (clarke ? StationarityClass::clarke : StationarityClass::weak);
    return cert;
}

/// Least-squares fit of (u, v, w) to the weak-stationarity system with the
/// structural zeros w_i = 0 on I_lambda and v_i = 0 on I_eta.
struct MultiplierFit {
    Vec u, v, w;
    double residual = 0.0;
};

inline MultiplierFit fit_multipliers(const MpccProblem &problem, const Vec &z, const IndexSets &idx) {
    problem.check_point(z);
    const Mat rows = licq_rows(problem, z, idx); // [jac_h; e_lambda(I_l, I_bi); e_eta(I_e, I_bi)]
    const Vec grad = problem.cost_gradient(z);
    // grad + jac^T u - E_l^T v - E_e^T w = 0  <=>  rows^T [u; -v; -w] = -grad
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(rows.transpose());
    const Vec y = cod.solve(-grad);

    MultiplierFit fit;
    fit.u = y.head(problem.n_h);
    fit.v = Vec::Zero(problem.n_lambda);
    fit.w = Vec::Zero(problem.n_lambda);
    Index r = problem.n_h;
    for (const auto &set : {idx.lambda_active, idx.biactive})
        for (Index i : set)
            fit.v[i] = -y[r++];
    for (const auto &set : {idx.eta_active, idx.biactive})
        for (Index i : set)
            fit.w[i] = -y[r++];
    fit.residual = detail::inf_norm(stationarity_vector(problem, z, fit.u, fit.v, fit.w));
    return fit;
}

/// Second-order quantity of the penalty subproblem along d in ker(jac_h).
/// (z, u) is expected to be a KKT point of P_gap(mu); only the kernel
/// condition is checked here.
inline double second_order_value(const MpccProblem &problem, const Vec &z, const Vec &u, double mu,
                                 const Vec &d, const GapParams &p = {}) {
    problem.check_point(z);
    detail::require_same_size(d.size(), problem.dim(), "second_order_value direction");
    if (problem.n_h > 0) {
        const double drift = detail::inf_norm(problem.constraint_jacobian(z) * d);
        if (drift > 1e-8 * d.norm())
            throw std::invalid_argument("second_order_value: direction not in ker(grad h)");
    }
    const auto lambda = problem.lambda_part(z), eta = problem.eta_part(z);
    const auto dl = problem.lambda_part(d), de = problem.eta_part(d);
    double pen = 0.0;
    for (Index i = 0; i < problem.n_lambda; ++i)
        pen += sod_diff(lambda[i], eta[i], dl[i], de[i], p);
    double quad = d.dot(problem.cost_hessian(z) * d);
    if (problem.n_h > 0 && problem.constraint_hessians) {
        const auto hh = problem.constraint_hessians(z);
        for (Index j = 0; j < problem.n_h && j < static_cast<Index>(hh.size()); ++j)
            quad += u[j] * d.dot(hh[static_cast<std::size_t>(j)] * d);
    }
    return mu * pen + 0.5 * quad;
}

struct SecondOrderProbe {
    double min_value = std::numeric_limits<double>::infinity();
    Vec argmin_d;
};

inline constexpr int kDefaultSecondOrderSamples = 256;

/// Minimum of second_order_value over random unit directions of ker(jac_h)
/// and the projected biactive probes +-(e_lambda_i - e_eta_i).
inline SecondOrderProbe second_order_check(const MpccProblem &problem, const Vec &z, const Vec &u,
                                           double mu, const GapParams &p = {},
                                           int n_samples = kDefaultSecondOrderSamples,
                                           std::uint64_t seed = 0) {
    problem.check_point(z);
    const Index n = problem.dim();
    const Mat basis = kernel_basis(constraint_jacobian_or_empty(problem, z), n);
    SecondOrderProbe best;
    best.argmin_d = Vec::Zero(n);
    if (basis.cols() == 0) {
        best.min_value = 0.0;
        return best;
    }
    auto consider = [&](const Vec &d) {
        const double val = second_order_value(problem, z, u, mu, d, p);
        if (val < best.min_value) {
            best.min_value = val;
            best.argmin_d = d;
        }
    };

    for (Index i = 0; i < problem.n_lambda; ++i) {
        for (double sgn : {1.0, -1.0}) {
            Vec probe = Vec::Zero(n);
            probe[problem.lambda_offset() + i] = sgn;
            probe[problem.eta_offset() + i] = -sgn;
            Vec d = basis * (basis.transpose() * probe);
            const double nrm = d.norm();
            if (nrm > 1e-12)
                consider(d / nrm);
        }
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int s = 0; s < n_samples; ++s) {
        Vec c(basis.cols());
        for (Index j = 0; j < c.size(); ++j)
            c[j] = normal(rng);
        const double nrm = c.norm();
        if (nrm == 0.0)
            continue;
        consider(basis * (c / nrm));
    }
    if (!std::isfinite(best.min_value))
        best.min_value = 0.0;
    return best;
}

enum class CurvatureSearch { found, not_found, no_biactive, licq_failure };

inline const char *to_string(CurvatureSearch s) {
    switch (s) {
    case CurvatureSearch::found: return "found";
    case CurvatureSearch::not_found: return "not_found";
    case CurvatureSearch::no_biactive: return "no_biactive";
    case CurvatureSearch::licq_failure: return "licq_failure";
    }
    return "?";
}

struct NegativeCurvature {
    CurvatureSearch status = CurvatureSearch::not_found;
    Vec d;
    double value = 0.0;
};

/// Least-norm d with jac_h d = 0, d_lambda_i = 0 on I_lambda, d_eta_i = 0 on
/// I_eta and (d_lambda_i, d_eta_i) = (1, -1) on the biactive set; reported
/// when second_order_value(d) < 0. idx describes the limit point, not z.
inline NegativeCurvature find_negative_curvature(const MpccProblem &problem, const Vec &z, const Vec &u,
                                                 double mu, const IndexSets &idx,
                                                 const GapParams &p = {},
                                                 double tol_rank = kDefaultRankTol) {
    NegativeCurvature res;
    res.d = Vec::Zero(problem.dim());
    if (idx.biactive.empty()) {
        res.status = CurvatureSearch::no_biactive;
        return res;
    }
    const Mat rows = licq_rows(problem, z, idx);
    if (numerical_rank(rows, tol_rank) != rows.rows()) {
        res.status = CurvatureSearch::licq_failure;
        return res;
    }
    Vec rhs = Vec::Zero(rows.rows());
    const Index lam_rows = static_cast<Index>(idx.lambda_active.size() + idx.biactive.size());
    const Index n_act_l = static_cast<Index>(idx.lambda_active.size());
    const Index n_act_e = static_cast<Index>(idx.eta_active.size());
    const Index n_bi = static_cast<Index>(idx.biactive.size());
    rhs.segment(problem.n_h + n_act_l, n_bi).setConstant(1.0);
    rhs.segment(problem.n_h + lam_rows + n_act_e, n_bi).setConstant(-1.0);

    Eigen::CompleteOrthogonalDecomposition<Mat> cod(rows);
    res.d = cod.solve(rhs);
    res.value = second_order_value(problem, z, u, mu, res.d, p);
    res.status = res.value < 0.0 ? CurvatureSearch::found : CurvatureSearch::not_found;
    return res;
}

} // namespace gapmpcc
