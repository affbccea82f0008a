#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "gapmpcc/dgap.hpp"
#include "gapmpcc/types.hpp"

namespace gapmpcc {

/// min J(z)  s.t.  h(z) = 0,  0 <= lambda _|_ eta >= 0,  with z = [x; lambda; eta].
///
/// Evaluators must be reentrant. Derivatives are supplied analytically:
/// the gradient is returned as a column vector, the constraint Jacobian as an
/// n_h x dim() matrix and one dim() x dim() Hessian per constraint.
struct MpccProblem {
    std::string name;
    Index n_x = 0;
    Index n_lambda = 0;
    Index n_h = 0;

    std::function<double(const Vec &)> cost;
    std::function<Vec(const Vec &)> cost_gradient;
    std::function<Mat(const Vec &)> cost_hessian;
    std::function<Vec(const Vec &)> constraints;
    std::function<Mat(const Vec &)> constraint_jacobian;
    std::function<std::vector<Mat>(const Vec &)> constraint_hessians;

    Index dim() const { return n_x + 2 * n_lambda; }
    Index lambda_offset() const { return n_x; }
    Index eta_offset() const { return n_x + n_lambda; }

    auto x_part(const Vec &z) const { return z.head(n_x); }
    auto lambda_part(const Vec &z) const { return z.segment(n_x, n_lambda); }
    auto eta_part(const Vec &z) const { return z.segment(n_x + n_lambda, n_lambda); }

    void check_point(const Vec &z) const { detail::require_same_size(z.size(), dim(), name.c_str()); }
};

/// Activity classes of the complementarity pairs. Indices are 0-based.
struct IndexSets {
    std::vector<Index> lambda_active; ///< lambda_i = 0 < eta_i
    std::vector<Index> eta_active;    ///< eta_i = 0 < lambda_i
    std::vector<Index> biactive;      ///< lambda_i = eta_i = 0

    std::size_t size() const { return lambda_active.size() + eta_active.size() + biactive.size(); }
    friend bool operator==(const IndexSets &, const IndexSets &) = default;
};

struct FeasibilityResidual {
    double h_norm = 0.0;   ///< |h(z)|_2
    double comp_gap = 0.0; ///< phi^ab(lambda, eta)
    double comp_min = 0.0; ///< |min(lambda, eta)|_inf
};

struct LicqResult {
    bool holds = false;
    Index rank = 0;
    Index rows = 0;
};

inline constexpr double kDefaultRankTol = 1e-8;

/// Activity tolerance 1e-6 * max(1, |z|_inf).
inline double default_activity_tol(const Vec &z) { return 1e-6 * std::max(1.0, detail::inf_norm(z)); }

/// Pairs with both components above tol belong to no set.
inline IndexSets index_sets(const MpccProblem &problem, const Vec &z, double tol) {
    problem.check_point(z);
    if (tol < 0.0)
        throw std::invalid_argument("index_sets: tol must be nonnegative");
    IndexSets idx;
    const auto lambda = problem.lambda_part(z);
    const auto eta = problem.eta_part(z);
    for (Index i = 0; i < problem.n_lambda; ++i) {
        const bool l0 = lambda[i] <= tol, e0 = eta[i] <= tol;
        if (l0 && e0)
            idx.biactive.push_back(i);
        else if (l0)
            idx.lambda_active.push_back(i);
        else if (e0)
            idx.eta_active.push_back(i);
    }
    return idx;
}

inline IndexSets index_sets(const MpccProblem &problem, const Vec &z) {
    return index_sets(problem, z, default_activity_tol(z));
}

inline FeasibilityResidual feasibility_residual(const MpccProblem &problem, const Vec &z,
                                                const GapParams &p = {}) {
    problem.check_point(z);
    FeasibilityResidual r;
    r.h_norm = problem.n_h > 0 ? problem.constraints(z).norm() : 0.0;
    const Vec lambda = problem.lambda_part(z);
    const Vec eta = problem.eta_part(z);
    r.comp_gap = std::max(0.0, phi_ab(lambda, eta, p));
    r.comp_min = detail::inf_norm(lambda.cwiseMin(eta));
    return r;
}

/// Numerical rank: singular values above tol_rank * sigma_max.
inline Index numerical_rank(const Mat &m, double tol_rank = kDefaultRankTol) {
    if (m.rows() == 0 || m.cols() == 0)
        return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    const auto &s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0)
        return 0;
    return static_cast<Index>((s.array() > tol_rank * s[0]).count());
}

/// Rows of the MPCC-LICQ test: grad h, then unit rows for active lambda_i and eta_i.
inline Mat licq_rows(const MpccProblem &problem, const Vec &z, const IndexSets &idx) {
    problem.check_point(z);
    const Index n = problem.dim();
    const Index n_lam = static_cast<Index>(idx.lambda_active.size() + idx.biactive.size());
    const Index n_eta = static_cast<Index>(idx.eta_active.size() + idx.biactive.size());
    Mat rows = Mat::Zero(problem.n_h + n_lam + n_eta, n);
    if (problem.n_h > 0)
        rows.topRows(problem.n_h) = problem.constraint_jacobian(z);
    Index r = problem.n_h;
    for (const auto &set : {idx.lambda_active, idx.biactive})
        for (Index i : set)
            rows(r++, problem.lambda_offset() + i) = 1.0;
    for (const auto &set : {idx.eta_active, idx.biactive})
        for (Index i : set)
            rows(r++, problem.eta_offset() + i) = 1.0;
    return rows;
}

inline LicqResult licq_check(const MpccProblem &problem, const Vec &z, const IndexSets &idx,
                             double tol_rank = kDefaultRankTol) {
    const Mat rows = licq_rows(problem, z, idx);
    LicqResult res;
    res.rows = rows.rows();
    res.rank = numerical_rank(rows, tol_rank);
    res.holds = res.rank == res.rows;
    return res;
}

/// Orthonormal basis of the null space of jac (n_cols columns). With no rows
/// the basis is the identity.
inline Mat kernel_basis(const Mat &jac, Index n_cols, double tol_rank = kDefaultRankTol) {
    if (jac.rows() == 0)
        return Mat::Identity(n_cols, n_cols);
    detail::require_same_size(jac.cols(), n_cols, "kernel_basis");
    Eigen::JacobiSVD<Mat> svd(jac, Eigen::ComputeFullV);
    const auto &s = svd.singularValues();
    Index rank = 0;
    if (s.size() > 0 && s[0] > 0.0)
        rank = static_cast<Index>((s.array() > tol_rank * s[0]).count());
    return svd.matrixV().rightCols(n_cols - rank);
}

inline Mat kernel_basis(const Mat &jac) { return kernel_basis(jac, jac.cols()); }

} // namespace gapmpcc
