#pragma once

// Solver for the gap penalty subproblem
//
//   min_z  J(z) + mu * phi^ab(lambda, eta)   s.t.  h(z) = 0.
//
// delta^ab is piecewise quadratic, so within one region the Newton model of
// the penalty term is exact. Each iteration freezes the region of every pair,
// solves the KKT system with a Hessian made positive definite on ker(grad h),
// adds a unit negative-curvature direction when the frozen Hessian is
// indefinite there, and backtracks on the l1 merit function
// J + mu phi + rho |h|_1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "gapmpcc/dgap.hpp"
#include "gapmpcc/model.hpp"
#include "gapmpcc/types.hpp"

namespace gapmpcc {

struct InnerOptions {
    double tol_kkt = 1e-8;
    int max_iter = 200;
    double reg_min = 1e-8;
    double ls_beta = 0.5;
    double ls_sigma = 1e-4;
    /// l1 constraint weight; nonpositive selects 10 (1 + |u0|_inf).
    double merit_rho = 0.0;
    /// Merit values below this count as unbounded descent.
    double divergence_floor = -1e12;

    void validate() const {
        if (!(tol_kkt > 0.0) || !(reg_min > 0.0))
            throw std::invalid_argument("InnerOptions: tolerances must be positive");
        if (max_iter < 1)
            throw std::invalid_argument("InnerOptions: max_iter must be >= 1");
        if (!(ls_beta > 0.0 && ls_beta < 1.0))
            throw std::invalid_argument("InnerOptions: ls_beta must lie in (0, 1)");
        if (!(ls_sigma > 0.0 && ls_sigma < 0.5))
            throw std::invalid_argument("InnerOptions: ls_sigma must lie in (0, 1/2)");
    }
};

enum class KktStatus { converged, max_iter, diverged, linalg_failure };

inline const char *to_string(KktStatus s) {
    switch (s) {
    case KktStatus::converged: return "converged";
    case KktStatus::max_iter: return "max_iter";
    case KktStatus::diverged: return "diverged";
    case KktStatus::linalg_failure: return "linalg_failure";
    }
    return "?";
}

/// One accepted step of the merit line search.
struct StepRecord {
    double merit_before = 0.0;
    double merit_after = 0.0;
    double predicted = 0.0; ///< directional derivative of the merit along the step
    double step_length = 0.0;
    double regularization = 0.0;
    bool negative_curvature = false;
};

struct KktPoint {
    Vec z;
    Vec u;
    double residual = std::numeric_limits<double>::infinity();
    KktStatus status = KktStatus::max_iter;
    int iterations = 0;
    std::string message;
    std::vector<StepRecord> steps;
};

/// mu * grad phi^ab scattered into a full-length vector.
inline Vec penalty_gradient(const MpccProblem &problem, const Vec &z, double mu, const GapParams &p) {
    Vec g = Vec::Zero(problem.dim());
    const GapGradient gp = grad_phi_ab(problem.lambda_part(z), problem.eta_part(z), p);
    g.segment(problem.lambda_offset(), problem.n_lambda) = mu * gp.lambda;
    g.segment(problem.eta_offset(), problem.n_lambda) = mu * gp.eta;
    return g;
}

inline Mat constraint_jacobian_or_empty(const MpccProblem &problem, const Vec &z) {
    if (problem.n_h == 0)
        return Mat(0, problem.dim());
    return problem.constraint_jacobian(z);
}

/// max(|grad J + jac^T u + mu grad phi|_inf, |h|_inf).
inline double kkt_residual(const MpccProblem &problem, const Vec &z, const Vec &u, double mu,
                           const GapParams &p = {}) {
    problem.check_point(z);
    detail::require_same_size(u.size(), problem.n_h, "kkt_residual multipliers");
    Vec r = problem.cost_gradient(z) + penalty_gradient(problem, z, mu, p);
    double h_inf = 0.0;
    if (problem.n_h > 0) {
        r += problem.constraint_jacobian(z).transpose() * u;
        h_inf = detail::inf_norm(problem.constraints(z));
    }
    return std::max(detail::inf_norm(r), h_inf);
}

namespace detail {

inline Eigen::Matrix2d region_block(PairRegion r, const GapParams &p) {
    const double a = p.a(), b = p.b();
    Eigen::Matrix2d m;
    switch (r) {
    case PairRegion::A: m << b - a, 0.0, 0.0, 0.0; break;
    case PairRegion::D: m << -a, 1.0, 1.0, -1.0 / b; break;
    case PairRegion::E: m << 0.0, 0.0, 0.0, (b - a) / (a * b); break;
    case PairRegion::H: m << b, -1.0, -1.0, 1.0 / a; break;
    default: m.setZero(); break;
    }
    return m;
}

inline Eigen::Matrix2d larger_trace(const Eigen::Matrix2d &x, const Eigen::Matrix2d &y) {
    return x.trace() >= y.trace() ? x : y;
}

} // namespace detail

/// Hessian of the active quadratic piece of delta^ab, one 2x2 block per pair
/// in (lambda_i, eta_i) coordinates. On a kink ray the adjacent open region
/// with the larger trace is used; the corner takes the A block.
inline std::vector<Eigen::Matrix2d> penalty_hessian(const VecRef &lambda, const VecRef &eta,
                                                    const GapParams &p = {},
                                                    double tol = kDefaultRegionTol) {
    detail::require_same_size(lambda.size(), eta.size(), "penalty_hessian");
    using detail::larger_trace;
    using detail::region_block;
    std::vector<Eigen::Matrix2d> blocks;
    blocks.reserve(static_cast<std::size_t>(lambda.size()));
    for (Index i = 0; i < lambda.size(); ++i) {
        const PairRegion r = region_of(lambda[i], eta[i], p, tol);
        switch (r) {
        case PairRegion::B:
            blocks.push_back(larger_trace(region_block(PairRegion::A, p), region_block(PairRegion::D, p)));
            break;
        case PairRegion::C:
            blocks.push_back(larger_trace(region_block(PairRegion::A, p), region_block(PairRegion::H, p)));
            break;
        case PairRegion::F:
            blocks.push_back(larger_trace(region_block(PairRegion::E, p), region_block(PairRegion::H, p)));
            break;
        case PairRegion::G:
            blocks.push_back(larger_trace(region_block(PairRegion::D, p), region_block(PairRegion::E, p)));
            break;
        default:
            blocks.push_back(region_block(r, p));
            break;
        }
    }
    return blocks;
}

/// grad_zz J + mu * penalty_hessian + sum_i u_i grad_zz h_i.
inline Mat lagrangian_hessian(const MpccProblem &problem, const Vec &z, const Vec &u, double mu,
                              const GapParams &p) {
    Mat hess = problem.cost_hessian(z);
    const auto blocks = penalty_hessian(problem.lambda_part(z), problem.eta_part(z), p);
    const Index lo = problem.lambda_offset(), eo = problem.eta_offset();
    for (Index i = 0; i < problem.n_lambda; ++i) {
        const auto &blk = blocks[static_cast<std::size_t>(i)];
        hess(lo + i, lo + i) += mu * blk(0, 0);
        hess(lo + i, eo + i) += mu * blk(0, 1);
        hess(eo + i, lo + i) += mu * blk(1, 0);
        hess(eo + i, eo + i) += mu * blk(1, 1);
    }
    if (problem.n_h > 0 && problem.constraint_hessians) {
        const auto hh = problem.constraint_hessians(z);
        for (Index j = 0; j < problem.n_h && j < static_cast<Index>(hh.size()); ++j)
            hess += u[j] * hh[static_cast<std::size_t>(j)];
    }
    return hess;
}

/// Least-squares multiplier: argmin_u |grad + jac^T u|_2.
inline Vec least_squares_multiplier(const Mat &jac, const Vec &grad) {
    if (jac.rows() == 0)
        return Vec(0);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(jac.transpose());
    return cod.solve(-grad);
}

inline double merit_value(const MpccProblem &problem, const Vec &z, double mu, const GapParams &p,
                          double rho) {
    double m = problem.cost(z) + mu * phi_ab(problem.lambda_part(z), problem.eta_part(z), p);
    if (problem.n_h > 0)
        m += rho * problem.constraints(z).lpNorm<1>();
    return m;
}

namespace detail {

struct Curvature {
    double min_eigenvalue = 0.0;
    Vec direction; ///< unit vector in z-space, in ker(jac)
};

inline Curvature reduced_curvature(const Mat &hess, const Mat &basis) {
    Curvature c;
    if (basis.cols() == 0) {
        c.direction = Vec::Zero(hess.rows());
        return c;
    }
    const Mat reduced = basis.transpose() * hess * basis;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (reduced + reduced.transpose()));
    c.min_eigenvalue = es.eigenvalues()[0];
    c.direction = basis * es.eigenvectors().col(0);
    return c;
}

inline double curvature_threshold(const Mat &hess) {
    return 1e-10 * std::max(1.0, hess.cwiseAbs().maxCoeff());
}

} // namespace detail

inline KktPoint solve_pgap(const MpccProblem &problem, double mu, const Vec &z0, const Vec &u0,
                           const InnerOptions &opts = {}, const GapParams &p = {}) {
    opts.validate();
    if (!(mu > 0.0))
        throw std::invalid_argument("solve_pgap: mu must be positive");
    problem.check_point(z0);
    if (u0.size() != 0)
        detail::require_same_size(u0.size(), problem.n_h, "solve_pgap multipliers");

    const Index n = problem.dim();
    const Index m = problem.n_h;
    KktPoint out;
    out.z = z0;
    out.u = u0.size() == m ? u0 : Vec::Zero(m);
    double rho = opts.merit_rho > 0.0 ? opts.merit_rho : 10.0 * (1.0 + detail::inf_norm(out.u));

    auto merit = [&](const Vec &z) { return merit_value(problem, z, mu, p, rho); };

    for (int it = 0; it < opts.max_iter; ++it) {
        out.iterations = it;
        Vec &z = out.z;
        const Vec grad = problem.cost_gradient(z) + penalty_gradient(problem, z, mu, p);
        const Mat jac = constraint_jacobian_or_empty(problem, z);
        const Vec h = m > 0 ? problem.constraints(z) : Vec(0);
        out.u = least_squares_multiplier(jac, grad);
        out.residual = kkt_residual(problem, z, out.u, mu, p);

        const Mat hess = lagrangian_hessian(problem, z, out.u, mu, p);
        const Mat basis = kernel_basis(jac, n);
        const double nc_threshold = detail::curvature_threshold(hess);

        if (out.residual <= opts.tol_kkt) {
            // Stationary: leave only if the frozen model shows negative curvature.
            const detail::Curvature curv = detail::reduced_curvature(hess, basis);
            if (curv.min_eigenvalue >= -nc_threshold) {
                out.status = KktStatus::converged;
                return out;
            }
            Vec dir = curv.direction;
            if (grad.dot(dir) > 0.0)
                dir = -dir;
            const double m0 = merit(z);
            const double model_drop = 0.5 * std::abs(curv.min_eigenvalue);
            double t = 1.0;
            bool moved = false;
            for (int k = 0; k < 60; ++k, t *= opts.ls_beta) {
                const double mt = merit(z + t * dir);
                if (mt < m0 - opts.ls_sigma * model_drop * t * t) {
                    out.steps.push_back({m0, mt, grad.dot(dir), t, 0.0, true});
                    z += t * dir;
                    moved = true;
                    break;
                }
            }
            if (!moved) {
                out.status = KktStatus::converged;
                out.message = "negative curvature without merit decrease";
                return out;
            }
            continue;
        }

        // Inertia correction on the reduced Hessian.
        double tau = 0.0;
        for (;;) {
            if (basis.cols() == 0)
                break;
            const Mat reduced = basis.transpose() * (hess + tau * Mat::Identity(n, n)) * basis;
            Eigen::LLT<Mat> llt(0.5 * (reduced + reduced.transpose()));
            if (llt.info() == Eigen::Success)
                break;
            tau = tau == 0.0 ? opts.reg_min : 2.0 * tau;
            if (tau > 1e20) {
                out.status = KktStatus::linalg_failure;
                out.message = "inertia correction did not terminate";
                return out;
            }
        }

        Mat kkt = Mat::Zero(n + m, n + m);
        kkt.topLeftCorner(n, n) = hess + tau * Mat::Identity(n, n);
        if (m > 0) {
            kkt.topRightCorner(n, m) = jac.transpose();
            kkt.bottomLeftCorner(m, n) = jac;
        }
        Vec rhs(n + m);
        rhs.head(n) = -grad;
        if (m > 0)
            rhs.tail(m) = -h;
        Eigen::FullPivLU<Mat> lu(kkt);
        if (!lu.isInvertible()) {
            out.status = KktStatus::linalg_failure;
            out.message = "singular regularized KKT matrix";
            return out;
        }
        const Vec sol = lu.solve(rhs);
        Vec dir = sol.head(n);
        const Vec u_plus = sol.tail(m);

        bool used_nc = false;
        if (tau > 0.0) {
            const detail::Curvature curv = detail::reduced_curvature(hess, basis);
            if (curv.min_eigenvalue < -nc_threshold) {
                Vec v = curv.direction;
                if (grad.dot(v) > 0.0)
                    v = -v;
                dir += v;
                used_nc = true;
            }
        }

        const double h_l1 = m > 0 ? h.lpNorm<1>() : 0.0;
        if (h_l1 > 0.0) {
            const Mat hreg = hess + tau * Mat::Identity(n, n);
            const double curv_term = std::max(0.0, 0.5 * dir.dot(hreg * dir));
            const double rho_req = (grad.dot(dir) + curv_term) / (0.5 * h_l1);
            rho = std::max({rho, rho_req + 1.0, detail::inf_norm(u_plus) + 1.0});
        }
        const double predicted = grad.dot(dir) - rho * h_l1;
        const double m0 = merit(z);

        double t = 1.0;
        double mt = merit(z + dir);
        int backtracks = 0;
        while (!(mt <= m0 + opts.ls_sigma * t * predicted)) {
            if (++backtracks > 80 || predicted >= 0.0) {
                out.status = KktStatus::max_iter;
                out.message = "line search failed";
                return out;
            }
            t *= opts.ls_beta;
            mt = merit(z + t * dir);
        }

        // A regularized model that accepts its full step may be unbounded
        // below; follow the ray while the merit keeps falling.
        if (tau > 0.0 && backtracks == 0) {
            for (int k = 0; k < 60 && mt > opts.divergence_floor; ++k) {
                const double m2 = merit(z + 2.0 * t * dir);
                if (!(m2 < mt) || !(m2 <= m0 + opts.ls_sigma * 2.0 * t * predicted))
                    break;
                t *= 2.0;
                mt = m2;
            }
        }

        out.steps.push_back({m0, mt, predicted, t, tau, used_nc});
        z += t * dir;
        if (!std::isfinite(mt) || mt < opts.divergence_floor) {
            out.status = KktStatus::diverged;
            out.message = "merit function unbounded below";
            out.iterations = it + 1;
            return out;
        }
    }

    out.iterations = opts.max_iter;
    const Vec grad = problem.cost_gradient(out.z) + penalty_gradient(problem, out.z, mu, p);
    out.u = least_squares_multiplier(constraint_jacobian_or_empty(problem, out.z), grad);
    out.residual = kkt_residual(problem, out.z, out.u, mu, p);
    out.status = out.residual <= opts.tol_kkt ? KktStatus::converged : KktStatus::max_iter;
    return out;
}

/// Plain semismooth Newton on the KKT equations, no regularization and no
/// line search. Converges to nearby KKT points of any inertia, including the
/// saddles solve_pgap steers away from.
inline KktPoint locate_kkt_point(const MpccProblem &problem, double mu, const Vec &z0,
                                 const GapParams &p = {}, double tol = 1e-12, int max_iter = 50) {
    problem.check_point(z0);
    const Index n = problem.dim(), m = problem.n_h;
    KktPoint out;
    out.z = z0;
    out.u = Vec::Zero(m);
    for (int it = 0; it <= max_iter; ++it) {
        out.iterations = it;
        const Vec grad = problem.cost_gradient(out.z) + penalty_gradient(problem, out.z, mu, p);
        const Mat jac = constraint_jacobian_or_empty(problem, out.z);
        if (it == 0)
            out.u = least_squares_multiplier(jac, grad);
        out.residual = kkt_residual(problem, out.z, out.u, mu, p);
        if (out.residual <= tol) {
            out.status = KktStatus::converged;
            return out;
        }
        if (it == max_iter)
            break;
        Mat kkt = Mat::Zero(n + m, n + m);
        kkt.topLeftCorner(n, n) = lagrangian_hessian(problem, out.z, out.u, mu, p);
        Vec rhs(n + m);
        rhs.head(n) = -(grad + jac.transpose() * out.u);
        if (m > 0) {
            kkt.topRightCorner(n, m) = jac.transpose();
            kkt.bottomLeftCorner(m, n) = jac;
            rhs.tail(m) = -problem.constraints(out.z);
        }
        Eigen::FullPivLU<Mat> lu(kkt);
        if (!lu.isInvertible()) {
            out.status = KktStatus::linalg_failure;
            out.message = "singular KKT matrix";
            return out;
        }
        const Vec step = lu.solve(rhs);
        out.z += step.head(n);
        out.u += step.tail(m);
    }
    out.status = KktStatus::max_iter;
    return out;
}

} // namespace gapmpcc
