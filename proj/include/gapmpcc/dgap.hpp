#pragma once

// D-gap penalty function for the complementarity set 0 <= lambda _|_ eta >= 0.
//
//   phi^c(l, e)  = 1/(2c) (|e|^2 - |max(0, e - c l)|^2)
//   phi^ab       = phi^a - phi^b,  b > a > 0
//   delta^ab     = scalar summand, phi^ab(l, e) = sum_i delta^ab(l_i, e_i)
//
// delta^ab is piecewise quadratic. The lines e = a l and e = b l split the
// (l, e) plane into the open regions A, D, E, H and the boundary rays B, C,
// F, G; the region tag drives every second-order quantity below.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "gapmpcc/types.hpp"

namespace gapmpcc {

/// The constants (a, b) of the D-gap function. Construction enforces b > a > 0.
class GapParams {
  public:
    GapParams() = default;
    GapParams(double a, double b) : a_(a), b_(b) {
        if (!(a > 0.0) || !(b > a) || !std::isfinite(b))
            throw std::invalid_argument("GapParams: require b > a > 0 (got a=" + std::to_string(a) +
                                        ", b=" + std::to_string(b) + ")");
    }

    double a() const { return a_; }
    double b() const { return b_; }

    friend bool operator==(const GapParams &, const GapParams &) = default;

  private:
    double a_ = 1.0;
    double b_ = 2.0;
};

/// Relative band used to decide that a point lies on e = a l or e = b l.
inline constexpr double kDefaultRegionTol = 1e-10;

enum class PairRegion {
    A, ///< e > b l, e > a l
    B, ///< e = b l, e > a l
    C, ///< e > b l, e = a l
    D, ///< e < b l, e > a l
    E, ///< e < b l, e < a l
    F, ///< e = b l, e < a l
    G, ///< e < b l, e = a l
    H, ///< e > b l, e < a l
};

inline const char *to_string(PairRegion r) {
    constexpr const char *names[] = {"A", "B", "C", "D", "E", "F", "G", "H"};
    return names[static_cast<int>(r)];
}

inline std::ostream &operator<<(std::ostream &os, PairRegion r) { return os << to_string(r); }

struct GapGradient {
    Vec lambda;
    Vec eta;
};

struct GapEval {
    double value = 0.0;
    Vec grad_lambda;
    Vec grad_eta;
};

/// Partial derivatives of delta^ab with respect to (lambda_i, eta_i).
struct PairGradient {
    double lambda = 0.0;
    double eta = 0.0;
};

inline double phi_c(const VecRef &lambda, const VecRef &eta, double c) {
    detail::require_same_size(lambda.size(), eta.size(), "phi_c");
    if (!(c > 0.0))
        throw std::invalid_argument("phi_c: parameter c must be positive");
    const double shifted = (eta - c * lambda).cwiseMax(0.0).squaredNorm();
    return (eta.squaredNorm() - shifted) / (2.0 * c);
}

inline double phi_ab(const VecRef &lambda, const VecRef &eta, const GapParams &p = {}) {
    return phi_c(lambda, eta, p.a()) - phi_c(lambda, eta, p.b());
}

/// Closed-form gradient of phi^ab in vector form.
inline GapGradient grad_phi_ab(const VecRef &lambda, const VecRef &eta, const GapParams &p = {}) {
    detail::require_same_size(lambda.size(), eta.size(), "grad_phi_ab");
    const double a = p.a(), b = p.b();
    const Vec ma = (eta - a * lambda).cwiseMax(0.0);
    const Vec mb = (eta - b * lambda).cwiseMax(0.0);
    GapGradient g;
    g.lambda = ma - mb;
    g.eta = (1.0 / a - 1.0 / b) * eta - ma / a + mb / b;
    return g;
}

inline double delta_ab(double lambda, double eta, const GapParams &p = {}) {
    const double a = p.a(), b = p.b();
    const double ma = std::max(0.0, eta - a * lambda);
    const double mb = std::max(0.0, eta - b * lambda);
    return (b - a) / (2.0 * a * b) * eta * eta - ma * ma / (2.0 * a) + mb * mb / (2.0 * b);
}

inline GapEval eval_gap(const VecRef &lambda, const VecRef &eta, const GapParams &p = {}) {
    GapGradient g = grad_phi_ab(lambda, eta, p);
    return {phi_ab(lambda, eta, p), std::move(g.lambda), std::move(g.eta)};
}

/// Four-branch piecewise form of the scalar gradient. Branches share their
/// boundaries, so the non-strict comparisons here are exact.
inline PairGradient grad_delta(double lambda, double eta, const GapParams &p = {}) {
    const double a = p.a(), b = p.b();
    const double al = a * lambda, bl = b * lambda;
    if (eta >= bl && eta >= al)
        return {(b - a) * lambda, 0.0};
    if (eta <= bl && eta <= al)
        return {0.0, (1.0 / a - 1.0 / b) * eta};
    if (eta > al) // and eta < bl
        return {eta - al, (bl - eta) / b};
    return {bl - eta, (eta - al) / a}; // eta > bl, eta < al
}

namespace detail {

// -1, 0, +1 for the side of the line eta = c lambda, with a relative band.
inline int side_of_line(double lambda, double eta, double c, double tol) {
    const double gap = eta - c * lambda;
    const double scale = std::max({1.0, std::abs(lambda), std::abs(eta)});
    if (std::abs(gap) <= tol * scale)
        return 0;
    return gap > 0.0 ? 1 : -1;
}

} // namespace detail

/// Classify (lambda_i, eta_i) against the two kink lines. The corner where
/// both lines meet is tagged A.
inline PairRegion region_of(double lambda, double eta, const GapParams &p = {},
                            double tol = kDefaultRegionTol) {
    if (tol < 0.0)
        throw std::invalid_argument("region_of: tol must be nonnegative");
    const int sa = detail::side_of_line(lambda, eta, p.a(), tol);
    const int sb = detail::side_of_line(lambda, eta, p.b(), tol);
    if (sb > 0)
        return sa > 0 ? PairRegion::A : (sa == 0 ? PairRegion::C : PairRegion::H);
    if (sb == 0)
        return sa > 0 ? PairRegion::B : (sa == 0 ? PairRegion::A : PairRegion::F);
    return sa > 0 ? PairRegion::D : (sa == 0 ? PairRegion::G : PairRegion::E);
}

/// True when the point sits on both lines at once, i.e. at the origin up to tol.
inline bool is_corner(double lambda, double eta, const GapParams &p = {},
                      double tol = kDefaultRegionTol) {
    return detail::side_of_line(lambda, eta, p.a(), tol) == 0 &&
           detail::side_of_line(lambda, eta, p.b(), tol) == 0;
}

/// D^2(delta; d, d) - D(delta; d) at (lambda, eta) along d = (d_lambda, d_eta).
///
/// At the corner both max-terms are kinked at once; there the value is
///   (b-a)/(2ab) d_eta^2 - m_a + m_b,
/// which the single-line A formula does not reproduce.
inline double sod_diff(double lambda, double eta, double d_lambda, double d_eta,
                       const GapParams &p = {}, double tol = kDefaultRegionTol) {
    const double a = p.a(), b = p.b();
    const double ma_dir = std::max(0.0, d_eta - a * d_lambda);
    const double mb_dir = std::max(0.0, d_eta - b * d_lambda);
    const double m_a = ma_dir * ma_dir / (2.0 * a);
    const double m_b = mb_dir * mb_dir / (2.0 * b);
    const double dl2 = d_lambda * d_lambda, de2 = d_eta * d_eta;
    const double ga = d_eta - a * d_lambda, gb = d_eta - b * d_lambda;

    if (is_corner(lambda, eta, p, tol))
        return (b - a) / (2.0 * a * b) * de2 - m_a + m_b;

    switch (region_of(lambda, eta, p, tol)) {
    case PairRegion::A:
        return 0.5 * (b - a) * dl2;
    case PairRegion::B:
        return 0.5 * (b - a) * dl2 - gb * gb / (2.0 * b) + m_b;
    case PairRegion::C:
        return 0.5 * (b - a) * dl2 + ga * ga / (2.0 * a) - m_a;
    case PairRegion::D:
        return -0.5 * a * dl2 + d_lambda * d_eta - de2 / (2.0 * b);
    case PairRegion::E:
        return (b - a) / (2.0 * a * b) * de2;
    case PairRegion::F:
        return (b - a) / (2.0 * a * b) * de2 + m_b;
    case PairRegion::G:
        return (b - a) / (2.0 * a * b) * de2 - m_a;
    case PairRegion::H:
        return 0.5 * b * dl2 - d_lambda * d_eta + de2 / (2.0 * a);
    }
    return 0.0; // unreachable
}

/// Second-order directional derivative D^2(delta; d, d). delta is C^1, so
/// D(delta; d) is the gradient product.
inline double sod_delta(double lambda, double eta, double d_lambda, double d_eta,
                        const GapParams &p = {}, double tol = kDefaultRegionTol) {
    const PairGradient g = grad_delta(lambda, eta, p);
    return sod_diff(lambda, eta, d_lambda, d_eta, p, tol) + g.lambda * d_lambda + g.eta * d_eta;
}

/// D^2(f; d, d) for f = max(g, 0)^2 with g affine, given g(x) and grad g(x) d.
inline double maxsq_sod(double g_val, double g_dir) {
    if (g_val > 0.0)
        return 2.0 * g_val * g_dir + g_dir * g_dir;
    if (g_val == 0.0) {
        const double m = std::max(0.0, g_dir);
        return m * m;
    }
    return 0.0;
}

} // namespace gapmpcc
