#pragma once

// Numeric first- and second-order directional derivatives, taken straight
// from their limit definitions:
//
//   D(f; d)      = lim_{t->0+} (f(x + t d) - f(x)) / t
//   D^2(f; d, p) = lim_{t->0+} (f(x + t d + t^2 p) - f(x) - t D(f; d)) / t^2
//
// These are test oracles for the closed-form calculus in dgap.hpp and must
// not call into it.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gapmpcc/types.hpp"

namespace gapmpcc {

using ScalarField = std::function<double(const Vec &)>;

enum class Extrapolation { none, richardson };

struct LimitSchedule {
    std::vector<double> t_values;
    Extrapolation extrapolation = Extrapolation::richardson;

    /// t_k = t0 * 2^-k, k = 0..k_max.
    static LimitSchedule geometric(double t0 = 0.1, int k_max = 12,
                                   Extrapolation e = Extrapolation::richardson) {
        LimitSchedule s;
        s.extrapolation = e;
        for (int k = 0; k <= k_max; ++k)
            s.t_values.push_back(std::ldexp(t0, -k));
        return s;
    }

    void validate() const {
        if (t_values.empty())
            throw std::invalid_argument("LimitSchedule: empty schedule");
        for (std::size_t i = 0; i < t_values.size(); ++i) {
            if (!(t_values[i] > 0.0))
                throw std::invalid_argument("LimitSchedule: t values must be positive");
            if (i > 0 && !(t_values[i] < t_values[i - 1]))
                throw std::invalid_argument("LimitSchedule: t values must be strictly decreasing");
        }
        if (extrapolation == Extrapolation::richardson && t_values.size() < 3)
            throw std::invalid_argument("LimitSchedule: richardson needs at least 3 points");
    }
};

struct LimitEstimate {
    double estimate = 0.0;
    double error = 0.0;
};

namespace detail {

inline double checked_eval(const ScalarField &f, const Vec &x) {
    const double v = f(x);
    if (!std::isfinite(v))
        throw std::domain_error("directional derivative: non-finite function value");
    return v;
}

// Value at t = 0 of the quadratic through (t0,q0), (t1,q1), (t2,q2).
inline double extrapolate_to_zero(double t0, double q0, double t1, double q1, double t2, double q2) {
    // Lagrange basis evaluated at 0.
    const double l0 = (t1 * t2) / ((t0 - t1) * (t0 - t2));
    const double l1 = (t0 * t2) / ((t1 - t0) * (t1 - t2));
    const double l2 = (t0 * t1) / ((t2 - t0) * (t2 - t1));
    return l0 * q0 + l1 * q1 + l2 * q2;
}

inline LimitEstimate reduce_quotients(const std::vector<double> &t, const std::vector<double> &q,
                                      Extrapolation e) {
    const std::size_t n = q.size();
    if (e == Extrapolation::none) {
        const double err = n >= 2 ? std::abs(q[n - 1] - q[n - 2]) : 0.0;
        return {q[n - 1], err};
    }
    auto rich = [&](std::size_t last) {
        return extrapolate_to_zero(t[last - 2], q[last - 2], t[last - 1], q[last - 1], t[last], q[last]);
    };
    const double best = rich(n - 1);
    const double prev = n >= 4 ? rich(n - 2) : q[n - 1];
    return {best, std::abs(best - prev)};
}

} // namespace detail

inline LimitEstimate dir1_limit(const ScalarField &f, const Vec &x, const Vec &d,
                                const LimitSchedule &s = LimitSchedule::geometric()) {
    detail::require_same_size(x.size(), d.size(), "dir1_limit");
    s.validate();
    const double f0 = detail::checked_eval(f, x);
    std::vector<double> q;
    q.reserve(s.t_values.size());
    for (double t : s.t_values)
        q.push_back((detail::checked_eval(f, x + t * d) - f0) / t);
    return detail::reduce_quotients(s.t_values, q, s.extrapolation);
}

/// Second-order directional derivative in directions (d, p); d1 = D(f; d).
inline LimitEstimate dir2_limit(const ScalarField &f, const Vec &x, const Vec &d, const Vec &p,
                                double d1, const LimitSchedule &s = LimitSchedule::geometric()) {
    detail::require_same_size(x.size(), d.size(), "dir2_limit");
    detail::require_same_size(x.size(), p.size(), "dir2_limit");
    s.validate();
    const double f0 = detail::checked_eval(f, x);
    std::vector<double> q;
    q.reserve(s.t_values.size());
    for (double t : s.t_values) {
        const Vec xt = x + t * d + (t * t) * p;
        q.push_back((detail::checked_eval(f, xt) - f0 - t * d1) / (t * t));
    }
    return detail::reduce_quotients(s.t_values, q, s.extrapolation);
}

/// Central-difference gradient.
inline Vec grad_fd(const ScalarField &f, const Vec &x, double h = 1e-6) {
    if (!(h > 0.0))
        throw std::invalid_argument("grad_fd: step must be positive");
    Vec g(x.size());
    Vec xp = x;
    for (Index i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        const double fp = detail::checked_eval(f, xp);
        xp[i] = x[i] - h;
        const double fm = detail::checked_eval(f, xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace gapmpcc
