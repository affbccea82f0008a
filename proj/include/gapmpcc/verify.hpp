#pragma once

// Self-check suite behind `gapmpcc verify`. Each property samples with its
// own generator seeded from the run seed and reports pass/fail with the worst
// observed deviation.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gapmpcc/dderiv.hpp"
#include "gapmpcc/dgap.hpp"
#include "gapmpcc/outer.hpp"
#include "gapmpcc/problems.hpp"
#include "gapmpcc/report.hpp"

namespace gapmpcc {

struct VerifyOptions {
    std::uint64_t seed = 0;
    double fd_step = 1e-6;
    int samples = 10000;
    GapParams gap;
};

struct PropertyResult {
    std::string name;
    bool passed = false;
    double worst = 0.0; ///< largest violation or error seen
    std::string detail;
};

namespace detail {

inline std::mt19937_64 property_rng(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{seed, salt};
    return std::mt19937_64(seq);
}

inline double sample_uniform(std::mt19937_64 &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Distance of (l, e) from the two kink lines, scaled like region_of.
inline double kink_margin(double l, double e, const GapParams &p) {
    const double scale = std::max({1.0, std::abs(l), std::abs(e)});
    return std::min(std::abs(e - p.a() * l), std::abs(e - p.b() * l)) / scale;
}

// A point strictly inside region r, at least 5% away from the kink lines.
inline std::pair<double, double> sample_in_region(PairRegion r, const GapParams &p, std::mt19937_64 &rng) {
    for (;;) {
        const double l = sample_uniform(rng, -3.0, 3.0), e = sample_uniform(rng, -3.0, 3.0);
        if (region_of(l, e, p) == r && kink_margin(l, e, p) > 0.05)
            return {l, e};
    }
}

// A point on the ray of boundary region r.
inline std::pair<double, double> sample_on_ray(PairRegion r, const GapParams &p, std::mt19937_64 &rng) {
    const double s = sample_uniform(rng, 0.2, 3.0);
    switch (r) {
    case PairRegion::B: return {s, p.b() * s};   // eta = b lambda > a lambda
    case PairRegion::C: return {-s, -p.a() * s}; // eta = a lambda > b lambda
    case PairRegion::F: return {-s, -p.b() * s}; // eta = b lambda < a lambda
    case PairRegion::G: return {s, p.a() * s};   // eta = a lambda < b lambda
    default: return {0.0, 0.0};
    }
}

} // namespace detail

inline PropertyResult verify_gap_identities(const VerifyOptions &o) {
    PropertyResult res{"dgap nonnegative, zero on complementarity set", false, 0.0, {}};
    auto rng = detail::property_rng(o.seed, 1);
    double worst_neg = 0.0, worst_comp = 0.0;
    for (int s = 0; s < o.samples; ++s) {
        const Index n = (s % 2 == 0) ? 1 : 3;
        Vec l(n), e(n);
        for (Index i = 0; i < n; ++i) {
            l[i] = detail::sample_uniform(rng, -5.0, 5.0);
            e[i] = detail::sample_uniform(rng, -5.0, 5.0);
        }
        worst_neg = std::max(worst_neg, -phi_ab(l, e, o.gap));
        // Project onto the complementarity set.
        for (Index i = 0; i < n; ++i) {
            l[i] = std::abs(l[i]);
            e[i] = std::abs(e[i]);
            (l[i] < e[i] ? l[i] : e[i]) = 0.0;
        }
        worst_comp = std::max(worst_comp, std::abs(phi_ab(l, e, o.gap)));
    }
    res.worst = std::max(worst_neg, worst_comp);
    res.passed = worst_neg <= 1e-12 && worst_comp <= 1e-12;
    res.detail = "max(-phi)=" + format_short(worst_neg) + " max|phi| on set=" + format_short(worst_comp);
    return res;
}

inline PropertyResult verify_gradient(const VerifyOptions &o) {
    PropertyResult res{"gradient vs central differences", false, 0.0, {}};
    auto rng = detail::property_rng(o.seed, 2);
    double worst = 0.0;
    int checked = 0;
    while (checked < std::max(1, o.samples / 10)) {
        const Index n = (checked % 2 == 0) ? 1 : 3;
        Vec z(2 * n);
        for (Index i = 0; i < z.size(); ++i)
            z[i] = detail::sample_uniform(rng, -5.0, 5.0);
        bool off_kink = true;
        for (Index i = 0; i < n; ++i)
            off_kink = off_kink && detail::kink_margin(z[i], z[n + i], o.gap) > 1e-3;
        if (!off_kink)
            continue;
        ++checked;
        const ScalarField f = [&](const Vec &x) { return phi_ab(x.head(n), x.tail(n), o.gap); };
        const Vec fd = grad_fd(f, z, o.fd_step);
        const GapGradient g = grad_phi_ab(z.head(n), z.tail(n), o.gap);
        Vec ga(2 * n);
        ga << g.lambda, g.eta;
        worst = std::max(worst, (ga - fd).cwiseAbs().maxCoeff() / std::max(1.0, detail::inf_norm(ga)));
    }
    res.worst = worst;
    res.passed = worst <= 1e-5;
    res.detail = "max relative error=" + format_short(worst) + " (fd step " + format_short(o.fd_step) + ")";
    return res;
}

/// sod_diff against D^2(delta; d, 0) and sod_delta against D^2(delta; d, d)
/// from the limit definitions, in every region including the kink rays.
inline PropertyResult verify_second_order(const VerifyOptions &o) {
    PropertyResult res{"second-order formula vs limit definition", false, 0.0, {}};
    auto rng = detail::property_rng(o.seed, 3);
    // Stops at t ~ 4e-4: the paths stay inside one quadratic piece well
    // before that, and smaller t only adds cancellation error.
    const LimitSchedule sched = LimitSchedule::geometric(0.1, 8);
    const ScalarField f = [&](const Vec &x) { return delta_ab(x[0], x[1], o.gap); };
    double worst = 0.0;
    const PairRegion regions[] = {PairRegion::A, PairRegion::B, PairRegion::C, PairRegion::D,
                                  PairRegion::E, PairRegion::F, PairRegion::G, PairRegion::H};
    for (PairRegion r : regions) {
        for (int s = 0; s < 8; ++s) {
            const bool ray = r == PairRegion::B || r == PairRegion::C || r == PairRegion::F || r == PairRegion::G;
            const auto [l, e] = ray ? detail::sample_on_ray(r, o.gap, rng) : detail::sample_in_region(r, o.gap, rng);
            Vec x(2), d(2);
            x << l, e;
            d << detail::sample_uniform(rng, -1.0, 1.0), detail::sample_uniform(rng, -1.0, 1.0);
            const double d1 = dir1_limit(f, x, d, sched).estimate;
            const double lim0 = dir2_limit(f, x, d, Vec::Zero(2), d1, sched).estimate;
            const double limd = dir2_limit(f, x, d, d, d1, sched).estimate;
            worst = std::max(worst, std::abs(lim0 - sod_diff(l, e, d[0], d[1], o.gap)));
            worst = std::max(worst, std::abs(limd - sod_delta(l, e, d[0], d[1], o.gap)));
        }
    }
    res.worst = worst;
    res.passed = worst <= 1e-4;
    res.detail = "max abs error=" + format_short(worst);
    return res;
}

inline PropertyResult verify_sign_regions(const VerifyOptions &o) {
    PropertyResult res{"multiplier sign pattern per region", false, 0.0, {}};
    auto rng = detail::property_rng(o.seed, 4);
    const double mu = 10.0;
    int bad = 0;
    double worst_product = 0.0;
    for (int s = 0; s < o.samples; ++s) {
        const double l = detail::sample_uniform(rng, -5.0, 5.0), e = detail::sample_uniform(rng, -5.0, 5.0);
        const PairGradient g = grad_delta(l, e, o.gap);
        worst_product = std::max(worst_product, -(g.lambda * g.eta));
    }
    // (v, w) = -mu grad delta in the six open sign regions.
    struct Pattern {
        PairRegion region;
        int lambda_sign, eta_sign; // sign constraint on the sample
        int v, w;                  // expected signs, 0 meaning exactly zero
    };
    const Pattern patterns[] = {
        {PairRegion::A, 1, 0, -1, 0},  {PairRegion::A, -1, 0, 1, 0}, {PairRegion::D, 0, 0, -1, -1},
        {PairRegion::H, 0, 0, 1, 1},   {PairRegion::E, 0, 1, 0, -1}, {PairRegion::E, 0, -1, 0, 1},
    };
    auto sign_ok = [](double x, int expect) {
        return expect == 0 ? x == 0.0 : (expect > 0 ? x > 0.0 : x < 0.0);
    };
    for (const auto &pt : patterns) {
        int found = 0;
        while (found < 10) {
            const auto [l, e] = detail::sample_in_region(pt.region, o.gap, rng);
            if ((pt.lambda_sign != 0 && l * pt.lambda_sign <= 0.0) || (pt.eta_sign != 0 && e * pt.eta_sign <= 0.0))
                continue;
            ++found;
            const PairGradient g = grad_delta(l, e, o.gap);
            if (!sign_ok(-mu * g.lambda, pt.v) || !sign_ok(-mu * g.eta, pt.w))
                ++bad;
        }
    }
    res.worst = worst_product;
    res.passed = bad == 0 && worst_product <= 0.0;
    res.detail = "pattern violations=" + std::to_string(bad) + " min product=" + format_short(-worst_product);
    return res;
}

inline PropertyResult verify_oracle_equivalence(const VerifyOptions &o) {
    PropertyResult res{"penalty method matches branch enumeration on builtins", false, 0.0, {}};
    auto rng = detail::property_rng(o.seed, 5);
    double worst = 0.0;
    std::string detail_text;
    for (const auto &name : builtin_names()) {
        if (!builtin_bounded(name))
            continue;
        const QuadraticMpccSpec spec = builtin_spec(name);
        const MpccProblem problem = make_problem(spec);
        Vec z0(problem.dim());
        for (Index i = 0; i < z0.size(); ++i)
            z0[i] = detail::sample_uniform(rng, 0.0, 2.0);
        OuterOptions opts;
        opts.gap = o.gap;
        opts.seed = o.seed;
        const SolveReport rep = solve_mpcc(problem, z0, opts);
        const BranchSolution oracle = brute_force_branch_solve(spec);
        const double err = std::abs(rep.final_cost - oracle.J);
        if (detail_text.empty() || err > worst)
            detail_text = name + " |J - J*|=" + format_short(err);
        worst = std::max(worst, err);
    }
    res.worst = worst;
    res.passed = worst <= 1e-6;
    res.detail = "worst " + detail_text;
    return res;
}

inline std::vector<PropertyResult> run_property_suite(const VerifyOptions &o = {}) {
    if (!(o.fd_step > 0.0))
        throw std::invalid_argument("verify: fd step must be positive");
    if (o.samples < 1)
        throw std::invalid_argument("verify: samples must be positive");
    return {verify_gap_identities(o), verify_gradient(o), verify_second_order(o), verify_sign_regions(o),
            verify_oracle_equivalence(o)};
}

} // namespace gapmpcc
