#pragma once

// Command-line front end: `solve`, `check` and `verify`. run_cli never lets an
// exception escape; every path ends in one of the documented exit codes.

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gapmpcc/outer.hpp"
#include "gapmpcc/problems.hpp"
#include "gapmpcc/report.hpp"
#include "gapmpcc/stationarity.hpp"
#include "gapmpcc/verify.hpp"

namespace gapmpcc {

namespace exit_code {
inline constexpr int strong = 0;
inline constexpr int not_strong = 2; // clarke or weak (solve), anything short of strong (check)
inline constexpr int stalled = 3;
inline constexpr int input_error = 4;
inline constexpr int inner_failure = 5;
inline constexpr int verify_failed = 1;
} // namespace exit_code

enum class Command { solve, check, verify };

/// Raised for bad flags, files or points; maps to exit code 4.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    Command command = Command::solve;
    std::optional<std::string> problem_path;
    std::optional<std::string> builtin_name;
    double a = 1.0, b = 2.0;
    OuterOptions outer;
    std::optional<std::string> z0;
    std::optional<std::string> json_path;
    std::uint64_t seed = 0;

    // check
    std::optional<std::string> point_path;
    std::optional<std::string> z, u, v, w;
    std::optional<double> mu;

    // verify
    double fd_step = 1e-6;
    int samples = 10000;

    void validate() const {
        if (command != Command::verify && (problem_path.has_value() == builtin_name.has_value()))
            throw InputError("exactly one of --problem and --builtin is required");
    }
};

namespace detail {

inline Vec parse_list(const std::string &text, const std::string &flag) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos)
                throw std::invalid_argument(item);
        } catch (const std::exception &) {
            throw InputError(flag + ": cannot parse '" + item + "' as a number");
        }
    }
    return Eigen::Map<Vec>(vals.data(), static_cast<Index>(vals.size()));
}

inline Vec sized(const Vec &v, Index n, const std::string &what) {
    if (v.size() != n)
        throw InputError(what + ": expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
    return v;
}

inline MpccProblem load_source(const RunConfig &cfg) {
    cfg.validate();
    try {
        return cfg.builtin_name ? builtin(*cfg.builtin_name) : load_quadratic(*cfg.problem_path);
    } catch (const ProblemFormatError &e) {
        throw InputError(e.what());
    }
}

inline GapParams gap_of(const RunConfig &cfg) {
    try {
        return GapParams(cfg.a, cfg.b);
    } catch (const std::invalid_argument &e) {
        throw InputError(e.what());
    }
}

inline void write_json(const std::string &path, const nlohmann::json &j) {
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace detail

inline int cmd_solve(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
    MpccProblem problem;
    OuterOptions opts = cfg.outer;
    Vec z0;
    try {
        problem = detail::load_source(cfg);
        opts.gap = detail::gap_of(cfg);
        opts.seed = cfg.seed;
        try {
            opts.validate();
        } catch (const std::invalid_argument &e) {
            throw InputError(e.what());
        }
        z0 = cfg.z0 ? detail::sized(detail::parse_list(*cfg.z0, "--z0"), problem.dim(), "--z0")
                    : Vec::Zero(problem.dim());
    } catch (const InputError &e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }

    SolveReport rep;
    try {
        rep = solve_mpcc(problem, z0, opts);
    } catch (const std::exception &e) {
        err << "error: solve failed: " << e.what() << '\n';
        return exit_code::inner_failure;
    }

    out << "problem: " << rep.problem << "  (a=" << format_double(rep.gap.a()) << ", b=" << format_double(rep.gap.b())
        << ")\n";
    print_iteration_table(out, rep.records);
    out << '\n';
    print_certificate(out, rep.final_certificate);
    out << "status: " << to_string(rep.status) << '\n';
    if (!rep.message.empty())
        out << "message: " << rep.message << '\n';
    out << "J: " << format_double(rep.final_cost) << '\n'
        << "z: " << format_vector(rep.limit.z) << '\n'
        << "u: " << format_vector(rep.limit.u) << '\n'
        << "v: " << format_vector(rep.limit.v) << '\n'
        << "w: " << format_vector(rep.limit.w) << '\n';

    if (cfg.json_path) {
        try {
            detail::write_json(*cfg.json_path, report_json(rep));
        } catch (const InputError &e) {
            err << "error: " << e.what() << '\n';
            return exit_code::input_error;
        }
    }

    switch (rep.status) {
    case SolveStatus::strong: return exit_code::strong;
    case SolveStatus::clarke:
    case SolveStatus::weak: return exit_code::not_strong;
    case SolveStatus::infeasible_stall:
    case SolveStatus::max_outer: return exit_code::stalled;
    case SolveStatus::inner_failure: return exit_code::inner_failure;
    }
    return exit_code::inner_failure;
}

/// Point to grade: z and the multipliers, recovered where not supplied.
struct CheckPoint {
    Vec z, u, v, w;
    std::optional<double> mu;
};

inline CheckPoint resolve_check_point(const MpccProblem &problem, const RunConfig &cfg, const GapParams &gap) {
    std::optional<Vec> z, u, v, w;
    std::optional<double> mu = cfg.mu;
    if (cfg.point_path) {
        std::ifstream in(*cfg.point_path);
        if (!in)
            throw InputError("cannot open point file " + *cfg.point_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error &e) {
            throw InputError(*cfg.point_path + ": " + e.what());
        }
        if (!j.is_object())
            throw InputError(*cfg.point_path + ": top level must be an object");
        for (const auto &item : j.items()) {
            const std::string &k = item.key();
            if (k == "mu") {
                if (!item.value().is_number())
                    throw InputError(*cfg.point_path + ": mu: expected a number");
                mu = item.value().get<double>();
                continue;
            }
            std::optional<Vec> *slot = k == "z" ? &z : k == "u" ? &u : k == "v" ? &v : k == "w" ? &w : nullptr;
            if (!slot)
                throw InputError(*cfg.point_path + ": " + k + ": unknown key");
            try {
                const auto vals = item.value().get<std::vector<double>>();
                *slot = Eigen::Map<const Vec>(vals.data(), static_cast<Index>(vals.size()));
            } catch (const nlohmann::json::exception &) {
                throw InputError(*cfg.point_path + ": " + k + ": expected an array of numbers");
            }
        }
    }
    if (cfg.z)
        z = detail::parse_list(*cfg.z, "--z");
    if (cfg.u)
        u = detail::parse_list(*cfg.u, "--u");
    if (cfg.v)
        v = detail::parse_list(*cfg.v, "--v");
    if (cfg.w)
        w = detail::parse_list(*cfg.w, "--w");
    if (!z)
        throw InputError("check needs a point: --point FILE or --z");
    if (mu && !(*mu > 0.0))
        throw InputError("mu must be positive");

    CheckPoint cp;
    cp.mu = mu;
    cp.z = detail::sized(*z, problem.dim(), "z");
    if (u)
        cp.u = detail::sized(*u, problem.n_h, "u");
    if (v)
        cp.v = detail::sized(*v, problem.n_lambda, "v");
    if (w)
        cp.w = detail::sized(*w, problem.n_lambda, "w");
    if (u && v && w)
        return cp;

    // Missing multipliers: from the penalty gradient when mu is known,
    // otherwise a least-squares fit of the stationarity identity.
    Vec fu, fv, fw;
    if (mu) {
        std::tie(fv, fw) = recover_multipliers(problem, cp.z, *mu, gap);
        const Vec g = problem.cost_gradient(cp.z) + penalty_gradient(problem, cp.z, *mu, gap);
        fu = least_squares_multiplier(constraint_jacobian_or_empty(problem, cp.z), g);
    } else {
        const MultiplierFit fit = fit_multipliers(problem, cp.z, index_sets(problem, cp.z));
        fu = fit.u;
        fv = fit.v;
        fw = fit.w;
    }
    if (!u)
        cp.u = fu;
    if (!v)
        cp.v = fv;
    if (!w)
        cp.w = fw;
    return cp;
}

inline int cmd_check(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
    MpccProblem problem;
    CheckPoint cp;
    GapParams gap;
    try {
        problem = detail::load_source(cfg);
        gap = detail::gap_of(cfg);
        cp = resolve_check_point(problem, cfg, gap);
        if (!(cfg.outer.tol_stationarity > 0.0))
            throw InputError("--tol must be positive");
    } catch (const InputError &e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }

    StationarityCertificate cert = classify(problem, cp.z, cp.u, cp.v, cp.w, cfg.outer.tol_stationarity);
    if (cp.mu) {
        const SecondOrderProbe probe =
            second_order_check(problem, cp.z, cp.u, *cp.mu, gap, cfg.outer.second_order_samples, cfg.seed);
        cert.second_order_min = probe.min_value;
    }
    out << "problem: " << problem.name << '\n'
        << "z: " << format_vector(cp.z) << '\n'
        << "u: " << format_vector(cp.u) << '\n'
        << "v: " << format_vector(cp.v) << '\n'
        << "w: " << format_vector(cp.w) << '\n';
    print_certificate(out, cert);
    if (cfg.json_path) {
        try {
            nlohmann::json j;
            j["problem"] = problem.name;
            j["gap"] = {{"a", gap.a()}, {"b", gap.b()}};
            j["final"] = certificate_json(cert, cp.z, cp.u, cp.v, cp.w);
            detail::write_json(*cfg.json_path, j);
        } catch (const InputError &e) {
            err << "error: " << e.what() << '\n';
            return exit_code::input_error;
        }
    }
    return cert.klass == StationarityClass::strong ? exit_code::strong : exit_code::not_strong;
}

inline int cmd_verify(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
    VerifyOptions o;
    o.seed = cfg.seed;
    o.fd_step = cfg.fd_step;
    o.samples = cfg.samples;
    std::vector<PropertyResult> results;
    try {
        o.gap = detail::gap_of(cfg);
        results = run_property_suite(o);
    } catch (const std::invalid_argument &e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    } catch (const InputError &e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }
    bool all = true;
    for (const auto &r : results) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        all = all && r.passed;
    }
    out << (all ? "all properties passed" : "some properties failed") << " (seed " << o.seed << ")\n";
    return all ? exit_code::strong : exit_code::verify_failed;
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"D-gap penalty solver for MPCCs with stationarity certificates", "gapmpcc"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_source = [&](CLI::App *sub) {
        auto *file = sub->add_option("--problem", cfg.problem_path, "Quadratic problem file (JSON)");
        auto *name = sub->add_option("--builtin", cfg.builtin_name, "Builtin instance name");
        file->excludes(name);
        sub->add_option("--a", cfg.a, "D-gap parameter a")->capture_default_str();
        sub->add_option("--b", cfg.b, "D-gap parameter b (> a)")->capture_default_str();
        sub->add_option("--json", cfg.json_path, "Write a JSON report here");
        sub->add_option("--seed", cfg.seed, "Seed for the second-order probes")->capture_default_str();
    };

    auto *solve = app.add_subcommand("solve", "Run the penalty method and certify the limit");
    add_source(solve);
    solve->add_option("--mu0", cfg.outer.mu0, "Initial penalty parameter")->capture_default_str();
    solve->add_option("--kappa", cfg.outer.kappa, "Penalty growth factor")->capture_default_str();
    solve->add_option("--tol-comp", cfg.outer.tol_comp, "Stop when the D-gap value drops below this")
        ->capture_default_str();
    solve->add_option("--tol-kkt", cfg.outer.inner.tol_kkt, "Inner KKT tolerance")->capture_default_str();
    solve->add_option("--max-outer", cfg.outer.max_outer, "Maximum penalty rounds")->capture_default_str();
    solve->add_option("--z0", cfg.z0, "Starting point, comma separated [x; lambda; eta]");

    auto *check = app.add_subcommand("check", "Grade a supplied point");
    add_source(check);
    check->add_option("--point", cfg.point_path, "JSON file with z and optionally u, v, w, mu");
    check->add_option("--z", cfg.z, "Point, comma separated");
    check->add_option("--u", cfg.u, "Equality multipliers");
    check->add_option("--v", cfg.v, "lambda multipliers");
    check->add_option("--w", cfg.w, "eta multipliers");
    check->add_option("--mu", cfg.mu, "Penalty parameter the point solves P_gap for");
    check->add_option("--tol", cfg.outer.tol_stationarity, "Stationarity tolerance")->capture_default_str();

    auto *verify = app.add_subcommand("verify", "Run the property suite");
    verify->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();
    verify->add_option("--fd-step", cfg.fd_step, "Central-difference step")->capture_default_str();
    verify->add_option("--samples", cfg.samples, "Samples per property")->capture_default_str();
    verify->add_option("--a", cfg.a, "D-gap parameter a")->capture_default_str();
    verify->add_option("--b", cfg.b, "D-gap parameter b (> a)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }

    try {
        if (solve->parsed()) {
            cfg.command = Command::solve;
            return cmd_solve(cfg, out, err);
        }
        if (check->parsed()) {
            cfg.command = Command::check;
            return cmd_check(cfg, out, err);
        }
        cfg.command = Command::verify;
        return cmd_verify(cfg, out, err);
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return exit_code::inner_failure;
    }
}

} // namespace gapmpcc
