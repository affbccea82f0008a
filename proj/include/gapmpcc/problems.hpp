#pragma once

// Quadratic MPCC instances J = 1/2 z'Qz + q'z + offset, h = Az + c, their
// JSON file format, and a brute-force oracle over the complementarity faces.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <json.hpp>

#include "gapmpcc/model.hpp"
#include "gapmpcc/types.hpp"

namespace gapmpcc {

class ProblemFormatError : public std::runtime_error {
public:
    enum class Kind { io, parse, symmetry, dimension, unknown_name };

    ProblemFormatError(Kind kind, std::string field, const std::string &what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), kind_(kind), field_(std::move(field)) {}

    Kind kind() const { return kind_; }
    const std::string &field() const { return field_; }

private:
    Kind kind_;
    std::string field_;
};

inline constexpr double kSymmetryTol = 1e-12;

struct QuadraticMpccSpec {
    std::string name;
    Index n_x = 0;
    Index n_lambda = 0;
    Mat Q;
    Vec q;
    Mat A; ///< n_h x dim, possibly 0 rows
    Vec c;
    /// Constant cost term; keeps J(1, 0) = 1 for the toy instances.
    double offset = 0.0;

    Index dim() const { return n_x + 2 * n_lambda; }
    Index n_h() const { return A.rows(); }

    void validate() const {
        using K = ProblemFormatError::Kind;
        if (n_x < 0 || n_lambda < 0)
            throw ProblemFormatError(K::dimension, "n_x", "dimensions must be nonnegative");
        const Index n = dim();
        if (Q.rows() != n || Q.cols() != n)
            throw ProblemFormatError(K::dimension, "Q", "expected " + std::to_string(n) + "x" + std::to_string(n));
        if (q.size() != n)
            throw ProblemFormatError(K::dimension, "q", "expected " + std::to_string(n) + " entries");
        if (A.rows() > 0 && A.cols() != n)
            throw ProblemFormatError(K::dimension, "A", "expected " + std::to_string(n) + " columns");
        if (c.size() != A.rows())
            throw ProblemFormatError(K::dimension, "c", "expected " + std::to_string(A.rows()) + " entries");
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < i; ++j)
                if (std::abs(Q(i, j) - Q(j, i)) > kSymmetryTol)
                    throw ProblemFormatError(K::symmetry,
                                             "Q[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                                             "matrix is not symmetric");
        if (!std::isfinite(offset) || !Q.allFinite() || !q.allFinite() || !A.allFinite() || !c.allFinite())
            throw ProblemFormatError(K::parse, "", "non-finite coefficient");
    }
};

inline double quadratic_cost(const QuadraticMpccSpec &s, const Vec &z) {
    return 0.5 * z.dot(s.Q * z) + s.q.dot(z) + s.offset;
}

inline MpccProblem make_problem(const QuadraticMpccSpec &spec) {
    spec.validate();
    auto s = std::make_shared<const QuadraticMpccSpec>(spec);
    MpccProblem p;
    p.name = s->name;
    p.n_x = s->n_x;
    p.n_lambda = s->n_lambda;
    p.n_h = s->n_h();
    p.cost = [s](const Vec &z) { return quadratic_cost(*s, z); };
    p.cost_gradient = [s](const Vec &z) -> Vec { return s->Q * z + s->q; };
    p.cost_hessian = [s](const Vec &) -> Mat { return s->Q; };
    if (p.n_h > 0) {
        p.constraints = [s](const Vec &z) -> Vec { return s->A * z + s->c; };
        p.constraint_jacobian = [s](const Vec &) -> Mat { return s->A; };
        p.constraint_hessians = [s](const Vec &) {
            return std::vector<Mat>(static_cast<std::size_t>(s->n_h()), Mat::Zero(s->dim(), s->dim()));
        };
    }
    return p;
}

inline const std::vector<std::string> &builtin_names() {
    static const std::vector<std::string> names = {"scholtes_toy", "bilinear_min",  "bilinear_saddle",
                                                   "constrained_toy", "quadratic_toy", "licq_fail"};
    return names;
}

/// True for the instances whose MPCC minimum is finite.
inline bool builtin_bounded(const std::string &name) { return name != "bilinear_saddle"; }

inline QuadraticMpccSpec builtin_spec(const std::string &name) {
    QuadraticMpccSpec s;
    s.name = name;
    s.n_lambda = 1;
    auto pair_only = [&] {
        s.Q = Mat::Zero(2, 2);
        s.q = Vec::Zero(2);
        s.A = Mat(0, 2);
        s.c = Vec(0);
    };
    if (name == "scholtes_toy") {
        // (lambda - 1)^2 + (eta - 1)^2
        pair_only();
        s.Q.diagonal().setConstant(2.0);
        s.q << -2.0, -2.0;
        s.offset = 2.0;
    } else if (name == "bilinear_min") {
        pair_only();
        s.q << 1.0, 1.0;
    } else if (name == "bilinear_saddle") {
        pair_only();
        s.q << -1.0, -1.0;
    } else if (name == "constrained_toy") {
        // x^2 + (lambda - 1)^2 + (eta - 1)^2,  x - lambda + eta = 0
        s.n_x = 1;
        s.Q = 2.0 * Mat::Identity(3, 3);
        s.q = Vec(3);
        s.q << 0.0, -2.0, -2.0;
        s.offset = 2.0;
        s.A = Mat(1, 3);
        s.A << 1.0, -1.0, 1.0;
        s.c = Vec::Zero(1);
    } else if (name == "quadratic_toy") {
        pair_only();
        s.Q.setIdentity();
    } else if (name == "licq_fail") {
        pair_only();
        s.q << 1.0, 1.0;
        s.A = Mat(1, 2);
        s.A << 1.0, -1.0;
        s.c = Vec::Zero(1);
    } else {
        throw ProblemFormatError(ProblemFormatError::Kind::unknown_name, "", "unknown builtin '" + name + "'");
    }
    return s;
}

inline MpccProblem builtin(const std::string &name) { return make_problem(builtin_spec(name)); }

// JSON file format -----------------------------------------------------------

namespace detail {

using nlohmann::json;

inline double json_number(const json &j, const std::string &path) {
    if (!j.is_number())
        throw ProblemFormatError(ProblemFormatError::Kind::parse, path, "expected a number");
    return j.get<double>();
}

inline Index json_count(const json &j, const std::string &path) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ProblemFormatError(ProblemFormatError::Kind::parse, path, "expected a nonnegative integer");
    return static_cast<Index>(j.get<long long>());
}

inline Vec json_vector(const json &j, const std::string &path, Index expected) {
    using K = ProblemFormatError::Kind;
    if (!j.is_array())
        throw ProblemFormatError(K::parse, path, "expected an array");
    if (static_cast<Index>(j.size()) != expected)
        throw ProblemFormatError(K::dimension, path,
                                 "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
    Vec v(expected);
    for (Index i = 0; i < expected; ++i)
        v[i] = json_number(j[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
    return v;
}

inline Mat json_matrix(const json &j, const std::string &path, Index rows, Index cols) {
    using K = ProblemFormatError::Kind;
    if (!j.is_array())
        throw ProblemFormatError(K::parse, path, "expected an array of rows");
    if (rows >= 0 && static_cast<Index>(j.size()) != rows)
        throw ProblemFormatError(K::dimension, path,
                                 "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
    Mat m(static_cast<Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        if (!j[r].is_array())
            throw ProblemFormatError(K::parse, rp, "expected an array");
        if (static_cast<Index>(j[r].size()) != cols)
            throw ProblemFormatError(K::dimension, rp,
                                     "expected " + std::to_string(cols) + " columns, got " +
                                         std::to_string(j[r].size()));
        for (Index k = 0; k < cols; ++k)
            m(static_cast<Index>(r), k) = json_number(j[r][static_cast<std::size_t>(k)],
                                                      rp + "[" + std::to_string(k) + "]");
    }
    return m;
}

} // namespace detail

inline QuadraticMpccSpec parse_quadratic(const nlohmann::json &j) {
    using K = ProblemFormatError::Kind;
    if (!j.is_object())
        throw ProblemFormatError(K::parse, "", "top level must be an object");
    static const char *known[] = {"name", "n_x", "n_lambda", "Q", "q", "A", "c", "offset"};
    for (const auto &item : j.items()) {
        bool ok = false;
        for (const char *k : known)
            ok = ok || item.key() == k;
        if (!ok)
            throw ProblemFormatError(K::parse, item.key(), "unknown key");
    }
    for (const char *k : {"name", "n_x", "n_lambda", "Q", "q"})
        if (!j.contains(k))
            throw ProblemFormatError(K::parse, k, "missing required key");

    QuadraticMpccSpec s;
    if (!j["name"].is_string())
        throw ProblemFormatError(K::parse, "name", "expected a string");
    s.name = j["name"].get<std::string>();
    s.n_x = detail::json_count(j["n_x"], "n_x");
    s.n_lambda = detail::json_count(j["n_lambda"], "n_lambda");
    const Index n = s.dim();
    s.Q = detail::json_matrix(j["Q"], "Q", n, n);
    s.q = detail::json_vector(j["q"], "q", n);
    s.A = j.contains("A") ? detail::json_matrix(j["A"], "A", -1, n) : Mat(0, n);
    s.c = j.contains("c") ? detail::json_vector(j["c"], "c", s.A.rows()) : Vec::Zero(s.A.rows());
    if (j.contains("offset"))
        s.offset = detail::json_number(j["offset"], "offset");
    s.validate();
    return s;
}

inline QuadraticMpccSpec read_quadratic(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ProblemFormatError(ProblemFormatError::Kind::io, path, "cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error &e) {
        throw ProblemFormatError(ProblemFormatError::Kind::parse, path, e.what());
    }
    return parse_quadratic(j);
}

inline MpccProblem load_quadratic(const std::string &path) { return make_problem(read_quadratic(path)); }

inline nlohmann::json to_json(const QuadraticMpccSpec &s) {
    auto rows = [](const Mat &m) {
        nlohmann::json out = nlohmann::json::array();
        for (Index r = 0; r < m.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Index k = 0; k < m.cols(); ++k)
                row.push_back(m(r, k));
            out.push_back(row);
        }
        return out;
    };
    auto vec = [](const Vec &v) { return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size())); };
    nlohmann::json j;
    j["name"] = s.name;
    j["n_x"] = s.n_x;
    j["n_lambda"] = s.n_lambda;
    j["Q"] = rows(s.Q);
    j["q"] = vec(s.q);
    j["A"] = rows(s.A);
    j["c"] = vec(s.c);
    if (s.offset != 0.0)
        j["offset"] = s.offset;
    return j;
}

inline void write_quadratic(const QuadraticMpccSpec &s, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw ProblemFormatError(ProblemFormatError::Kind::io, path, "cannot open file for writing");
    out << to_json(s).dump(2) << '\n';
}

// Brute-force oracle ---------------------------------------------------------

/// Face of one complementarity pair: eta_zero means eta_i = 0 with lambda_i
/// free but nonnegative, both_zero pins the pair to the origin.
enum class BranchChoice { eta_zero, lambda_zero, both_zero };

inline const char *to_string(BranchChoice c) {
    switch (c) {
    case BranchChoice::eta_zero: return "eta=0";
    case BranchChoice::lambda_zero: return "lambda=0";
    case BranchChoice::both_zero: return "lambda=eta=0";
    }
    return "?";
}

struct BranchSolution {
    std::vector<BranchChoice> assignment;
    Vec z;
    double J = 0.0;
    bool feasible = false;
};

struct BranchStats {
    long faces = 0;
    long skipped = 0;    ///< inconsistent or unbounded face QPs
    long infeasible = 0; ///< solutions violating the sign constraints
};

inline constexpr Index kMaxBranchPairs = 12;
inline constexpr double kBranchSignSlack = 1e-10;

namespace detail {

// min over the face: equality-constrained QP in the free variables. Returns
// false when the face problem has no finite minimizer.
inline bool solve_face(const QuadraticMpccSpec &s, const std::vector<Index> &free_vars, Vec &z) {
    const Index n = s.dim();
    const Index nf = static_cast<Index>(free_vars.size());
    const Index m = s.n_h();
    z = Vec::Zero(n);
    if (nf == 0)
        return m == 0 || detail::inf_norm(s.c) <= kBranchSignSlack;

    Mat Qf(nf, nf), Af(m, nf);
    Vec qf(nf);
    for (Index i = 0; i < nf; ++i) {
        qf[i] = s.q[free_vars[static_cast<std::size_t>(i)]];
        for (Index k = 0; k < nf; ++k)
            Qf(i, k) = s.Q(free_vars[static_cast<std::size_t>(i)], free_vars[static_cast<std::size_t>(k)]);
        for (Index r = 0; r < m; ++r)
            Af(r, i) = s.A(r, free_vars[static_cast<std::size_t>(i)]);
    }

    Mat kkt = Mat::Zero(nf + m, nf + m);
    kkt.topLeftCorner(nf, nf) = Qf;
    kkt.topRightCorner(nf, m) = Af.transpose();
    kkt.bottomLeftCorner(m, nf) = Af;
    Vec rhs(nf + m);
    rhs.head(nf) = -qf;
    rhs.tail(m) = -s.c;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(kkt);
    const Vec sol = cod.solve(rhs);
    const double scale = 1.0 + std::max(detail::inf_norm(rhs), kkt.cwiseAbs().maxCoeff() * detail::inf_norm(sol));
    if (!sol.allFinite() || detail::inf_norm(kkt * sol - rhs) > 1e-9 * scale)
        return false; // inconsistent: the face QP is unbounded or infeasible

    // A stationary point is a minimizer only if Qf is PSD on ker(Af).
    const Mat basis = kernel_basis(Af, nf);
    if (basis.cols() > 0) {
        const Mat red = basis.transpose() * Qf * basis;
        Eigen::SelfAdjointEigenSolver<Mat> eig(red);
        if (eig.eigenvalues().minCoeff() < -1e-10 * (1.0 + Qf.cwiseAbs().maxCoeff()))
            return false;
    }
    for (Index i = 0; i < nf; ++i)
        z[free_vars[static_cast<std::size_t>(i)]] = sol[i];
    return true;
}

} // namespace detail

/// Global MPCC minimum of a quadratic instance by enumerating the 3^n_lambda
/// faces of the complementarity set. Each face is an equality-constrained QP;
/// a face minimizer counts when it respects the sign constraints of its free
/// pair components. Ties keep the first face in lexicographic order with
/// eta_zero < lambda_zero < both_zero.
inline BranchSolution brute_force_branch_solve(const QuadraticMpccSpec &spec, BranchStats *stats = nullptr) {
    spec.validate();
    if (spec.n_lambda > kMaxBranchPairs)
        throw std::invalid_argument("brute_force_branch_solve: at most 12 complementarity pairs");
    const Index nl = spec.n_lambda;
    long total = 1;
    for (Index i = 0; i < nl; ++i)
        total *= 3;

    BranchStats st;
    BranchSolution best;
    std::vector<BranchChoice> assignment(static_cast<std::size_t>(nl));
    for (long code = 0; code < total; ++code) {
        long rest = code;
        for (Index i = nl - 1; i >= 0; --i) {
            assignment[static_cast<std::size_t>(i)] = static_cast<BranchChoice>(rest % 3);
            rest /= 3;
        }
        std::vector<Index> free_vars;
        for (Index i = 0; i < spec.n_x; ++i)
            free_vars.push_back(i);
        for (Index i = 0; i < nl; ++i)
            if (assignment[static_cast<std::size_t>(i)] == BranchChoice::eta_zero)
                free_vars.push_back(spec.n_x + i);
        for (Index i = 0; i < nl; ++i)
            if (assignment[static_cast<std::size_t>(i)] == BranchChoice::lambda_zero)
                free_vars.push_back(spec.n_x + nl + i);
        std::sort(free_vars.begin(), free_vars.end());

        ++st.faces;
        Vec z;
        if (!detail::solve_face(spec, free_vars, z)) {
            ++st.skipped;
            continue;
        }
        if (nl > 0 && z.segment(spec.n_x, 2 * nl).minCoeff() < -kBranchSignSlack) {
            ++st.infeasible;
            continue;
        }
        const double J = quadratic_cost(spec, z);
        if (!best.feasible || J < best.J - 1e-12 * (1.0 + std::abs(best.J))) {
            best.assignment = assignment;
            best.z = z;
            best.J = J;
            best.feasible = true;
        }
    }
    if (stats)
        *stats = st;
    if (!best.feasible)
        throw std::runtime_error("brute_force_branch_solve: no face has a feasible minimizer");
    return best;
}

} // namespace gapmpcc
