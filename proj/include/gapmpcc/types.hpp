#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gapmpcc {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Vec>;
using MatRef = Eigen::Ref<const Mat>;

/// Raised when vector or matrix sizes disagree with a problem layout.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_same_size(Index lhs, Index rhs, const char *what) {
    if (lhs != rhs)
        throw DimensionError(std::string(what) + ": size mismatch (" +
                             std::to_string(lhs) + " vs " + std::to_string(rhs) + ")");
}

inline double inf_norm(const VecRef &v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

} // namespace detail
} // namespace gapmpcc
