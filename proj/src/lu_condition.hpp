#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "ssmkit/types.hpp"

namespace ssmkit::detail {

// Condition estimate of a partial-pivot LU. Eigen's rcond() reports 1 for an exactly zero
// pivot, so the pivot spread is folded in as a lower bound.
inline double lu_condition(const Eigen::PartialPivLU<MatC>& lu) {
    const auto d = lu.matrixLU().diagonal().cwiseAbs();
    const double lo = d.minCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    const double rc = lu.rcond();
    const double est = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    return std::max(est, d.maxCoeff() / lo);
}

}  // namespace ssmkit::detail
