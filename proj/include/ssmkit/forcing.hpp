#pragma once

// Leading-order (order 0 in p) non-autonomous terms X_0, S_0 of the forced manifold.

#include <string>
#include <utility>
#include <vector>

#include "ssmkit/cohomology.hpp"

namespace ssmkit {

struct ForcedTerm {
    std::vector<int> kappa;
    double frequency = 0.0;  ///< <kappa, Omega>
    VecC x;                  ///< N-vector x_{0,kappa}
    VecC s;                  ///< M-vector s_{0,kappa}
    std::vector<int> resonant_modes;
    double condition = 0.0;
    bool min_norm = false;
};

struct NonAutonomousLeading {
    VecR Omega;
    double epsilon = 0.0;
    std::vector<ForcedTerm> terms;
    std::vector<std::string> warnings;

    const ForcedTerm* find(const std::vector<int>& kappa) const;
    /// X_0(phi) = sum_kappa x_kappa e^{i <kappa, phi>} (unscaled by epsilon).
    VecC X0(const VecR& phi) const;
    VecC S0(const VecR& phi) const;
};

struct ForcingOptions {
    ResonanceTolerance tolerance;
    /// (kappa, master index) pairs treated as resonant regardless of the tolerance test.
    std::vector<std::pair<std::vector<int>, int>> forced_resonances;
    double min_norm_condition = 1e12;
    int dense_limit = 600;
};

NonAutonomousLeading leading_order(const FirstOrderSystem& sys, const MasterSubspace& master, const VecC& outer,
                                   const VecR& Omega, const StyleSpec& style, const ForcingOptions& options = {});

}  // namespace ssmkit
