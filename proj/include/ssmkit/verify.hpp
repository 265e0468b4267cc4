#pragma once

// Checks against the full system: invariance residual scaling and direct time integration.

#include <cstdint>
#include <optional>
#include <vector>

#include "ssmkit/cohomology.hpp"
#include "ssmkit/forcing.hpp"

namespace ssmkit {

/// r(p) = B DW(p) R(p) - A W(p) - F(W(p)).
VecC invariance_residual_at(const FirstOrderSystem& sys, const ManifoldExpansion& manifold, const VecC& p);

struct ResidualReport {
    int order = 0;
    std::vector<double> radii;
    std::vector<double> residuals;  ///< RMS of |r(p)| over the sampled directions
    double slope = 0.0;             ///< least-squares slope of log residual vs log radius
    double expected_min = 0.0;
    double expected_max = 0.0;
    bool pass = false;
};

struct ResidualOptions {
    int directions = 16;
    std::uint64_t seed = 20240917;
};

/// Residual at conjugate-symmetric points with |p| = r; radii strictly decreasing in (0, 0.1].
ResidualReport invariance_residual(const FirstOrderSystem& sys, const ManifoldExpansion& manifold,
                                   const std::vector<double>& radii, const ResidualOptions& options = {});

/// Log-spaced radii from r_max down to r_min.
std::vector<double> log_radii(double r_min, double r_max, int count);

enum class Scheme { Auto, Explicit, Implicit };

struct IntegrationOptions {
    Scheme scheme = Scheme::Auto;
    double rtol = 1e-10;
    double atol = 1e-12;
    /// Implicit trapezoidal step; 0 means output interval / 8.
    double step = 0.0;
    int newton_max = 25;
    double newton_tol = 1e-12;
    /// Auto selects the implicit scheme above this ratio of largest to smallest |lambda|.
    double stiffness_limit = 1e4;
    bool forcing = true;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<VecR> z;
};

/// Integrates B z' = A z + F(z) + eps F_ext(Omega t) and samples every output_dt.
Trajectory integrate_full(const FirstOrderSystem& sys, const VecR& z0, const VecR& Omega, double t_end,
                          double output_dt, const IntegrationOptions& options = {});

/// Ratio of largest to smallest nonzero |lambda| of the linear part.
double stiffness_ratio(const FirstOrderSystem& sys);

struct SteadyStateOptions {
    int transient_periods = 300;
    int window_periods = 10;
    int max_periods = 3000;
    int samples_per_period = 256;
    double agreement = 5e-3;
    IntegrationOptions integration;
};

struct SteadyState {
    std::vector<double> amplitudes;  ///< per output index, max |z| over the final window
    int periods = 0;
    VecR final_state;
};

/// Periodic steady-state amplitude under forcing at Omega: integrates past the transient,
/// then compares consecutive windows until they agree.
SteadyState steady_state_amplitude(const FirstOrderSystem& sys, double Omega, const std::vector<int>& output_dofs,
                                   const VecR& z0, const SteadyStateOptions& options = {});

/// Total mechanical energy 1/2 v^T M v + 1/2 x^T K x + U(x) for the L2/L1 state z = (x, v),
/// with U the potential of a position-only polynomial nonlinearity.
double mechanical_energy(const SpMatR& M, const SpMatR& K, const std::vector<PolyCoeffs>& f, const VecR& z);

}  // namespace ssmkit
