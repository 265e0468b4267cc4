#pragma once

// Polar reduced dynamics on a 2-D normal-form SSM: backbone curves, forced response
// curves, stability, and reduced-order simulation.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssmkit/forcing.hpp"

namespace ssmkit {

/// p' = lambda p + sum_l gamma_l |p|^{2l} p + f e^{i eta Omega t}, written in
/// p = rho e^{i theta}, psi = theta - eta Omega t.
struct PolarROM {
    cplx lambda;
    std::vector<cplx> gamma;  ///< gamma[l-1] multiplies rho^{2l+1}
    cplx f{0.0, 0.0};         ///< eps * u_1^* F_eta
    int eta = 1;

    /// lambda rho + sum gamma_l rho^{2l+1}.
    cplx poly(double rho) const;
    cplx dpoly(double rho) const;
    double a(double rho) const { return poly(rho).real(); }
    double b(double rho, double Omega) const { return poly(rho).imag() - eta * rho * Omega; }
    double da(double rho) const { return dpoly(rho).real(); }
    double db(double rho, double Omega) const { return dpoly(rho).imag() - eta * Omega; }
    /// Fixed points satisfy a^2 + b^2 - |f|^2 = 0.
    double F(double rho, double Omega) const;
    /// (rho', psi').
    std::array<double, 2> rhs(double rho, double psi, double Omega) const;
    /// Instantaneous frequency Im(lambda) + sum Im(gamma_l) rho^{2l}.
    double frequency(double rho) const;
    bool conservative(double tol = 1e-9) const;
};

/// Builds the polar ROM from a normal-form expansion with a conjugate pair as master
/// subspace; nonaut may be null (autonomous ROM, f = 0).
PolarROM extract_polar_rom(const ManifoldExpansion& manifold, const NonAutonomousLeading* nonaut, int eta = 1);

struct StabilityInfo {
    Eigen::Matrix2d J;
    std::array<cplx, 2> eigenvalues;
    bool stable = false;
};

/// Jacobian of (rho', psi') at a fixed point.
StabilityInfo stability_jacobian(const PolarROM& rom, double rho, double Omega);

/// Positive real fixed-point amplitudes rho at one Omega.
std::vector<double> fixed_point_amplitudes(const PolarROM& rom, double Omega);

/// Phase psi of the fixed point with amplitude rho.
double fixed_point_phase(const PolarROM& rom, double rho, double Omega);

/// Real physical state on the manifold: W(p) + eps X_0(Omega t) with p = rho e^{i(psi + eta Omega t)}.
VecR lift_state(const ManifoldExpansion& manifold, const NonAutonomousLeading* nonaut, double rho, double theta,
                double Omega_t);

struct BackbonePoint {
    double rho = 0.0;
    double omega = 0.0;
    std::vector<double> amplitudes;  ///< max over one period, per output DOF
};

/// Backbone curve omega(rho) of an undamped normal-form ROM.
std::vector<BackbonePoint> backbone(const ManifoldExpansion& manifold, const std::vector<double>& rho,
                                    const std::vector<int>& output_dofs, int phases = 128);

struct FrcPoint {
    double Omega = 0.0;
    double rho = 0.0;
    double psi = 0.0;
    bool stable = false;
    std::array<cplx, 2> eigenvalues;
    double residual = 0.0;           ///< |F(rho, Omega)|
    std::vector<double> amplitudes;  ///< max_t |z_dof(t)| per output DOF
};

struct FrcOptions {
    double Omega_min = 0.0;
    double Omega_max = 0.0;
    int samples = 101;
    /// Explicit frequency list; when non-empty it replaces the range.
    std::vector<double> Omegas;
    std::vector<int> output_dofs;  ///< 0-based state indices
    int eta = 0;                   ///< 0: nearest integer ratio Im(lambda)/Omega in 1..3
    int phases = 128;
    ForcingOptions forcing;
};

struct FrcResult {
    int eta = 1;
    std::vector<FrcPoint> points;  ///< sorted by Omega, then rho
    std::vector<std::string> warnings;
};

/// Forced response curve from the polar fixed points, Omega by Omega.
FrcResult frc_sweep(const FirstOrderSystem& sys, const ManifoldExpansion& manifold, const FrcOptions& options);

/// Forcing options used by the FRC pipeline for a given eta.
ForcingOptions frc_forcing_options(const ForcingOptions& base, int eta);

/// Polar ROM of the forced system at one Omega.
PolarROM rom_at(const FirstOrderSystem& sys, const ManifoldExpansion& manifold, double Omega, int eta,
                const ForcingOptions& base, NonAutonomousLeading* nonaut_out = nullptr);

struct RomTrajectory {
    std::vector<double> t;
    std::vector<double> rho;
    std::vector<double> psi;
    std::vector<VecR> z;  ///< lifted physical states (empty without a manifold)
};

/// Integrates the polar ROM (Cartesian chart q = rho e^{i psi} near rho = 0) and
/// samples every dt; lifts through the manifold when given.
RomTrajectory rom_integrate(const PolarROM& rom, double Omega, double rho0, double psi0, double t_end, double dt,
                            const ManifoldExpansion* manifold = nullptr, const NonAutonomousLeading* nonaut = nullptr,
                            double rtol = 1e-10, double atol = 1e-12);

}  // namespace ssmkit
