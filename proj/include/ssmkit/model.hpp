#pragma once

// Second-order mechanical systems, their first-order forms, and built-in examples.

#include <string>
#include <vector>

#include "ssmkit/polytensor.hpp"
#include "ssmkit/types.hpp"

namespace ssmkit {

/// One Fourier component of the external forcing: kappa is the integer harmonic
/// (one entry for periodic forcing, K entries for quasi-periodic forcing).
struct Harmonic {
    std::vector<int> kappa;
    VecC amplitude;
};

/// M x'' + C x' + K x + f(x, x') = eps * sum_kappa f_kappa e^{i <kappa, Omega t>}.
/// Nonlinear coefficients act on x (n variables) or on (x, x') (2n variables).
struct MechanicalSystem {
    int n = 0;
    SpMatR M, C, K;
    std::vector<PolyCoeffs> f;
    std::vector<Harmonic> forcing;
    double epsilon = 0.0;

    void validate() const;
    bool is_symmetric(double rel_tol = 1e-12) const;
};

enum class Variant { L1, L2 };
enum class NChoice { MinusK, MassM, Identity };

/// B z' = A z + F(z) + eps * sum_kappa F_kappa e^{i <kappa, phi>}.
struct FirstOrderSystem {
    int N = 0;
    SpMatR A, B;
    std::vector<PolyCoeffs> F;
    std::vector<Harmonic> forcing;
    double epsilon = 0.0;
    bool symmetric = false;
    /// Number of mechanical DOFs when built from a MechanicalSystem (positions are
    /// z[0..n_dof-1] in both variants), 0 otherwise.
    int n_dof = 0;

    void validate() const;

    int max_degree() const;
    VecR nonlinearity(const VecR& z) const;
    VecC nonlinearity(const VecC& z) const;
    MatR nonlinearity_jacobian(const VecR& z) const;
    /// Real external force eps * sum F_kappa e^{i <kappa, phi>} (without eps when unscaled).
    VecR external_force(const VecR& phase, bool scaled = true) const;
};

FirstOrderSystem build_first_order(const MechanicalSystem& mech, Variant variant, NChoice n_choice);
/// L2 with N = M for symmetric input, L1 with N = I otherwise.
FirstOrderSystem build_first_order(const MechanicalSystem& mech);

MechanicalSystem oscillator_chain(int n, double m, double k, double c, double kappa);
MechanicalSystem duffing(double m, double c, double k, double kappa);
FirstOrderSystem lorenz_extended(double sigma, double beta);

/// The 10-DOF forcing shape that excites the three lowest chain modes.
VecR chain_forcing_shape();

/// Adds f0 cos(Omega t): harmonics +1 and -1 with amplitude f0 / 2.
void add_cosine_forcing(MechanicalSystem& mech, const VecR& f0, double epsilon);

/// Symmetric check of a sparse matrix, relative to its largest entry.
bool is_symmetric(const SpMatR& A, double rel_tol = 1e-12);

}  // namespace ssmkit
