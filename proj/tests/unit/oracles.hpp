#pragma once

// Independent reference computations used by the tests. Everything here works on
// small dense matrices and avoids the index arithmetic of the library.

#include <functional>
#include <random>
#include <vector>

#include "ssmkit/model.hpp"
#include "ssmkit/polytensor.hpp"

namespace oracle {

using ssmkit::cplx;
using ssmkit::MatC;
using ssmkit::MatR;
using ssmkit::VecC;
using ssmkit::VecR;

MatC kron(const MatC& a, const MatC& b);
MatC identity_power(int M, int k);

/// rows x vars^k dense matrix of a coefficient array.
MatC dense(const ssmkit::PolyCoeffs& f);

/// sum_k I^{(x)k} (x) R (x) I^{(x)(j-k-1)}, an M^j x M^i matrix.
MatC dense_kron_sum(const MatC& R_lower, int i, int j, int M);

/// (F o W)_i from dense Kronecker products over all compositions.
MatC dense_compose(const std::vector<ssmkit::PolyCoeffs>& F, const std::vector<MatC>& W, int i, int M);

/// Degree-d homogeneous part of a polynomial t -> g(t p) evaluated at p, extracted by a
/// discrete Fourier transform over t on a circle; exact up to roundoff when total degree < K.
VecC homogeneous_part(const std::function<VecC(cplx)>& g, int degree, int K, double radius = 1.0);

/// Evaluates sum_q W_q p^{(x)q} by explicit monomial products (no Kronecker vectors).
VecC evaluate_expansion(const std::vector<MatC>& W, const VecC& p);

/// Random complex matrix with entries uniform in the unit square.
MatC random_matrix(std::mt19937& rng, Eigen::Index rows, Eigen::Index cols);
ssmkit::PolyCoeffs random_poly(std::mt19937& rng, int degree, std::size_t rows, std::size_t vars,
                               int terms, bool real = true);

/// Invariance equation for a 2-dimensional master pair solved through degree 3 as one
/// dense vectorized system per degree. Unknowns are all of W_i and the R_i entries at
/// near-resonant (l, j); the extra rows u_j^* B w_l = 0 pin the resonant kernel.
/// Returns gamma, the summed p1^2 p2 coefficient of the first reduced-dynamics row.
cplx dense_invariance_gamma(const ssmkit::FirstOrderSystem& sys, const VecC& lambdas, const MatC& V,
                            const MatC& U);

/// Period of the conservative oscillator m x'' + k x + kappa x^3 = 0 at amplitude A,
/// by quadrature of the energy integral.
double duffing_period(double m, double k, double kappa, double amplitude);

}  // namespace oracle
