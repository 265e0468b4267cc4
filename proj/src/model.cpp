#include "ssmkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace ssmkit {

namespace {

double max_abs(const SpMatR& A) {
    double m = 0.0;
    for (int k = 0; k < A.outerSize(); ++k) {
        for (SpMatR::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
    }
    return m;
}

bool sparse_nonsingular(const SpMatR& A) {
    if (A.rows() != A.cols() || A.rows() == 0) return false;
    SpMatR Ac = A;
    Ac.makeCompressed();
    Eigen::SparseLU<SpMatR> lu;
    lu.compute(Ac);
    if (lu.info() != Eigen::Success) return false;
    // SparseLU accepts tiny pivots; probe with a fixed right-hand side.
    const VecR b = VecR::LinSpaced(A.rows(), 1.0, 2.0);
    const VecR x = lu.solve(b);
    if (!x.allFinite()) return false;
    return x.norm() * max_abs(A) < 1e14 * b.norm();
}

void check_square(const SpMatR& A, int n, const char* name) {
    if (A.rows() != n || A.cols() != n) {
        throw ValidationError(fmt::format("{} matrix is {}x{}, expected {}x{}", name, A.rows(),
                                          A.cols(), n, n));
    }
}

void check_forcing(const std::vector<Harmonic>& forcing, int dim) {
    std::map<std::vector<int>, const VecC*> by_kappa;
    std::size_t K = 0;
    for (const auto& h : forcing) {
        if (h.kappa.empty()) throw ValidationError("forcing harmonic has an empty kappa");
        if (K == 0) K = h.kappa.size();
        if (h.kappa.size() != K) throw ValidationError("forcing harmonics mix frequency counts");
        if (h.amplitude.size() != dim) {
            throw ValidationError(fmt::format("forcing amplitude has length {}, expected {}",
                                              h.amplitude.size(), dim));
        }
        if (!by_kappa.emplace(h.kappa, &h.amplitude).second) {
            throw ValidationError("forcing harmonic listed twice");
        }
    }
    for (const auto& [kappa, amp] : by_kappa) {
        std::vector<int> neg(kappa);
        for (int& v : neg) v = -v;
        auto it = by_kappa.find(neg);
        if (it == by_kappa.end()) {
            throw ValidationError("forcing is not real: a harmonic lacks its conjugate partner");
        }
        const double scale = std::max(amp->cwiseAbs().maxCoeff(), 1e-300);
        if ((it->second->conjugate() - *amp).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw ValidationError("forcing is not real: harmonic -kappa is not the conjugate of kappa");
        }
    }
}

SpMatR identity(int n) {
    SpMatR I(n, n);
    I.setIdentity();
    return I;
}

// Places blocks [[a, b], [c, d]] (each n x n, possibly empty) into a 2n x 2n matrix.
SpMatR blocks(int n, const SpMatR* a, const SpMatR* b, const SpMatR* c, const SpMatR* d,
              double sa = 1, double sb = 1, double sc = 1, double sd = 1) {
    std::vector<Eigen::Triplet<double>> trip;
    auto put = [&](const SpMatR* blk, int r0, int c0, double s) {
        if (blk == nullptr) return;
        for (int k = 0; k < blk->outerSize(); ++k) {
            for (SpMatR::InnerIterator it(*blk, k); it; ++it) {
                trip.emplace_back(static_cast<int>(it.row()) + r0, static_cast<int>(it.col()) + c0,
                                  s * it.value());
            }
        }
    };
    put(a, 0, 0, sa);
    put(b, 0, n, sb);
    put(c, n, 0, sc);
    put(d, n, n, sd);
    SpMatR out(2 * n, 2 * n);
    out.setFromTriplets(trip.begin(), trip.end());
    out.prune(0.0);
    return out;
}

void add_cube_difference(PolyCoeffs& f, std::size_t row, int a, int b, double scale) {
    // scale * (x_a - x_b)^3; a or b equal to -1 means the wall (zero).
    if (a >= 0) f.add(row, {a, a, a}, scale);
    if (b >= 0) f.add(row, {b, b, b}, -scale);
    if (a >= 0 && b >= 0) {
        f.add(row, {a, a, b}, -3.0 * scale);
        f.add(row, {a, b, b}, 3.0 * scale);
    }
}

}  // namespace

bool is_symmetric(const SpMatR& A, double rel_tol) {
    if (A.rows() != A.cols()) return false;
    const SpMatR diff = SpMatR(A.transpose()) - A;
    return max_abs(diff) <= rel_tol * std::max(max_abs(A), 1e-300);
}

void MechanicalSystem::validate() const {
    if (n < 1) throw ValidationError("mechanical system needs n >= 1");
    check_square(M, n, "mass");
    check_square(C, n, "damping");
    check_square(K, n, "stiffness");
    for (const auto& fk : f) {
        if (fk.degree() < 2) throw ValidationError("nonlinear coefficients must have degree >= 2");
        if (fk.rows() != static_cast<std::size_t>(n)) {
            throw ValidationError("nonlinear coefficients have the wrong row count");
        }
        if (fk.vars() != static_cast<std::size_t>(n) && fk.vars() != static_cast<std::size_t>(2 * n)) {
            throw ValidationError("nonlinear coefficients must act on n or 2n variables");
        }
        if (!fk.is_real()) throw ValidationError("nonlinear coefficients must be real");
    }
    check_forcing(forcing, n);
}

bool MechanicalSystem::is_symmetric(double rel_tol) const {
    return ssmkit::is_symmetric(M, rel_tol) && ssmkit::is_symmetric(C, rel_tol) &&
           ssmkit::is_symmetric(K, rel_tol);
}

void FirstOrderSystem::validate() const {
    if (N < 1) throw ValidationError("first-order system needs N >= 1");
    check_square(A, N, "A");
    check_square(B, N, "B");
    for (const auto& Fk : F) {
        if (Fk.degree() < 2) throw ValidationError("nonlinear coefficients must have degree >= 2");
        if (Fk.rows() != static_cast<std::size_t>(N) || Fk.vars() != static_cast<std::size_t>(N)) {
            throw ValidationError("nonlinear coefficients must map R^N to R^N");
        }
        if (!Fk.is_real()) throw ValidationError("nonlinear coefficients must be real");
    }
    check_forcing(forcing, N);
    if (!sparse_nonsingular(B)) throw ValidationError("B is singular");
    if (symmetric && !(is_symmetric(A) && is_symmetric(B))) {
        throw ValidationError("system flagged symmetric but A or B is not");
    }
}

int FirstOrderSystem::max_degree() const {
    int d = 1;
    for (const auto& Fk : F) d = std::max(d, Fk.degree());
    return d;
}

VecR FirstOrderSystem::nonlinearity(const VecR& z) const {
    VecR out = VecR::Zero(N);
    for (const auto& Fk : F) out += Fk.evaluate(z);
    return out;
}

VecC FirstOrderSystem::nonlinearity(const VecC& z) const {
    VecC out = VecC::Zero(N);
    for (const auto& Fk : F) out += Fk.evaluate(z);
    return out;
}

MatR FirstOrderSystem::nonlinearity_jacobian(const VecR& z) const {
    MatR J = MatR::Zero(N, N);
    for (const auto& Fk : F) Fk.add_jacobian(z, J);
    return J;
}

VecR FirstOrderSystem::external_force(const VecR& phase, bool scaled) const {
    VecC acc = VecC::Zero(N);
    for (const auto& h : forcing) {
        if (static_cast<Eigen::Index>(h.kappa.size()) != phase.size()) {
            throw ValidationError("phase vector length does not match the forcing harmonics");
        }
        double arg = 0.0;
        for (std::size_t k = 0; k < h.kappa.size(); ++k) arg += h.kappa[k] * phase[static_cast<Eigen::Index>(k)];
        acc += h.amplitude * std::exp(I_unit * arg);
    }
    VecR out = acc.real();
    if (scaled) out *= epsilon;
    return out;
}

FirstOrderSystem build_first_order(const MechanicalSystem& mech, Variant variant, NChoice n_choice) {
    mech.validate();
    const int n = mech.n;
    SpMatR Nb;
    switch (n_choice) {
        case NChoice::MinusK: Nb = -mech.K; break;
        case NChoice::MassM: Nb = mech.M; break;
        case NChoice::Identity: Nb = identity(n); break;
    }
    if (!sparse_nonsingular(Nb)) {
        throw ValidationError("construction error: the chosen N block is singular");
    }

    FirstOrderSystem sys;
    sys.N = 2 * n;
    sys.n_dof = n;
    sys.epsilon = mech.epsilon;
    const std::size_t row_offset = variant == Variant::L1 ? static_cast<std::size_t>(n) : 0;
    if (variant == Variant::L1) {
        sys.A = blocks(n, nullptr, &Nb, &mech.K, &mech.C, 1, 1, -1, -1);
        sys.B = blocks(n, &Nb, nullptr, nullptr, &mech.M);
    } else {
        sys.A = blocks(n, &mech.K, nullptr, nullptr, &Nb, -1, 1, 1, 1);
        sys.B = blocks(n, &mech.C, &mech.M, &Nb, nullptr);
    }
    for (const auto& fk : mech.f) {
        PolyCoeffs Fk(fk.degree(), sys.N, sys.N);
        for (std::size_t t = 0; t < fk.nnz(); ++t) Fk.add(fk.row(t) + row_offset, fk.index(t), -fk.value(t));
        Fk.finalize();
        sys.F.push_back(std::move(Fk));
    }
    for (const auto& h : mech.forcing) {
        VecC amp = VecC::Zero(sys.N);
        amp.segment(static_cast<Eigen::Index>(row_offset), n) = h.amplitude;
        sys.forcing.push_back({h.kappa, amp});
    }
    sys.symmetric = mech.is_symmetric() && ((variant == Variant::L1 && n_choice == NChoice::MinusK) ||
                                            (variant == Variant::L2 && n_choice == NChoice::MassM));
    sys.validate();
    return sys;
}

FirstOrderSystem build_first_order(const MechanicalSystem& mech) {
    if (mech.is_symmetric()) return build_first_order(mech, Variant::L2, NChoice::MassM);
    return build_first_order(mech, Variant::L1, NChoice::Identity);
}

MechanicalSystem oscillator_chain(int n, double m, double k, double c, double kappa) {
    if (n < 1) throw ValidationError("oscillator chain needs n >= 1");
    if (!(m > 0) || !(k > 0) || c < 0 || kappa < 0) {
        throw ValidationError("oscillator chain needs m, k > 0 and c, kappa >= 0");
    }
    MechanicalSystem mech;
    mech.n = n;
    std::vector<Eigen::Triplet<double>> L;
    for (int r = 0; r < n; ++r) {
        L.emplace_back(r, r, 2.0);
        if (r + 1 < n) {
            L.emplace_back(r, r + 1, -1.0);
            L.emplace_back(r + 1, r, -1.0);
        }
    }
    SpMatR Ln(n, n);
    Ln.setFromTriplets(L.begin(), L.end());
    mech.M = m * identity(n);
    mech.K = k * Ln;
    mech.C = c * Ln;
    mech.C.prune(0.0);
    if (kappa != 0.0) {
        // Spring r joins x_{r-1} and x_r (walls at both ends); f_r = d_r^3 - d_{r+1}^3.
        PolyCoeffs f3(3, static_cast<std::size_t>(n), static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r) {
            const auto row = static_cast<std::size_t>(r);
            add_cube_difference(f3, row, r, r - 1, kappa);
            add_cube_difference(f3, row, r + 1 < n ? r + 1 : -1, r, -kappa);
        }
        f3.finalize();
        mech.f.push_back(std::move(f3));
    }
    return mech;
}

MechanicalSystem duffing(double m, double c, double k, double kappa) {
    if (!(m > 0) || !(k > 0) || c < 0) throw ValidationError("Duffing oscillator needs m, k > 0 and c >= 0");
    MechanicalSystem mech;
    mech.n = 1;
    mech.M = m * identity(1);
    mech.K = k * identity(1);
    mech.C = c * identity(1);
    mech.C.prune(0.0);
    if (kappa != 0.0) {
        PolyCoeffs f3(3, 1, 1);
        f3.add(0, {0, 0, 0}, kappa);
        f3.finalize();
        mech.f.push_back(std::move(f3));
    }
    return mech;
}

FirstOrderSystem lorenz_extended(double sigma, double beta) {
    if (!(sigma > 0) || !(beta > 0)) throw ValidationError("Lorenz system needs sigma, beta > 0");
    FirstOrderSystem sys;
    sys.N = 4;
    std::vector<Eigen::Triplet<double>> a{{0, 0, -sigma}, {0, 1, sigma}, {1, 0, 1.0}, {1, 1, -1.0}, {2, 2, -beta}};
    sys.A = SpMatR(4, 4);
    sys.A.setFromTriplets(a.begin(), a.end());
    sys.B = identity(4);
    // z = (x, y, z, mu): F = (0, x mu - x z, x y, 0).
    PolyCoeffs F2(2, 4, 4);
    F2.add(1, {0, 3}, 1.0);
    F2.add(1, {0, 2}, -1.0);
    F2.add(2, {0, 1}, 1.0);
    F2.finalize();
    sys.F.push_back(std::move(F2));
    sys.symmetric = false;
    sys.validate();
    return sys;
}

VecR chain_forcing_shape() {
    VecR f0(10);
    f0 << -0.386, -0.587, -0.521, -0.243, 0.095, 0.335, 0.402, 0.323, 0.188, 0.075;
    return f0;
}

void add_cosine_forcing(MechanicalSystem& mech, const VecR& f0, double epsilon) {
    if (f0.size() != mech.n) {
        throw ValidationError(fmt::format("forcing shape has length {}, expected {}", f0.size(), mech.n));
    }
    const VecC half = f0.cast<cplx>() * 0.5;
    mech.forcing.push_back({{1}, half});
    mech.forcing.push_back({{-1}, half});
    mech.epsilon = epsilon;
}

}  // namespace ssmkit
