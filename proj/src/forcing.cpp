#include "ssmkit/forcing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseLU>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lu_condition.hpp"
#include "ssmkit/parallel.hpp"

namespace ssmkit {

const ForcedTerm* NonAutonomousLeading::find(const std::vector<int>& kappa) const {
    for (const auto& t : terms) {
        if (t.kappa == kappa) return &t;
    }
    return nullptr;
}

namespace {

double phase_of(const std::vector<int>& kappa, const VecR& phi) {
    double arg = 0.0;
    for (std::size_t k = 0; k < kappa.size(); ++k) arg += kappa[k] * phi[static_cast<Eigen::Index>(k)];
    return arg;
}

}  // namespace

VecC NonAutonomousLeading::X0(const VecR& phi) const {
    VecC out;
    for (const auto& t : terms) {
        const VecC c = t.x * std::exp(I_unit * phase_of(t.kappa, phi));
        if (out.size() == 0) out = c; else out += c;
    }
    return out;
}

VecC NonAutonomousLeading::S0(const VecR& phi) const {
    VecC out;
    for (const auto& t : terms) {
        const VecC c = t.s * std::exp(I_unit * phase_of(t.kappa, phi));
        if (out.size() == 0) out = c; else out += c;
    }
    return out;
}

NonAutonomousLeading leading_order(const FirstOrderSystem& sys, const MasterSubspace& master, const VecC& outer,
                                   const VecR& Omega, const StyleSpec& style, const ForcingOptions& options) {
    NonAutonomousLeading out;
    out.Omega = Omega;
    out.epsilon = sys.epsilon;
    if (sys.forcing.empty()) return out;
    for (const auto& h : sys.forcing) {
        if (static_cast<Eigen::Index>(h.kappa.size()) != Omega.size()) {
            throw ValidationError(fmt::format("forcing harmonics have {} frequencies but {} were given",
                                              h.kappa.size(), Omega.size()));
        }
    }
    const int M = master.M;
    const int N = sys.N;
    const double abs_tol = options.tolerance.resolved_abs(master.lambdas);
    const SpMatC Bs = sys.B.cast<cplx>();
    const SpMatC As = sys.A.cast<cplx>();
    const bool dense = N <= options.dense_limit;
    MatC Ad, Bd;
    if (dense) {
        Ad = MatR(sys.A).cast<cplx>();
        Bd = MatR(sys.B).cast<cplx>();
    }
    out.terms.resize(sys.forcing.size());
    std::vector<std::string> warnings(sys.forcing.size());

    parallel_for(sys.forcing.size(), [&](std::size_t h) {
        const Harmonic& harm = sys.forcing[h];
        ForcedTerm term;
        term.kappa = harm.kappa;
        for (std::size_t k = 0; k < harm.kappa.size(); ++k) term.frequency += harm.kappa[k] * Omega[static_cast<Eigen::Index>(k)];
        const cplx iw = I_unit * term.frequency;

        const VecC proj = master.U.adjoint() * harm.amplitude;
        term.s = VecC::Zero(M);
        for (int j = 0; j < M; ++j) {
            bool resonant = options.tolerance.resonant(iw, master.lambdas[j], abs_tol);
            for (const auto& [kappa, mode] : options.forced_resonances) resonant = resonant || (kappa == harm.kappa && mode == j);
            if (resonant) term.resonant_modes.push_back(j);
            if (style.for_mode(j) == Style::Graph || resonant) term.s[j] = proj[j];
        }
        for (Eigen::Index k = 0; k < outer.size(); ++k) {
            if (options.tolerance.resonant(iw, outer[k], abs_tol)) {
                warnings[h] = fmt::format(
                    "forcing harmonic {} (frequency {:.6g}) is near outer eigenvalue {:.6g}{:+.6g}i: reduced domain of "
                    "convergence",
                    fmt::join(harm.kappa, ","), term.frequency, outer[k].real(), outer[k].imag());
            }
        }

        const VecC rhs = harm.amplitude - Bs * (master.V * term.s);
        if (dense) {
            const MatC S = iw * Bd - Ad;
            Eigen::PartialPivLU<MatC> lu(S);
            term.condition = detail::lu_condition(lu);
            if (!(term.condition <= options.min_norm_condition)) {
                Eigen::CompleteOrthogonalDecomposition<MatC> cod;
                cod.setThreshold(1e-12);
                cod.compute(S);
                term.x = cod.solve(rhs);
                term.min_norm = true;
            } else {
                term.x = lu.solve(rhs);
            }
        } else {
            SpMatC S = iw * Bs - As;
            S.makeCompressed();
            Eigen::SparseLU<SpMatC> lu(S);
            if (lu.info() != Eigen::Success) {
                throw NumericalError(fmt::format("forcing solve for harmonic {} failed: singular matrix",
                                                 fmt::join(harm.kappa, ",")));
            }
            term.x = lu.solve(rhs);
        }
        if (!term.x.allFinite()) throw NumericalError("forcing solve produced non-finite values");
        out.terms[h] = std::move(term);
    });
    // Conjugate closure: make the -kappa entry the exact conjugate of the kappa entry.
    for (std::size_t h = 0; h < out.terms.size(); ++h) {
        auto& t = out.terms[h];
        bool positive = false;
        for (int k : t.kappa) {
            if (k != 0) {
                positive = k > 0;
                break;
            }
        }
        if (!positive) continue;
        std::vector<int> neg(t.kappa);
        for (int& k : neg) k = -k;
        for (auto& u : out.terms) {
            if (u.kappa == neg) {
                u.x = t.x.conjugate();
                VecC s = VecC::Zero(M);
                for (int j = 0; j < M; ++j) s[master.partner[static_cast<std::size_t>(j)]] = std::conj(t.s[j]);
                u.s = s;
            }
        }
    }
    for (auto& w : warnings) {
        if (!w.empty()) out.warnings.push_back(std::move(w));
    }
    out.warnings.push_back("state-dependent forcing terms of order |z| are not included (leading order only)");
    return out;
}

}  // namespace ssmkit
