#include "ssmkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "ssmkit/parallel.hpp"

namespace ssmkit {

cplx PolarROM::poly(double rho) const {
    cplx out = lambda * rho;
    double r = rho;
    for (const cplx& g : gamma) {
        r *= rho * rho;
        out += g * r;
    }
    return out;
}

cplx PolarROM::dpoly(double rho) const {
    cplx out = lambda;
    double r2 = 1.0;
    int l = 0;
    for (const cplx& g : gamma) {
        ++l;
        r2 *= rho * rho;
        out += static_cast<double>(2 * l + 1) * g * r2;
    }
    return out;
}

double PolarROM::F(double rho, double Omega) const {
    const double av = a(rho);
    const double bv = b(rho, Omega);
    return av * av + bv * bv - std::norm(f);
}

std::array<double, 2> PolarROM::rhs(double rho, double psi, double Omega) const {
    const double c = std::cos(psi);
    const double s = std::sin(psi);
    return {a(rho) + c * f.real() + s * f.imag(), (b(rho, Omega) - s * f.real() + c * f.imag()) / rho};
}

double PolarROM::frequency(double rho) const {
    double w = lambda.imag();
    double r2 = 1.0;
    for (const cplx& g : gamma) {
        r2 *= rho * rho;
        w += g.imag() * r2;
    }
    return w;
}

bool PolarROM::conservative(double tol) const {
    if (std::abs(lambda.real()) > tol * std::abs(lambda)) return false;
    for (const cplx& g : gamma) {
        if (std::abs(g.real()) > tol * std::max(1.0, std::abs(g))) return false;
    }
    return true;
}

PolarROM extract_polar_rom(const ManifoldExpansion& manifold, const NonAutonomousLeading* nonaut, int eta) {
    const MasterSubspace& ms = manifold.master;
    if (ms.M != 2 || ms.partner.size() != 2 || ms.partner[0] != 1) {
        throw UnsupportedError("polar reduction needs a two-dimensional master subspace spanned by a conjugate pair");
    }
    if (manifold.style.for_mode(0) != Style::NormalForm || manifold.style.for_mode(1) != Style::NormalForm) {
        throw UnsupportedError("polar reduction needs the normal-form parametrization style");
    }
    if (ms.lambdas[0].imag() <= 0.0) throw UnsupportedError("first master eigenvalue must have positive imaginary part");
    if (eta < 1) throw ValidationError("eta must be a positive integer");

    PolarROM rom;
    rom.lambda = ms.lambdas[0];
    rom.eta = eta;
    for (int l = 1; 2 * l + 1 <= manifold.order; ++l) {
        const int deg = 2 * l + 1;
        const MatC& R = manifold.R[static_cast<std::size_t>(deg)];
        const std::vector<int> c0{l + 1, l};
        const std::vector<int> c1{l, l + 1};
        cplx g{0.0, 0.0};
        cplx g1{0.0, 0.0};
        for (auto pos : orbit_positions(c0, deg)) g += R(0, static_cast<Eigen::Index>(pos));
        for (auto pos : orbit_positions(c1, deg)) g1 += R(1, static_cast<Eigen::Index>(pos));
        if (std::abs(g1 - std::conj(g)) > 1e-8 * std::max(1.0, std::abs(g))) {
            throw NumericalError(fmt::format("reduced dynamics are not conjugate-symmetric at order {}", deg));
        }
        rom.gamma.push_back(g);
    }
    if (nonaut != nullptr) {
        if (nonaut->Omega.size() != 1 && !nonaut->terms.empty()) {
            throw UnsupportedError("polar reduction handles single-frequency forcing only");
        }
        if (const ForcedTerm* t = nonaut->find({eta})) rom.f = nonaut->epsilon * t->s[0];
    }
    return rom;
}

StabilityInfo stability_jacobian(const PolarROM& rom, double rho, double Omega) {
    if (!(rho > 0.0)) throw ValidationError("stability in polar coordinates needs rho > 0");
    StabilityInfo out;
    out.J << rom.da(rho), -rom.b(rho, Omega), rom.db(rho, Omega) / rho, rom.a(rho) / rho;
    const double tr = out.J.trace();
    const double det = out.J.determinant();
    const cplx disc = std::sqrt(cplx(tr * tr / 4.0 - det, 0.0));
    out.eigenvalues = {tr / 2.0 + disc, tr / 2.0 - disc};
    out.stable = out.eigenvalues[0].real() < 0.0 && out.eigenvalues[1].real() < 0.0;
    return out;
}

namespace {

double poly_eval(const std::vector<double>& c, double s, double* deriv = nullptr) {
    double v = 0.0;
    double d = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
        d = d * s + v;
        v = v * s + c[k];
    }
    if (deriv) *deriv = d;
    return v;
}

// Polynomial in s = rho^2 whose positive roots are the squared fixed-point amplitudes.
std::vector<double> amplitude_polynomial(const PolarROM& rom, double Omega) {
    const std::size_t L = rom.gamma.size();
    std::vector<double> alpha(L + 1), beta(L + 1);
    alpha[0] = rom.lambda.real();
    beta[0] = rom.lambda.imag() - rom.eta * Omega;
    for (std::size_t l = 0; l < L; ++l) {
        alpha[l + 1] = rom.gamma[l].real();
        beta[l + 1] = rom.gamma[l].imag();
    }
    std::vector<double> c(2 * L + 2, 0.0);
    for (std::size_t i = 0; i <= L; ++i) {
        for (std::size_t j = 0; j <= L; ++j) c[i + j + 1] += alpha[i] * alpha[j] + beta[i] * beta[j];
    }
    c[0] = -std::norm(rom.f);
    while (c.size() > 1 && c.back() == 0.0) c.pop_back();
    return c;
}

std::vector<double> real_positive_roots(const std::vector<double>& c) {
    const int d = static_cast<int>(c.size()) - 1;
    std::vector<double> out;
    if (d < 1) return out;
    MatR comp = MatR::Zero(d, d);
    for (int k = 1; k < d; ++k) comp(k, k - 1) = 1.0;
    for (int k = 0; k < d; ++k) comp(k, d - 1) = -c[static_cast<std::size_t>(k)] / c.back();
    Eigen::EigenSolver<MatR> es(comp, false);
    if (es.info() != Eigen::Success) throw NumericalError("companion eigenvalue solve failed");
    for (int k = 0; k < d; ++k) {
        const cplx r = es.eigenvalues()[k];
        if (r.real() <= 0.0 || std::abs(r.imag()) > 1e-6 * std::max(1.0, std::abs(r))) continue;
        out.push_back(r.real());
    }
    return out;
}

double polish_root(const std::vector<double>& c, double s) {
    double x = s;
    for (int it = 0; it < 60; ++it) {
        double dp = 0.0;
        const double p = poly_eval(c, x, &dp);
        if (dp == 0.0) break;
        const double nx = x - p / dp;
        if (!(nx > 0.0)) break;
        const bool done = std::abs(nx - x) <= 1e-15 * std::abs(x);
        x = nx;
        if (done) break;
    }
    // Bisection when Newton stalls on a tangency or leaves the bracket.
    const double p = poly_eval(c, x);
    if (p != 0.0) {
        for (double w = 1e-10; w <= 1e-2; w *= 10.0) {
            double lo = x * (1.0 - w);
            double hi = x * (1.0 + w);
            double plo = poly_eval(c, lo);
            if ((plo < 0.0) == (poly_eval(c, hi) < 0.0)) continue;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double pm = poly_eval(c, mid);
                if ((pm < 0.0) == (plo < 0.0)) {
                    lo = mid;
                    plo = pm;
                } else {
                    hi = mid;
                }
            }
            const double cand = 0.5 * (lo + hi);
            if (std::abs(poly_eval(c, cand)) <= std::abs(p)) x = cand;
            break;
        }
    }
    return x;
}

int auto_eta(const PolarROM& rom, double Omega_ref) {
    int best = 1;
    double gap = std::numeric_limits<double>::infinity();
    for (int e = 1; e <= 3; ++e) {
        const double g = std::abs(rom.lambda.imag() - e * Omega_ref);
        if (g < gap) {
            gap = g;
            best = e;
        }
    }
    return best;
}

double wrap_angle(double x) { return std::remainder(x, 2.0 * std::numbers::pi); }

}  // namespace

std::vector<double> fixed_point_amplitudes(const PolarROM& rom, double Omega) {
    if (std::abs(rom.f) == 0.0) throw ValidationError("reduced dynamics are unforced; use backbone instead");
    const auto c = amplitude_polynomial(rom, Omega);
    std::vector<double> rhos;
    const double tol = 1e-10 * std::max(std::norm(rom.f), 1.0);
    for (double s : real_positive_roots(c)) {
        const double sp = polish_root(c, s);
        const double rho = std::sqrt(sp);
        if (!(std::abs(rom.F(rho, Omega)) <= tol)) continue;
        bool dup = false;
        for (double r : rhos) dup = dup || std::abs(r - rho) <= 1e-9 * std::max(r, rho);
        if (!dup) rhos.push_back(rho);
    }
    std::sort(rhos.begin(), rhos.end());
    return rhos;
}

double fixed_point_phase(const PolarROM& rom, double rho, double Omega) {
    const double av = rom.a(rho);
    const double bv = rom.b(rho, Omega);
    return std::atan2(bv * rom.f.real() - av * rom.f.imag(), -av * rom.f.real() - bv * rom.f.imag());
}

VecR lift_state(const ManifoldExpansion& manifold, const NonAutonomousLeading* nonaut, double rho, double theta,
                double Omega_t) {
    VecC p(2);
    p[0] = std::polar(rho, theta);
    p[1] = std::conj(p[0]);
    VecR z = manifold.W_at(p).real();
    if (nonaut != nullptr && !nonaut->terms.empty() && nonaut->epsilon != 0.0) {
        z += nonaut->epsilon * nonaut->X0(VecR::Constant(1, Omega_t)).real();
    }
    return z;
}

namespace {

std::vector<double> lifted_amplitudes(const ManifoldExpansion& manifold, const NonAutonomousLeading* nonaut,
                                      double rho, double psi, int eta, const std::vector<int>& dofs, int phases) {
    std::vector<double> amp(dofs.size(), 0.0);
    for (int k = 0; k < phases; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / phases;
        const VecR z = lift_state(manifold, nonaut, rho, psi + eta * phi, phi);
        for (std::size_t d = 0; d < dofs.size(); ++d) amp[d] = std::max(amp[d], std::abs(z[dofs[d]]));
    }
    return amp;
}

void check_dofs(const std::vector<int>& dofs, int N) {
    for (int d : dofs) {
        if (d < 0 || d >= N) throw ValidationError(fmt::format("output index {} outside the state of size {}", d + 1, N));
    }
}

}  // namespace

std::vector<BackbonePoint> backbone(const ManifoldExpansion& manifold, const std::vector<double>& rho,
                                    const std::vector<int>& output_dofs, int phases) {
    check_dofs(output_dofs, manifold.N());
    const PolarROM rom = extract_polar_rom(manifold, nullptr, 1);
    if (!rom.conservative()) {
        throw ValidationError(fmt::format(
            "backbone needs undamped reduced dynamics (Re lambda = {:.3g}); use the forced response instead",
            rom.lambda.real()));
    }
    std::vector<BackbonePoint> out(rho.size());
    for (std::size_t k = 0; k < rho.size(); ++k) {
        if (!(rho[k] >= 0.0)) throw ValidationError("backbone amplitudes must be non-negative");
        out[k].rho = rho[k];
        out[k].omega = rom.frequency(rho[k]);
        out[k].amplitudes = lifted_amplitudes(manifold, nullptr, rho[k], 0.0, 1, output_dofs, phases);
    }
    return out;
}

ForcingOptions frc_forcing_options(const ForcingOptions& base, int eta) {
    ForcingOptions fo = base;
    fo.tolerance.imag_only = true;
    fo.forced_resonances.push_back({{eta}, 0});
    fo.forced_resonances.push_back({{-eta}, 1});
    return fo;
}

PolarROM rom_at(const FirstOrderSystem& sys, const ManifoldExpansion& manifold, double Omega, int eta,
                const ForcingOptions& base, NonAutonomousLeading* nonaut_out) {
    NonAutonomousLeading na = leading_order(sys, manifold.master, manifold.outer, VecR::Constant(1, Omega),
                                            manifold.style, frc_forcing_options(base, eta));
    PolarROM rom = extract_polar_rom(manifold, &na, eta);
    if (nonaut_out) *nonaut_out = std::move(na);
    return rom;
}

FrcResult frc_sweep(const FirstOrderSystem& sys, const ManifoldExpansion& manifold, const FrcOptions& options) {
    if (sys.forcing.empty()) throw ValidationError("system has no external forcing; use backbone instead");
    check_dofs(options.output_dofs, sys.N);
    std::vector<double> Omegas = options.Omegas;
    if (Omegas.empty()) {
        if (options.samples < 1) throw ValidationError("frequency sample count must be positive");
        if (!(options.Omega_max >= options.Omega_min) || !(options.Omega_min > 0.0)) {
            throw ValidationError("frequency range must satisfy 0 < min <= max");
        }
        for (int k = 0; k < options.samples; ++k) {
            const double t = options.samples == 1 ? 0.0 : static_cast<double>(k) / (options.samples - 1);
            Omegas.push_back(options.Omega_min + t * (options.Omega_max - options.Omega_min));
        }
    }
    for (double w : Omegas) {
        if (!(w > 0.0)) throw ValidationError("forcing frequencies must be positive");
    }
    FrcResult res;
    const PolarROM free_rom = extract_polar_rom(manifold, nullptr, 1);
    std::vector<double> sorted(Omegas);
    std::sort(sorted.begin(), sorted.end());
    res.eta = options.eta > 0 ? options.eta : auto_eta(free_rom, 0.5 * (sorted.front() + sorted.back()));

    std::vector<std::vector<FrcPoint>> per(Omegas.size());
    std::vector<std::vector<std::string>> warn(Omegas.size());
    parallel_for(Omegas.size(), [&](std::size_t k) {
        const double W = Omegas[k];
        NonAutonomousLeading na;
        const PolarROM rom = rom_at(sys, manifold, W, res.eta, options.forcing, &na);
        warn[k] = na.warnings;
        if (std::abs(rom.f) == 0.0) throw ValidationError("forcing does not reach the master modes; use backbone instead");
        for (double rho : fixed_point_amplitudes(rom, W)) {
            FrcPoint pt;
            pt.Omega = W;
            pt.rho = rho;
            pt.psi = fixed_point_phase(rom, rho, W);
            const StabilityInfo st = stability_jacobian(rom, rho, W);
            pt.stable = st.stable;
            pt.eigenvalues = st.eigenvalues;
            pt.residual = std::abs(rom.F(rho, W));
            pt.amplitudes = lifted_amplitudes(manifold, &na, rho, pt.psi, res.eta, options.output_dofs, options.phases);
            per[k].push_back(std::move(pt));
        }
    });
    for (std::size_t k = 0; k + 1 < per.size(); ++k) {
        const auto a = per[k].size();
        const auto b = per[k + 1].size();
        if ((a > b ? a - b : b - a) > 2) {
            warn[k].push_back(fmt::format("root count jumps from {} to {} between Omega = {:.6g} and {:.6g}", a, b,
                                          Omegas[k], Omegas[k + 1]));
        }
    }
    for (auto& v : per) res.points.insert(res.points.end(), v.begin(), v.end());
    std::sort(res.points.begin(), res.points.end(), [](const FrcPoint& x, const FrcPoint& y) {
        return x.Omega != y.Omega ? x.Omega < y.Omega : x.rho < y.rho;
    });
    for (auto& w : warn) {
        for (auto& s : w) {
            if (std::find(res.warnings.begin(), res.warnings.end(), s) == res.warnings.end()) res.warnings.push_back(s);
        }
    }
    return res;
}

namespace {

struct ChartExit {};

}  // namespace

RomTrajectory rom_integrate(const PolarROM& rom, double Omega, double rho0, double psi0, double t_end, double dt,
                            const ManifoldExpansion* manifold, const NonAutonomousLeading* nonaut, double rtol,
                            double atol) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 2>;
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw ValidationError("integration needs dt > 0 and t_end >= 0");
    if (!(rho0 >= 0.0)) throw ValidationError("initial amplitude must be non-negative");
    const double scale = std::max({rho0, std::abs(rom.f) / std::max(std::abs(rom.lambda), 1e-300), 1e-300});
    const double rho_switch = 1e-4 * scale;
    const cplx lin = rom.lambda - I_unit * static_cast<double>(rom.eta) * Omega;

    auto polar = [&](const State& x, State& dx, double) {
        if (x[0] < 0.5 * rho_switch) throw ChartExit{};
        const auto r = rom.rhs(x[0], x[1], Omega);
        dx = {r[0], r[1]};
    };
    auto cart = [&](const State& x, State& dx, double) {
        const cplx q(x[0], x[1]);
        cplx v = lin * q + rom.f;
        const double r2 = std::norm(q);
        double rp = 1.0;
        for (const cplx& g : rom.gamma) {
            rp *= r2;
            v += g * rp * q;
        }
        dx = {v.real(), v.imag()};
    };

    RomTrajectory out;
    bool cartesian = rho0 < rho_switch;
    State x = cartesian ? State{rho0 * std::cos(psi0), rho0 * std::sin(psi0)} : State{rho0, psi0};
    auto record = [&](double t) {
        double rho, psi;
        if (cartesian) {
            rho = std::hypot(x[0], x[1]);
            psi = std::atan2(x[1], x[0]);
        } else {
            rho = x[0];
            psi = wrap_angle(x[1]);
        }
        out.t.push_back(t);
        out.rho.push_back(rho);
        out.psi.push_back(psi);
        if (manifold) out.z.push_back(lift_state(*manifold, nonaut, rho, psi + rom.eta * Omega * t, Omega * t));
    };
    record(0.0);
    const auto steps = static_cast<long>(std::floor(t_end / dt + 1e-9));
    for (long k = 0; k < steps; ++k) {
        const double t0 = k * dt;
        const double t1 = (k + 1) * dt;
        if (!cartesian) {
            const State saved = x;
            try {
                odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(atol, rtol),
                                           polar, x, t0, t1, dt / 10.0);
            } catch (const ChartExit&) {
                x = {saved[0] * std::cos(saved[1]), saved[0] * std::sin(saved[1])};
                cartesian = true;
            }
        }
        if (cartesian) {
            odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(atol, rtol), cart, x,
                                       t0, t1, dt / 10.0);
            if (std::hypot(x[0], x[1]) > 4.0 * rho_switch) {
                x = {std::hypot(x[0], x[1]), std::atan2(x[1], x[0])};
                cartesian = false;
            }
        }
        if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw NumericalError("reduced-order integration diverged");
        record(t1);
    }
    return out;
}

}  // namespace ssmkit
