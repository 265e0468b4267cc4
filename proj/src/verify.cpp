#include "ssmkit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <boost/numeric/odeint.hpp>
#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace ssmkit {

VecC invariance_residual_at(const FirstOrderSystem& sys, const ManifoldExpansion& manifold, const VecC& p) {
    const VecC w = manifold.W_at(p);
    const VecC dwr = manifold.DW_times(p, manifold.R_at(p));
    const SpMatC A = sys.A.cast<cplx>();
    const SpMatC B = sys.B.cast<cplx>();
    return B * dwr - A * w - sys.nonlinearity(w);
}

std::vector<double> log_radii(double r_min, double r_max, int count) {
    if (count < 2 || !(r_min > 0.0) || !(r_max > r_min)) throw ValidationError("need count >= 2 and 0 < r_min < r_max");
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
        out.push_back(r_max * std::pow(r_min / r_max, static_cast<double>(k) / (count - 1)));
    }
    return out;
}

ResidualReport invariance_residual(const FirstOrderSystem& sys, const ManifoldExpansion& manifold,
                                   const std::vector<double>& radii, const ResidualOptions& options) {
    if (radii.size() < 2) throw ValidationError("residual check needs at least two radii");
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double r = radii[k];
        if (!(r > 0.0 && r <= 0.1)) throw ValidationError(fmt::format("residual radius {} outside (0, 0.1]", r));
        if (k > 0 && !(r < radii[k - 1])) throw ValidationError("residual radii must be strictly decreasing");
    }
    if (options.directions < 1) throw ValidationError("residual check needs at least one direction");
    const int M = manifold.M();
    const auto& partner = manifold.master.partner;

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss;
    std::vector<VecC> dirs;
    for (int d = 0; d < options.directions; ++d) {
        VecC p = VecC::Zero(M);
        for (int j = 0; j < M; ++j) {
            const int pj = partner[static_cast<std::size_t>(j)];
            if (pj == j) {
                p[j] = gauss(rng);
            } else if (j < pj) {
                p[j] = cplx(gauss(rng), gauss(rng));
                p[pj] = std::conj(p[j]);
            }
        }
        dirs.push_back(p / p.norm());
    }

    ResidualReport rep;
    rep.order = manifold.order;
    rep.radii = radii;
    for (double r : radii) {
        double acc = 0.0;
        for (const VecC& d : dirs) acc += invariance_residual_at(sys, manifold, r * d).squaredNorm();
        rep.residuals.push_back(std::sqrt(acc / static_cast<double>(dirs.size())));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(radii.size());
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double x = std::log(radii[k]);
        const double y = std::log(std::max(rep.residuals[k], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.expected_min = rep.order + 0.5;
    rep.expected_max = rep.order + 1.5;
    rep.pass = rep.slope >= rep.expected_min && rep.slope <= rep.expected_max;
    return rep;
}

double stiffness_ratio(const FirstOrderSystem& sys) {
    const VecC ev = all_eigenvalues(sys);
    const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
    double lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        const double a = std::abs(ev[k]);
        if (a > 1e-12 * top) lo = std::min(lo, a);
    }
    return std::isfinite(lo) ? top / lo : 1.0;
}

namespace {

using State = std::vector<double>;

struct Rhs {
    const FirstOrderSystem& sys;
    const VecR& Omega;
    bool forced;

    VecR g(const VecR& z, double t) const {
        VecR out = sys.A * z + sys.nonlinearity(z);
        if (forced) out += sys.external_force(Omega * t);
        return out;
    }
};

Trajectory integrate_explicit(const FirstOrderSystem& sys, const Rhs& rhs, const VecR& z0, double t_end,
                              double output_dt, const IntegrationOptions& opt) {
    namespace odeint = boost::numeric::odeint;
    Eigen::SparseLU<SpMatR> Blu;
    SpMatR B = sys.B;
    B.makeCompressed();
    Blu.compute(B);
    if (Blu.info() != Eigen::Success) throw NumericalError("explicit integration needs a nonsingular B");
    const auto N = static_cast<Eigen::Index>(sys.N);

    auto f = [&](const State& x, State& dx, double t) {
        const VecR z = Eigen::Map<const VecR>(x.data(), N);
        const VecR v = Blu.solve(rhs.g(z, t));
        dx.assign(v.data(), v.data() + N);
    };
    std::vector<double> times;
    const auto steps = static_cast<long>(std::floor(t_end / output_dt + 1e-9));
    for (long k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * output_dt);
    Trajectory out;
    State x(z0.data(), z0.data() + N);
    auto obs = [&](const State& s, double t) {
        out.t.push_back(t);
        out.z.push_back(Eigen::Map<const VecR>(s.data(), N));
    };
    odeint::integrate_times(odeint::make_dense_output(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<State>()), f, x,
                            times.begin(), times.end(), std::min(output_dt, 1e-2), obs);
    for (const auto& z : out.z) {
        if (!z.allFinite()) throw NumericalError("explicit integration diverged");
    }
    return out;
}

Trajectory integrate_implicit(const FirstOrderSystem& sys, const Rhs& rhs, const VecR& z0, double t_end,
                              double output_dt, const IntegrationOptions& opt) {
    const double h_req = opt.step > 0.0 ? opt.step : output_dt / 8.0;
    const int sub = std::max(1, static_cast<int>(std::ceil(output_dt / h_req - 1e-9)));
    const double h = output_dt / sub;
    const MatR A = MatR(sys.A);
    const MatR B = MatR(sys.B);
    const Eigen::PartialPivLU<MatR> Blu(B);
    const auto steps = static_cast<long>(std::floor(t_end / output_dt + 1e-9));

    Trajectory out;
    VecR z = z0;
    out.t.push_back(0.0);
    out.z.push_back(z);
    for (long k = 0; k < steps; ++k) {
        for (int s = 0; s < sub; ++s) {
            const double t0 = k * output_dt + s * h;
            const double t1 = t0 + h;
            const VecR g0 = rhs.g(z, t0);
            const VecR Bz0 = B * z;
            VecR x = z + h * Blu.solve(g0);  // explicit Euler predictor
            bool converged = false;
            for (int it = 0; it < opt.newton_max; ++it) {
                const VecR G = (B * x - Bz0) / h - 0.5 * (rhs.g(x, t1) + g0);
                const MatR J = B / h - 0.5 * (A + sys.nonlinearity_jacobian(x));
                const VecR dx = Eigen::PartialPivLU<MatR>(J).solve(G);
                x -= dx;
                if (!x.allFinite()) break;
                if (dx.norm() <= opt.newton_tol * std::max(1.0, x.norm())) {
                    converged = true;
                    break;
                }
            }
            if (!converged) {
                throw NumericalError(fmt::format("implicit trapezoidal Newton iteration failed at t = {:.6g}", t1));
            }
            z = x;
        }
        out.t.push_back((k + 1) * output_dt);
        out.z.push_back(z);
    }
    return out;
}

}  // namespace

Trajectory integrate_full(const FirstOrderSystem& sys, const VecR& z0, const VecR& Omega, double t_end,
                          double output_dt, const IntegrationOptions& options) {
    if (z0.size() != sys.N) throw ValidationError(fmt::format("initial state has {} entries, expected {}", z0.size(), sys.N));
    if (!(output_dt > 0.0) || !(t_end >= 0.0)) throw ValidationError("integration needs output_dt > 0 and t_end >= 0");
    const bool forced = options.forcing && !sys.forcing.empty() && sys.epsilon != 0.0;
    if (forced && Omega.size() != static_cast<Eigen::Index>(sys.forcing.front().kappa.size())) {
        throw ValidationError("forcing frequency vector does not match the harmonics");
    }
    Scheme scheme = options.scheme;
    if (scheme == Scheme::Auto) {
        scheme = stiffness_ratio(sys) > options.stiffness_limit ? Scheme::Implicit : Scheme::Explicit;
    }
    const Rhs rhs{sys, Omega, forced};
    return scheme == Scheme::Explicit ? integrate_explicit(sys, rhs, z0, t_end, output_dt, options)
                                      : integrate_implicit(sys, rhs, z0, t_end, output_dt, options);
}

SteadyState steady_state_amplitude(const FirstOrderSystem& sys, double Omega, const std::vector<int>& output_dofs,
                                   const VecR& z0, const SteadyStateOptions& options) {
    if (!(Omega > 0.0)) throw ValidationError("forcing frequency must be positive");
    for (int d : output_dofs) {
        if (d < 0 || d >= sys.N) throw ValidationError(fmt::format("output index {} outside the state", d + 1));
    }
    const double T = 2.0 * std::numbers::pi / Omega;
    const VecR W = VecR::Constant(1, Omega);
    SteadyState res;
    VecR z = z0;
    if (options.transient_periods > 0) {
        z = integrate_full(sys, z, W, options.transient_periods * T, T, options.integration).z.back();
    }
    res.periods = options.transient_periods;
    std::vector<double> prev;
    // Window phases stay aligned with the forcing because windows span whole periods.
    auto window = [&]() {
        const Trajectory tr = integrate_full(sys, z, W, options.window_periods * T, T / options.samples_per_period,
                                             options.integration);
        std::vector<double> amp(output_dofs.size(), 0.0);
        for (const auto& s : tr.z) {
            for (std::size_t d = 0; d < output_dofs.size(); ++d) amp[d] = std::max(amp[d], std::abs(s[output_dofs[d]]));
        }
        z = tr.z.back();
        res.periods += options.window_periods;
        return amp;
    };
    prev = window();
    while (true) {
        if (res.periods + options.window_periods > options.max_periods) {
            throw NumericalError(fmt::format("no periodic steady state after {} forcing periods", res.periods));
        }
        std::vector<double> cur = window();
        bool agree = true;
        for (std::size_t d = 0; d < cur.size(); ++d) {
            agree = agree && std::abs(cur[d] - prev[d]) <= options.agreement * std::max(cur[d], 1e-300);
        }
        if (agree) {
            res.amplitudes = cur;
            res.final_state = z;
            return res;
        }
        prev = std::move(cur);
    }
}

double mechanical_energy(const SpMatR& M, const SpMatR& K, const std::vector<PolyCoeffs>& f, const VecR& z) {
    const Eigen::Index n = M.rows();
    if (z.size() != 2 * n) throw ValidationError("state must hold positions and velocities");
    const VecR x = z.head(n);
    const VecR v = z.tail(n);
    double e = 0.5 * v.dot(M * v) + 0.5 * x.dot(K * x);
    for (const auto& fk : f) {
        if (static_cast<Eigen::Index>(fk.vars()) != n) throw ValidationError("energy needs a position-only nonlinearity");
        e += x.dot(fk.evaluate(x)) / (fk.degree() + 1);
    }
    return e;
}

}  // namespace ssmkit
