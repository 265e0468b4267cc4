#include "ssmkit/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "lu_condition.hpp"
#include "ssmkit/parallel.hpp"

namespace ssmkit {

namespace {

std::string tuple_label(const MultiIndex& t) {
    std::string s = "(";
    for (std::size_t k = 0; k < t.size(); ++k) s += fmt::format("{}{}", k ? "," : "", t[k] + 1);
    return s + ")";
}

VecC kron_next(const VecC& prev, const VecC& p) {
    VecC out(prev.size() * p.size());
    for (Eigen::Index a = 0; a < prev.size(); ++a) out.segment(a * p.size(), p.size()) = prev[a] * p;
    return out;
}

struct Group {
    cplx lambda;
    std::vector<Eigen::Index> columns;
};

// Columns grouped by lambda_l. Sums are bit-identical over permutations, so exact keys
// already merge most of them; the tolerance pass merges remaining roundoff twins.
std::vector<Group> group_columns(const VecC& lam) {
    std::map<std::pair<double, double>, std::vector<Eigen::Index>> exact;
    for (Eigen::Index l = 0; l < lam.size(); ++l) exact[{lam[l].real(), lam[l].imag()}].push_back(l);
    std::vector<Group> out;
    for (auto& [key, cols] : exact) {
        const cplx v(key.first, key.second);
        if (!out.empty() && std::abs(out.back().lambda - v) <= 1e-14 * std::max(1.0, std::abs(v))) {
            out.back().columns.insert(out.back().columns.end(), cols.begin(), cols.end());
        } else {
            out.push_back({v, cols});
        }
    }
    return out;
}

double min_gap(cplx lambda, const VecC& a, const VecC& b) {
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < a.size(); ++k) g = std::min(g, std::abs(lambda - a[k]));
    for (Eigen::Index k = 0; k < b.size(); ++k) g = std::min(g, std::abs(lambda - b[k]));
    return g;
}

}  // namespace

bool StyleSpec::any(Style s, int M) const {
    for (int j = 0; j < M; ++j) {
        if (for_mode(j) == s) return true;
    }
    return false;
}

double ResonanceTolerance::resolved_abs(const VecC& master_lambdas) const {
    if (abs >= 0.0) return abs;
    const double top = master_lambdas.size() ? master_lambdas.cwiseAbs().maxCoeff() : 0.0;
    return 1e-8 * (top > 0.0 ? top : 1.0);
}

double ResonanceTolerance::gap(cplx lambda_l, cplx lambda_j) const {
    return imag_only ? std::abs(lambda_l.imag() - lambda_j.imag()) : std::abs(lambda_l - lambda_j);
}

bool ResonanceTolerance::resonant(cplx lambda_l, cplx lambda_j, double abs_tol) const {
    return gap(lambda_l, lambda_j) <= abs_tol + rel * std::abs(lambda_j);
}

ResonanceReport classify_resonances(const MasterSubspace& master, const VecC& outer_lambdas, int order,
                                    const ResonanceTolerance& tol) {
    if (order < 2) throw ValidationError("resonances are classified for orders >= 2");
    ResonanceReport rep;
    rep.order = order;
    rep.tol_abs = tol.resolved_abs(master.lambdas);
    rep.tol_rel = tol.rel;
    rep.imag_only = tol.imag_only;
    const VecC lam = kron_sum_lambdas(master.lambdas, order);
    MultiIndex t(static_cast<std::size_t>(order));
    for (Eigen::Index l = 0; l < lam.size(); ++l) {
        decode_position(static_cast<std::uint64_t>(l), master.M, t);
        for (int j = 0; j < master.M; ++j) {
            if (tol.resonant(lam[l], master.lambdas[j], rep.tol_abs)) {
                rep.inner.push_back({t, static_cast<std::uint64_t>(l), j, tol.gap(lam[l], master.lambdas[j])});
            }
        }
        for (Eigen::Index k = 0; k < outer_lambdas.size(); ++k) {
            if (tol.resonant(lam[l], outer_lambdas[k], rep.tol_abs)) {
                rep.outer.push_back({t, static_cast<std::uint64_t>(l), static_cast<int>(k),
                                     tol.gap(lam[l], outer_lambdas[k])});
            }
        }
    }
    return rep;
}

MatC assemble_rhs(const FirstOrderSystem& sys, const std::vector<MatC>& W, const std::vector<MatC>& R, int order,
                  int master_dim) {
    MatC C = compose(sys.F, W, order, master_dim);
    if (C.rows() == 0) C = MatC::Zero(sys.N, static_cast<Eigen::Index>(checked_power(static_cast<std::uint64_t>(master_dim), order)));
    const SpMatC B = sys.B.cast<cplx>();
    for (int j = 2; j <= order - 1; ++j) {
        const MatC& Rl = R[static_cast<std::size_t>(order - j + 1)];
        if (Rl.isZero(0.0)) continue;
        C -= B * apply_kron_sum(Rl, W[static_cast<std::size_t>(j)], order, j, master_dim);
    }
    return C;
}

OrderSolution solve_order(const FirstOrderSystem& sys, const MasterSubspace& master, const VecC& outer_lambdas,
                          int order, const MatC& C_i, const StyleSpec& style, const CohomologyOptions& options) {
    const int M = master.M;
    const int N = sys.N;
    const auto cols = static_cast<Eigen::Index>(checked_power(static_cast<std::uint64_t>(M), order));
    if (C_i.rows() != N || C_i.cols() != cols) {
        throw ValidationError(fmt::format("order-{} right-hand side is {}x{}, expected {}x{}", order, C_i.rows(),
                                          C_i.cols(), N, cols));
    }
    OrderSolution sol;
    auto& diag = sol.diagnostics;
    diag.order = order;
    diag.resonances = classify_resonances(master, outer_lambdas, order, options.tolerance);

    if (!diag.resonances.outer.empty()) {
        const auto& first = diag.resonances.outer.front();
        const std::string msg = fmt::format(
            "outer resonance at order {}: lambda_l for l = {} matches outer eigenvalue {} ({:.6g}{:+.6g}i), gap {:.3g}; "
            "{} pair(s) in total; the manifold does not exist as a smooth normal-form parametrization",
            order, tuple_label(first.tuple), M + first.mode + 1, outer_lambdas[first.mode].real(),
            outer_lambdas[first.mode].imag(), first.gap, diag.resonances.outer.size());
        const bool fatal = options.outer_policy == OuterPolicy::Error ||
                           (options.outer_policy == OuterPolicy::Auto && style.any(Style::NormalForm, M));
        if (fatal) throw OuterResonanceError(msg);
        diag.warnings.push_back(msg);
    }

    // Reduced dynamics.
    const MatC P = master.U.adjoint() * C_i;
    sol.R = MatC::Zero(M, cols);
    for (int j = 0; j < M; ++j) {
        if (style.for_mode(j) == Style::Graph) sol.R.row(j) = P.row(j);
    }
    for (const auto& pr : diag.resonances.inner) {
        if (style.for_mode(pr.mode) == Style::NormalForm) {
            const auto l = static_cast<Eigen::Index>(pr.position);
            sol.R(pr.mode, l) = P(pr.mode, l);
        }
    }

    const SpMatC Bs = sys.B.cast<cplx>();
    const MatC rhs = C_i - Bs * (master.V * sol.R);
    const VecC lam = kron_sum_lambdas(master.lambdas, order);
    const auto groups = group_columns(lam);
    sol.W = MatC::Zero(N, cols);
    diag.blocks.resize(groups.size());

    const bool dense = N <= options.dense_limit;
    MatC Ad, Bd;
    if (dense) {
        Ad = MatR(sys.A).cast<cplx>();
        Bd = MatR(sys.B).cast<cplx>();
    }
    const SpMatC As = sys.A.cast<cplx>();

    parallel_for(groups.size(), [&](std::size_t g) {
        const Group& grp = groups[g];
        MatC block(N, static_cast<Eigen::Index>(grp.columns.size()));
        for (std::size_t c = 0; c < grp.columns.size(); ++c) block.col(static_cast<Eigen::Index>(c)) = rhs.col(grp.columns[c]);
        BlockDiagnostic bd;
        bd.lambda = grp.lambda;
        bd.columns = static_cast<int>(grp.columns.size());
        MatC X;
        if (dense) {
            const MatC S = grp.lambda * Bd - Ad;
            Eigen::PartialPivLU<MatC> lu(S);
            bd.condition = detail::lu_condition(lu);
            if (!(bd.condition <= options.min_norm_condition)) {
                Eigen::CompleteOrthogonalDecomposition<MatC> cod;
                cod.setThreshold(1e-12);
                cod.compute(S);
                X = cod.solve(block);
                bd.min_norm = true;
            } else {
                X = lu.solve(block);
            }
        } else {
            const double gap = min_gap(grp.lambda, master.lambdas, outer_lambdas);
            bd.condition = std::max(1.0, std::abs(grp.lambda)) / std::max(gap, 1e-300);
            SpMatC S = grp.lambda * Bs - As;
            if (!(bd.condition <= options.min_norm_condition)) {
                // Exactly singular block: border with the resonant master directions so the
                // solution satisfies u_j^* B w = 0 (a kernel-complement choice).
                std::vector<int> J;
                for (int j = 0; j < M; ++j) {
                    if (std::abs(grp.lambda - master.lambdas[j]) * options.min_norm_condition <= std::max(1.0, std::abs(grp.lambda))) J.push_back(j);
                }
                const auto k = static_cast<Eigen::Index>(J.size());
                std::vector<Eigen::Triplet<cplx>> trip;
                for (int c = 0; c < S.outerSize(); ++c)
                    for (SpMatC::InnerIterator it(S, c); it; ++it) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                for (Eigen::Index m = 0; m < k; ++m) {
                    const VecC bv = Bs * master.V.col(J[static_cast<std::size_t>(m)]);
                    const VecC ub = (master.U.col(J[static_cast<std::size_t>(m)]).adjoint() * Bs).transpose();
                    for (int r = 0; r < N; ++r) {
                        if (bv[r] != cplx(0.0)) trip.emplace_back(r, N + static_cast<int>(m), bv[r]);
                        if (ub[r] != cplx(0.0)) trip.emplace_back(N + static_cast<int>(m), r, ub[r]);
                    }
                }
                SpMatC Sb(N + k, N + k);
                Sb.setFromTriplets(trip.begin(), trip.end());
                Sb.makeCompressed();
                Eigen::SparseLU<SpMatC> lu(Sb);
                if (lu.info() != Eigen::Success) throw NumericalError("bordered block factorization failed");
                MatC big = MatC::Zero(N + k, block.cols());
                big.topRows(N) = block;
                X = MatC(lu.solve(big)).topRows(N);
                bd.min_norm = true;
            } else {
                S.makeCompressed();
                Eigen::SparseLU<SpMatC> lu(S);
                if (lu.info() != Eigen::Success) throw NumericalError("block factorization failed");
                X = lu.solve(block);
            }
        }
        if (!X.allFinite()) throw NumericalError(fmt::format("order-{} block solve produced non-finite values", order));
        for (std::size_t c = 0; c < grp.columns.size(); ++c) sol.W.col(grp.columns[c]) = X.col(static_cast<Eigen::Index>(c));
        diag.blocks[g] = bd;
    });
    return sol;
}

bool ManifoldExpansion::is_conjugate_symmetric(const VecC& p, double tol) const {
    for (int j = 0; j < M(); ++j) {
        if (std::abs(p[master.partner[static_cast<std::size_t>(j)]] - std::conj(p[j])) > tol) return false;
    }
    return true;
}

VecC ManifoldExpansion::W_at(const VecC& p) const {
    VecC out = VecC::Zero(N());
    VecC pk = VecC::Ones(1);
    for (int i = 1; i <= order; ++i) {
        pk = kron_next(pk, p);
        out += W[static_cast<std::size_t>(i)] * pk;
    }
    return out;
}

VecC ManifoldExpansion::R_at(const VecC& p) const {
    VecC out = VecC::Zero(M());
    VecC pk = VecC::Ones(1);
    for (int i = 1; i <= order; ++i) {
        pk = kron_next(pk, p);
        out += R[static_cast<std::size_t>(i)] * pk;
    }
    return out;
}

VecC ManifoldExpansion::DW_times(const VecC& p, const VecC& q) const {
    VecC out = W[1] * q;
    VecC pk = p;  // p^{(x)(i-1)}
    VecC dk = q;  // derivative of p^{(x)(i-1)} along q
    for (int i = 2; i <= order; ++i) {
        dk = kron_next(dk, p) + kron_next(pk, q);
        pk = kron_next(pk, p);
        out += W[static_cast<std::size_t>(i)] * dk;
    }
    return out;
}

ManifoldExpansion compute_manifold(const FirstOrderSystem& sys, const SpectrumResult& spectrum, int order,
                                   const StyleSpec& style, const CohomologyOptions& options) {
    if (order < 1) throw ValidationError("expansion order must be >= 1");
    const MasterSubspace& ms = spectrum.master;
    if (ms.M < 1 || ms.V.rows() != sys.N) throw ValidationError("master subspace does not match the system");
    if (!style.per_mode.empty() && static_cast<int>(style.per_mode.size()) != ms.M) {
        throw ValidationError(fmt::format("per-mode style lists {} entries for {} master modes", style.per_mode.size(), ms.M));
    }
    checked_power(static_cast<std::uint64_t>(ms.M), order);

    ManifoldExpansion me;
    me.order = order;
    me.master = ms;
    me.outer = spectrum.outer;
    me.style = style;
    me.tolerance = options.tolerance;
    me.W.assign(static_cast<std::size_t>(order + 1), MatC());
    me.R.assign(static_cast<std::size_t>(order + 1), MatC());
    me.W[1] = ms.V;
    me.R[1] = ms.lambdas.asDiagonal();
    for (int i = 2; i <= order; ++i) {
        const MatC C = assemble_rhs(sys, me.W, me.R, i, ms.M);
        OrderSolution sol = solve_order(sys, ms, spectrum.outer, i, C, style, options);
        me.W[static_cast<std::size_t>(i)] = std::move(sol.W);
        me.R[static_cast<std::size_t>(i)] = std::move(sol.R);
        me.diagnostics.push_back(std::move(sol.diagnostics));
    }
    return me;
}

}  // namespace ssmkit
