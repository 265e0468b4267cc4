#include "ssmkit/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <fmt/format.h>

namespace ssmkit {

namespace {

constexpr double kClusterTol = 1e-6;
constexpr double kTieTol = 1e-9;

struct Cluster {
    cplx value;
    int mult = 1;
    bool real = false;
};

double scale_of(cplx z) { return std::max(1.0, std::abs(z)); }

std::vector<Cluster> make_clusters(const VecC& ev) {
    std::vector<cplx> vals(ev.data(), ev.data() + ev.size());
    std::sort(vals.begin(), vals.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    std::vector<bool> used(vals.size(), false);
    std::vector<Cluster> out;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (used[i]) continue;
        cplx sum = vals[i];
        int count = 1;
        used[i] = true;
        for (std::size_t j = i + 1; j < vals.size(); ++j) {
            if (!used[j] && std::abs(vals[j] - vals[i]) <= kClusterTol * scale_of(vals[i])) {
                used[j] = true;
                sum += vals[j];
                ++count;
            }
        }
        Cluster c;
        c.value = sum / static_cast<double>(count);
        c.mult = count;
        c.real = std::abs(c.value.imag()) <= kClusterTol * scale_of(c.value);
        if (c.real) c.value = cplx(c.value.real(), 0.0);
        out.push_back(c);
    }
    return out;
}

bool tie(double a, double b) { return std::abs(a - b) <= kTieTol * std::max({1.0, std::abs(a), std::abs(b)}); }

// Shared tie-breaks: smaller |Im| first, then positive imaginary part first, then larger Re.
bool tie_break(cplx a, cplx b) {
    if (!tie(std::abs(a.imag()), std::abs(b.imag()))) return std::abs(a.imag()) < std::abs(b.imag());
    if ((a.imag() > 0) != (b.imag() > 0)) return a.imag() > 0;
    return a.real() > b.real();
}

bool magnitude_before(cplx a, cplx b) {
    if (!tie(std::abs(a), std::abs(b))) return std::abs(a) < std::abs(b);
    return tie_break(a, b);
}

bool decay_before(cplx a, cplx b) {
    if (!tie(a.real(), b.real())) return a.real() > b.real();
    return tie_break(a, b);
}

void sort_clusters(std::vector<Cluster>& cl, Selection::Kind kind) {
    auto cmp = [kind](const Cluster& a, const Cluster& b) {
        return kind == Selection::Kind::SlowestDecay ? decay_before(a.value, b.value)
                                                     : magnitude_before(a.value, b.value);
    };
    std::stable_sort(cl.begin(), cl.end(), cmp);
}

bool conjugates(const Cluster& a, const Cluster& b) {
    return !a.real && !b.real && a.mult == b.mult &&
           std::abs(a.value - std::conj(b.value)) <= 10 * kClusterTol * scale_of(a.value);
}

// Indices of the selected clusters (in cluster order) with conjugate closure verified.
std::vector<std::size_t> select_clusters(const std::vector<Cluster>& cl, const Selection& sel) {
    std::vector<std::size_t> chosen;
    if (sel.kind == Selection::Kind::Indices) {
        std::vector<int> owner;  // eigenvalue position -> cluster
        for (std::size_t c = 0; c < cl.size(); ++c) {
            for (int m = 0; m < cl[c].mult; ++m) owner.push_back(static_cast<int>(c));
        }
        std::vector<int> hits(cl.size(), 0);
        for (int idx : sel.indices) {
            if (idx < 0 || idx >= static_cast<int>(owner.size())) {
                throw ValidationError(fmt::format("master index {} out of range 1..{}", idx + 1, owner.size()));
            }
            ++hits[static_cast<std::size_t>(owner[static_cast<std::size_t>(idx)])];
        }
        if (std::set<int>(sel.indices.begin(), sel.indices.end()).size() != sel.indices.size()) {
            throw ValidationError("master indices must be distinct");
        }
        for (std::size_t c = 0; c < cl.size(); ++c) {
            if (hits[c] == 0) continue;
            if (hits[c] != cl[c].mult) {
                throw ValidationError("master selection splits a repeated eigenvalue");
            }
            chosen.push_back(c);
        }
    } else {
        if (sel.count < 1) throw ValidationError("master selection needs at least one eigenvalue");
        int total = 0;
        for (std::size_t c = 0; c < cl.size() && total < sel.count; ++c) {
            chosen.push_back(c);
            total += cl[c].mult;
        }
        if (total < sel.count) {
            throw ValidationError(fmt::format("requested {} master eigenvalues but only {} are available",
                                              sel.count, total));
        }
        if (total != sel.count) {
            throw ValidationError(fmt::format(
                "selecting {} eigenvalues splits a repeated eigenvalue; choose {} instead", sel.count, total));
        }
    }
    for (std::size_t c : chosen) {
        if (cl[c].real) continue;
        bool found = false;
        for (std::size_t d : chosen) found = found || (d != c && conjugates(cl[c], cl[d]));
        if (!found) {
            throw ValidationError(fmt::format(
                "master selection splits the conjugate pair {:.6g}{:+.6g}i; select both members",
                cl[c].value.real(), cl[c].value.imag()));
        }
    }
    return chosen;
}

// Reduced column echelon basis spanning the same space, columns scaled to unit norm.
MatC echelon(const MatC& V) {
    MatC T = V.transpose();  // k x N
    const Eigen::Index k = T.rows();
    const double tol = 1e-8 * std::max(T.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::Index row = 0;
    for (Eigen::Index col = 0; col < T.cols() && row < k; ++col) {
        Eigen::Index piv = row;
        const double best = T.col(col).segment(row, k - row).cwiseAbs().maxCoeff(&piv);
        if (best <= tol) continue;
        piv += row;
        T.row(piv).swap(T.row(row));
        T.row(row) /= T(row, col);
        for (Eigen::Index r = 0; r < k; ++r) {
            if (r != row) T.row(r) -= T(r, col) * T.row(row);
        }
        ++row;
    }
    MatC out = T.transpose();
    for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c).normalize();
    return out;
}

void phase_fix(VecC& v) {
    Eigen::Index at = 0;
    const double top = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= (1.0 - 1e-12) * top) {
            at = i;
            break;
        }
    }
    v *= std::conj(v[at]) / std::abs(v[at]);
}

void normalize_pair(MatC& V, MatC& U, const SpMatC& Bc, bool symmetric) {
    const Eigen::Index k = V.cols();
    const double bnorm = std::max(Bc.norm(), 1e-300);
    if (k == 1) {
        VecC v = V.col(0).normalized();
        phase_fix(v);
        if (symmetric) {
            const cplx s = (v.transpose() * (Bc * v)).value();
            if (std::abs(s) <= 1e-12 * bnorm) {
                throw UnsupportedError("eigenvector is B-isotropic (v^T B v = 0); cannot normalize symmetrically");
            }
            v /= std::sqrt(s);
            V.col(0) = v;
            U.col(0) = v.conjugate();
        } else {
            VecC u = U.col(0).normalized();
            const cplx c = (u.adjoint() * (Bc * v)).value();
            if (std::abs(c) <= 1e-10 * bnorm) {
                throw UnsupportedError("defective eigenvalue: left and right eigenvectors are B-orthogonal");
            }
            V.col(0) = v;
            U.col(0) = u / std::conj(c);
        }
        return;
    }
    V = echelon(V);
    for (Eigen::Index c = 0; c < k; ++c) {
        VecC v = V.col(c);
        phase_fix(v);
        V.col(c) = v;
    }
    if (symmetric) {
        for (Eigen::Index j = 0; j < k; ++j) {
            VecC v = V.col(j);
            for (Eigen::Index i = 0; i < j; ++i) v -= (V.col(i).transpose() * (Bc * v)).value() * V.col(i);
            const cplx s = (v.transpose() * (Bc * v)).value();
            if (std::abs(s) <= 1e-12 * bnorm * v.squaredNorm()) {
                throw UnsupportedError("repeated eigenvalue has a B-isotropic basis; cannot normalize symmetrically");
            }
            V.col(j) = v / std::sqrt(s);
        }
        U = V.conjugate();
    } else {
        U = echelon(U);
        const MatC G = U.adjoint() * (Bc * V);
        Eigen::FullPivLU<MatC> lu(G);
        if (lu.rank() < k || std::abs(lu.determinant()) <= 1e-12) {
            throw UnsupportedError("defective repeated eigenvalue: U^* B V is singular");
        }
        U = U * lu.inverse().adjoint();
    }
}

struct Basis {
    cplx lambda;
    MatC V, U;
};

Basis dense_basis(const MatR& A, const MatR& B, const Cluster& c) {
    const int k = c.mult;
    Basis out;
    out.lambda = c.value;
    auto take = [&](const auto& svd, auto to_complex) {
        const auto& s = svd.singularValues();
        const Eigen::Index n = s.size();
        const double tol = 1e-7 * std::max(s[0], 1e-300);
        int small = 0;
        for (Eigen::Index i = n; i-- > 0;) {
            if (s[i] <= tol) ++small; else break;
        }
        if (small < k) {
            throw UnsupportedError(fmt::format(
                "defective eigenvalue {:.6g}{:+.6g}i: algebraic multiplicity {} but only {} eigenvector(s)",
                c.value.real(), c.value.imag(), k, small));
        }
        out.V = to_complex(svd.matrixV().rightCols(k));
        out.U = to_complex(svd.matrixU().rightCols(k));
    };
    if (c.real) {
        const MatR S = A - c.value.real() * B;
        Eigen::BDCSVD<MatR> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
        take(svd, [](const MatR& m) { return MatC(m.cast<cplx>()); });
    } else {
        const MatC S = A.cast<cplx>() - c.value * B.cast<cplx>();
        Eigen::BDCSVD<MatC> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
        take(svd, [](const MatC& m) { return MatC(m); });
    }
    return out;
}

// --- shift-invert path -----------------------------------------------------------

MatC orthonormalize(const MatC& X) {
    Eigen::HouseholderQR<MatC> qr(X);
    return qr.householderQ() * MatC::Identity(X.rows(), X.cols());
}

VecC shift_invert_eigenvalues(const FirstOrderSystem& sys, int nev, const SpectrumOptions& opt) {
    const SpMatC Ac = sys.A.cast<cplx>();
    const SpMatC Bc = sys.B.cast<cplx>();
    SpMatC S = Ac - opt.shift * Bc;
    S.makeCompressed();
    Eigen::SparseLU<SpMatC> lu;
    lu.compute(S);
    if (lu.info() != Eigen::Success) {
        throw NumericalError("shift-invert factorization failed; the shift may be an eigenvalue");
    }
    const int p = std::min(sys.N, 2 * nev + 10);
    std::mt19937 rng(12345);
    std::normal_distribution<double> g;
    MatC Q(sys.N, p);
    for (Eigen::Index i = 0; i < Q.size(); ++i) Q.data()[i] = cplx(g(rng), g(rng));
    Q = orthonormalize(Q);
    VecC prev = VecC::Zero(nev);
    const double anorm = std::max(Ac.norm(), 1e-300), bnorm = std::max(Bc.norm(), 1e-300);
    for (int it = 0; it < opt.max_iterations; ++it) {
        MatC BQ = Bc * Q;
        MatC Z(sys.N, p);
        for (int c = 0; c < p; ++c) Z.col(c) = lu.solve(BQ.col(c));
        const MatC H = Q.adjoint() * Z;
        Eigen::ComplexEigenSolver<MatC> es(H);
        if (es.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz eigensolve did not converge");
        std::vector<int> order(static_cast<std::size_t>(p));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
        });
        VecC lam(nev);
        double worst = 0.0;
        for (int j = 0; j < nev; ++j) {
            const cplx theta = es.eigenvalues()[order[static_cast<std::size_t>(j)]];
            lam[j] = opt.shift + 1.0 / theta;
            const VecC v = Q * es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
            const double res = (Ac * v - lam[j] * (Bc * v)).norm() / ((anorm + std::abs(lam[j]) * bnorm) * v.norm());
            worst = std::max(worst, res);
        }
        if (worst <= std::max(opt.tolerance, 1e-14) * 1e3 && (lam - prev).cwiseAbs().maxCoeff() <= 1e-10 * scale_of(lam.cwiseAbs().maxCoeff())) {
            return lam;
        }
        prev = lam;
        Q = orthonormalize(Z);
    }
    throw NumericalError(fmt::format("shift-invert subspace iteration did not converge in {} iterations",
                                     opt.max_iterations));
}

Basis sparse_basis(const FirstOrderSystem& sys, const Cluster& c) {
    const int k = c.mult;
    const SpMatC Ac = sys.A.cast<cplx>();
    const SpMatC Bc = sys.B.cast<cplx>();
    const cplx delta = 1e-9 * scale_of(c.value) * cplx(1.0, 1.0);
    SpMatC S = Ac - (c.value + delta) * Bc;
    S.makeCompressed();
    Eigen::SparseLU<SpMatC> lu;
    lu.compute(S);
    if (lu.info() != Eigen::Success) throw NumericalError("inverse-iteration factorization failed");
    std::mt19937 rng(777);
    std::normal_distribution<double> g;
    MatC X(sys.N, k), Y(sys.N, k);
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        X.data()[i] = cplx(g(rng), g(rng));
        Y.data()[i] = cplx(g(rng), g(rng));
    }
    const SpMatC Bh = Bc.adjoint();
    for (int it = 0; it < 4; ++it) {
        MatC BX = Bc * orthonormalize(X), BY = Bh * orthonormalize(Y);
        for (int j = 0; j < k; ++j) {
            X.col(j) = lu.solve(BX.col(j));
            Y.col(j) = lu.adjoint().solve(BY.col(j));
        }
    }
    Basis out;
    out.V = orthonormalize(X);
    out.U = orthonormalize(Y);
    out.lambda = c.value;
    if (k == 1) {
        const VecC v = out.V.col(0), u = out.U.col(0);
        out.lambda = (u.adjoint() * (Ac * v))(0, 0) / (u.adjoint() * (Bc * v))(0, 0);
    }
    const double anorm = Ac.norm(), bnorm = Bc.norm();
    const double res = (Ac * out.V - out.lambda * (Bc * out.V)).norm() / (anorm + std::abs(out.lambda) * bnorm);
    if (res > 1e-6) {
        throw UnsupportedError(fmt::format("defective eigenvalue {:.6g}{:+.6g}i: no full set of eigenvectors",
                                           c.value.real(), c.value.imag()));
    }
    return out;
}

double relative_residual(const SpMatC& A, const SpMatC& B, cplx lambda, const VecC& v, bool left) {
    const double denom = (A.norm() + std::abs(lambda) * B.norm()) * v.norm();
    if (left) {
        const SpMatC Ah = A.adjoint(), Bh = B.adjoint();
        return (Ah * v - std::conj(lambda) * (Bh * v)).norm() / denom;
    }
    return (A * v - lambda * (B * v)).norm() / denom;
}

}  // namespace

bool MasterSubspace::is_conjugate_closed() const {
    if (static_cast<int>(partner.size()) != M) return false;
    for (int j = 0; j < M; ++j) {
        const int p = partner[static_cast<std::size_t>(j)];
        if (p < 0 || p >= M || partner[static_cast<std::size_t>(p)] != j) return false;
    }
    return true;
}

VecC all_eigenvalues(const FirstOrderSystem& sys) {
    const MatR A(sys.A), B(sys.B);
    Eigen::GeneralizedEigenSolver<MatR> ges(A, B, false);
    if (ges.info() != Eigen::Success) throw NumericalError("QZ generalized eigensolver did not converge");
    const VecC alphas = ges.alphas();
    const VecR betas = ges.betas();
    std::vector<cplx> ev;
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        if (std::abs(betas[i]) <= 1e-14 * std::max(1.0, std::abs(alphas[i]))) {
            throw NumericalError("infinite generalized eigenvalue; B is singular");
        }
        ev.push_back(alphas[i] / betas[i]);
    }
    std::stable_sort(ev.begin(), ev.end(), magnitude_before);
    return Eigen::Map<VecC>(ev.data(), static_cast<Eigen::Index>(ev.size()));
}

SpectrumResult master_spectrum(const FirstOrderSystem& sys, const Selection& select, int n_outer,
                               const SpectrumOptions& options) {
    sys.validate();
    if (n_outer < 0) throw ValidationError("n_outer must be non-negative");
    const bool dense = options.method == SpectrumOptions::Method::Dense ||
                       (options.method == SpectrumOptions::Method::Auto && sys.N <= options.dense_limit);
    const int wanted = select.kind == Selection::Kind::Indices
                           ? (select.indices.empty() ? 0 : *std::max_element(select.indices.begin(), select.indices.end()) + 1)
                           : select.count;
    if (wanted > sys.N || wanted < 1) {
        throw ValidationError(fmt::format("cannot select {} master eigenvalues from a {}-dimensional system", wanted, sys.N));
    }

    VecC eigenvalues;
    if (dense) {
        eigenvalues = all_eigenvalues(sys);
    } else {
        eigenvalues = shift_invert_eigenvalues(sys, std::min(sys.N, wanted + n_outer + 4), options);
    }
    std::vector<Cluster> cl = make_clusters(eigenvalues);
    // Indices always refer to the smallest-magnitude ordering.
    sort_clusters(cl, select.kind == Selection::Kind::SlowestDecay ? Selection::Kind::SlowestDecay
                                                                    : Selection::Kind::SmallestMagnitude);
    const auto chosen = select_clusters(cl, select);

    const MatR Ad(dense ? MatR(sys.A) : MatR());
    const MatR Bd(dense ? MatR(sys.B) : MatR());
    const SpMatC Bc = sys.B.cast<cplx>();

    SpectrumResult result;
    MasterSubspace& ms = result.master;
    for (std::size_t c : chosen) ms.M += cl[c].mult;
    ms.lambdas.resize(ms.M);
    ms.V.resize(sys.N, ms.M);
    ms.U.resize(sys.N, ms.M);
    ms.partner.assign(static_cast<std::size_t>(ms.M), -1);

    std::vector<int> start(cl.size(), -1);
    int col = 0;
    for (std::size_t c : chosen) {
        start[c] = col;
        col += cl[c].mult;
    }
    for (std::size_t c : chosen) {
        const int s = start[c];
        const int k = cl[c].mult;
        if (!cl[c].real && cl[c].value.imag() < 0) continue;  // filled from its partner
        Basis b = dense ? dense_basis(Ad, Bd, cl[c]) : sparse_basis(sys, cl[c]);
        if (cl[c].real) b.lambda = cplx(b.lambda.real(), 0.0);
        normalize_pair(b.V, b.U, Bc, sys.symmetric);
        for (int m = 0; m < k; ++m) {
            ms.lambdas[s + m] = b.lambda;
            ms.partner[static_cast<std::size_t>(s + m)] = s + m;
        }
        ms.V.middleCols(s, k) = b.V;
        ms.U.middleCols(s, k) = b.U;
        if (!cl[c].real) {
            std::size_t partner = cl.size();
            for (std::size_t d : chosen) {
                if (d != c && conjugates(cl[c], cl[d])) partner = d;
            }
            const int t = start[partner];
            for (int m = 0; m < k; ++m) {
                ms.lambdas[t + m] = std::conj(b.lambda);
                ms.partner[static_cast<std::size_t>(s + m)] = t + m;
                ms.partner[static_cast<std::size_t>(t + m)] = s + m;
            }
            ms.V.middleCols(t, k) = b.V.conjugate();
            ms.U.middleCols(t, k) = b.U.conjugate();
        }
    }

    std::vector<cplx> outer;
    for (std::size_t c = 0; c < cl.size() && static_cast<int>(outer.size()) < n_outer; ++c) {
        if (start[c] >= 0) continue;
        for (int m = 0; m < cl[c].mult && static_cast<int>(outer.size()) < n_outer; ++m) outer.push_back(cl[c].value);
    }
    result.outer = Eigen::Map<VecC>(outer.data(), static_cast<Eigen::Index>(outer.size()));

    ms.max_residual = eigen_residual(ms, sys);
    if (ms.max_residual > 1e-8) {
        throw NumericalError(fmt::format("master eigenpairs are inaccurate (relative residual {:.3g})", ms.max_residual));
    }
    const double dev = check_normalization(ms, sys);
    if (dev > 1e-9) throw NumericalError(fmt::format("master normalization failed (deviation {:.3g})", dev));
    return result;
}

double check_normalization(const MasterSubspace& ms, const FirstOrderSystem& sys) {
    const MatC G = ms.U.adjoint() * (sys.B.cast<cplx>() * ms.V);
    return (G - MatC::Identity(ms.M, ms.M)).cwiseAbs().maxCoeff();
}

double eigen_residual(const MasterSubspace& ms, const FirstOrderSystem& sys) {
    const SpMatC A = sys.A.cast<cplx>();
    const SpMatC B = sys.B.cast<cplx>();
    double worst = 0.0;
    for (int j = 0; j < ms.M; ++j) {
        worst = std::max(worst, relative_residual(A, B, ms.lambdas[j], ms.V.col(j), false));
        worst = std::max(worst, relative_residual(A, B, ms.lambdas[j], ms.U.col(j), true));
    }
    return worst;
}

}  // namespace ssmkit
