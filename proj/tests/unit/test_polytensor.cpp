#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "ssmkit/polytensor.hpp"

using namespace ssmkit;

namespace {

// Sorted complex values for multiset comparison.
std::vector<cplx> sorted(const VecC& v) {
    std::vector<cplx> out(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
        if (std::abs(a.real() - b.real()) > 1e-9) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return out;
}

}  // namespace

TEST_CASE("index set ordering is lexicographic") {
    const auto set = index_set(3, 2);
    const std::vector<MultiIndex> expected{{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1},
                                           {1, 0, 0}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1}};
    CHECK(set.size() == 8);
    CHECK(set.tuples() == expected);

    const auto single = index_set(1, 4);
    CHECK(single.size() == 4);
    for (int a = 0; a < 4; ++a) CHECK(single.tuple(static_cast<std::uint64_t>(a)) == MultiIndex{a});

    const auto two_three = index_set(2, 3);
    CHECK(two_three.size() == 9);
    // (2,3) in 1-based terms is (1,2) here; 1-based position 6.
    const std::vector<int> t{1, 2};
    CHECK(two_three.position(t) + 1 == 6);
    for (std::uint64_t p = 0; p < two_three.size(); ++p) CHECK(two_three.position(two_three.tuple(p)) == p);
}

TEST_CASE("index set capacity guard") {
    CHECK_THROWS_AS(index_set(49, 2), ValidationError);
    CHECK_NOTHROW(index_set(48, 2));
    CHECK_THROWS_AS(index_set(0, 2), ValidationError);
    CHECK_THROWS_AS(checked_power(10, 15), ValidationError);
}

TEST_CASE("kron_power") {
    VecC e(2);
    e << 1.0, 0.0;
    VecC k3 = kron_power(e, 3);
    CHECK(k3.size() == 8);
    CHECK(k3[0] == cplx(1.0));
    CHECK(k3.tail(7).cwiseAbs().maxCoeff() == 0.0);

    VecC ab(2);
    ab << cplx(2.0, 1.0), cplx(-0.5, 3.0);
    VecC k2 = kron_power(ab, 2);
    CHECK(std::abs(k2[0] - ab[0] * ab[0]) < 1e-15);
    CHECK(std::abs(k2[1] - ab[0] * ab[1]) < 1e-15);
    CHECK(std::abs(k2[2] - ab[1] * ab[0]) < 1e-15);
    CHECK(std::abs(k2[3] - ab[1] * ab[1]) < 1e-15);

    std::mt19937 rng(7);
    const VecC p = oracle::random_matrix(rng, 3, 1).col(0);
    const VecC k = kron_power(p, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) CHECK(std::abs(k[9 * a + 3 * b + c] - p[a] * p[b] * p[c]) < 1e-14);
}

TEST_CASE("kron_sum_lambdas small cases") {
    VecC lam(2);
    lam << I_unit, -I_unit;
    const VecC s = kron_sum_lambdas(lam, 2);
    CHECK(s[0] == 2.0 * I_unit);
    CHECK(s[1] == cplx(0.0));
    CHECK(s[2] == cplx(0.0));
    CHECK(s[3] == -2.0 * I_unit);

    const VecC zero = VecC::Zero(2);
    for (int i = 1; i <= 4; ++i) CHECK(kron_sum_lambdas(zero, i).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kron_sum_lambdas is bit-identical over permutation orbits") {
    std::mt19937 rng(11);
    const VecC lam = oracle::random_matrix(rng, 3, 1).col(0);
    const VecC s = kron_sum_lambdas(lam, 3);
    for (std::uint64_t p = 0; p < 27; ++p) {
        auto t = index_set(3, 3).tuple(p);
        std::sort(t.begin(), t.end());
        CHECK(s[static_cast<Eigen::Index>(p)] == s[static_cast<Eigen::Index>(tuple_position(t, 3))]);
    }
}

TEST_CASE("kron_sum_lambdas matches eigenvalues of the dense Kronecker sum") {
    std::mt19937 rng(3);
    for (int M = 1; M <= 3; ++M) {
        for (int i = 1; i <= 3; ++i) {
            const VecC lam = oracle::random_matrix(rng, M, 1).col(0);
            // Similarity-transformed R_1 so the oracle does not see a diagonal matrix.
            const MatC T = oracle::random_matrix(rng, M, M) + 3.0 * MatC::Identity(M, M);
            const MatC R1 = T * lam.asDiagonal() * T.inverse();
            const MatC Rii = oracle::dense_kron_sum(R1, i, i, M);
            const VecC eig = Rii.eigenvalues();
            const auto a = sorted(kron_sum_lambdas(lam, i));
            const auto b = sorted(eig);
            for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-10);
        }
    }
}

TEST_CASE("PolyCoeffs accumulation and evaluation") {
    PolyCoeffs f(2, 2, 3);
    f.add(0, {0, 1}, 1.5);
    f.add(0, {0, 1}, 0.5);
    f.add(1, {2, 2}, -1.0);
    f.add(1, {2, 0}, 1.0);
    f.add(1, {2, 0}, -1.0);
    f.finalize();
    CHECK(f.nnz() == 2);
    VecR z(3);
    z << 2.0, 3.0, 5.0;
    const VecR v = f.evaluate(z);
    CHECK(v[0] == doctest::Approx(12.0));
    CHECK(v[1] == doctest::Approx(-25.0));

    CHECK_THROWS_AS(f.add(2, {0, 0}, 1.0), ValidationError);
    CHECK_THROWS_AS(f.add(0, {0, 3}, 1.0), ValidationError);
    CHECK_THROWS_AS(f.add(0, {0}, 1.0), ValidationError);
}

TEST_CASE("symmetrization keeps the polynomial and only the symmetric part matters") {
    std::mt19937 rng(5);
    const PolyCoeffs f = oracle::random_poly(rng, 3, 2, 3, 12);
    const PolyCoeffs s = f.symmetrized();
    for (int trial = 0; trial < 10; ++trial) {
        const VecR z = oracle::random_matrix(rng, 3, 1).real().col(0);
        CHECK((f.evaluate(z) - s.evaluate(z)).norm() < 1e-12);
    }
    const PolyCoeffs s2 = s.symmetrized();
    REQUIRE(s2.nnz() == s.nnz());
    for (std::size_t t = 0; t < s.nnz(); ++t) {
        CHECK(s2.row(t) == s.row(t));
        CHECK(std::equal(s2.index(t).begin(), s2.index(t).end(), s.index(t).begin()));
        CHECK(std::abs(s2.value(t) - s.value(t)) < 1e-15);
    }
}

TEST_CASE("jacobian matches finite differences") {
    std::mt19937 rng(9);
    const PolyCoeffs f = oracle::random_poly(rng, 3, 3, 3, 10);
    const VecR z = oracle::random_matrix(rng, 3, 1).real().col(0);
    MatR J = MatR::Zero(3, 3);
    f.add_jacobian(z, J);
    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
        VecR zp = z, zm = z;
        zp[c] += h;
        zm[c] -= h;
        const VecR fd = (f.evaluate(zp) - f.evaluate(zm)) / (2 * h);
        CHECK((fd - J.col(c)).norm() < 1e-8);
    }
}

TEST_CASE("compose degree bookkeeping") {
    std::mt19937 rng(13);
    const int N = 3, M = 2;
    std::vector<MatC> W{MatC(), oracle::random_matrix(rng, N, M), oracle::random_matrix(rng, N, 4)};
    std::vector<PolyCoeffs> cubic{oracle::random_poly(rng, 3, N, N, 6)};
    CHECK(compose(cubic, W, 1, M).cwiseAbs().maxCoeff() == 0.0);
    CHECK(compose(cubic, W, 2, M).cwiseAbs().maxCoeff() == 0.0);
    const MatC C3 = compose(cubic, W, 3, M);
    const MatC expected = oracle::dense(cubic[0]) * oracle::kron(oracle::kron(W[1], W[1]), W[1]);
    CHECK((C3 - expected).cwiseAbs().maxCoeff() < 1e-13);

    std::vector<PolyCoeffs> quad{oracle::random_poly(rng, 2, N, N, 5)};
    CHECK((compose(quad, W, 2, M) - oracle::dense(quad[0]) * oracle::kron(W[1], W[1])).cwiseAbs().maxCoeff() <
          1e-13);
    // Missing lower orders are a contract violation.
    CHECK_THROWS_AS(compose(quad, std::span<const MatC>(W.data(), 2), 3, M), ValidationError);
}

TEST_CASE("compose matches dense Kronecker assembly and substitution") {
    std::mt19937 rng(17);
    const int N = 3, M = 2, Gamma = 4;
    std::vector<PolyCoeffs> F{oracle::random_poly(rng, 2, N, N, 5), oracle::random_poly(rng, 3, N, N, 7)};
    std::vector<MatC> W{MatC()};
    for (int q = 1; q <= Gamma; ++q) W.push_back(oracle::random_matrix(rng, N, 1 << q));
    for (int i = 2; i <= Gamma; ++i) {
        const MatC Ci = compose(F, W, i, M);
        CHECK((Ci - oracle::dense_compose(F, W, i, M)).cwiseAbs().maxCoeff() < 1e-12);
    }
    // Substitution oracle: degree-i part of F(W(tp)) by a DFT in t.
    for (int trial = 0; trial < 20; ++trial) {
        const VecC p = oracle::random_matrix(rng, M, 1).col(0) * 0.5;
        auto g = [&](cplx t) {
            const VecC w = oracle::evaluate_expansion(W, (t * p).eval());
            VecC out = VecC::Zero(N);
            for (const auto& Fk : F) out += Fk.evaluate(w);
            return out;
        };
        for (int i = 2; i <= Gamma; ++i) {
            const VecC lhs = compose(F, W, i, M) * kron_power(p, i);
            const VecC rhs = oracle::homogeneous_part(g, i, 3 * Gamma + 1);
            CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
        }
    }
}

TEST_CASE("apply_kron_sum") {
    std::mt19937 rng(19);
    const int N = 4, M = 2;
    // j = i with diagonal R_1 scales column l by lambda_l.
    VecC lam(2);
    lam << cplx(-0.1, 1.0), cplx(-0.1, -1.0);
    const MatC W3 = oracle::random_matrix(rng, N, 8);
    const MatC out = apply_kron_sum(lam.asDiagonal(), W3, 3, 3, M);
    const VecC sums = kron_sum_lambdas(lam, 3);
    for (int l = 0; l < 8; ++l) CHECK((out.col(l) - sums[l] * W3.col(l)).norm() < 1e-14);

    for (int i = 2; i <= 4; ++i) {
        for (int j = 1; j <= i; ++j) {
            const MatC R = oracle::random_matrix(rng, M, 1 << (i - j + 1));
            const MatC Wj = oracle::random_matrix(rng, N, 1 << j);
            const MatC dense = Wj * oracle::dense_kron_sum(R, i, j, M);
            CHECK((apply_kron_sum(R, Wj, i, j, M) - dense).cwiseAbs().maxCoeff() < 1e-13);
        }
    }
    CHECK(apply_kron_sum(MatC::Zero(2, 4), W3.leftCols(4), 3, 2, M).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("orbit positions") {
    const std::vector<int> counts{2, 1};
    const auto pos = orbit_positions(counts, 3);
    CHECK(pos == std::vector<std::uint64_t>{1, 2, 4});
    CHECK_THROWS_AS(orbit_positions(counts, 2), ValidationError);
}

TEST_CASE("E = D (x) B - C (x) A is singular when lambda mu = 1") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3, m = 2;
        // A v = lambda B v and C f = mu D f with lambda * mu = 1.
        const cplx lambda = oracle::random_matrix(rng, 1, 1)(0, 0) + 1.0;
        const MatC B = oracle::random_matrix(rng, n, n) + 3.0 * MatC::Identity(n, n);
        const MatC S = oracle::random_matrix(rng, n, n) + 3.0 * MatC::Identity(n, n);
        VecC ev = oracle::random_matrix(rng, n, 1).col(0);
        ev[0] = lambda;
        const MatC Sinv = S.inverse();
        const MatC A = B * S * ev.asDiagonal() * Sinv;
        const VecC v = S.col(0);
        const VecC u = (Sinv.row(0) * B.inverse()).adjoint();
        const MatC D = oracle::random_matrix(rng, m, m) + 3.0 * MatC::Identity(m, m);
        const MatC T = oracle::random_matrix(rng, m, m) + 3.0 * MatC::Identity(m, m);
        VecC mu = oracle::random_matrix(rng, m, 1).col(0);
        mu[0] = 1.0 / lambda;
        const MatC Tinv = T.inverse();
        const MatC C = D * T * mu.asDiagonal() * Tinv;
        const VecC f = T.col(0);
        const VecC e = (Tinv.row(0) * D.inverse()).adjoint();
        const MatC E = oracle::kron(D, B) - oracle::kron(C, A);
        const VecC fv = oracle::kron(f, v);
        const VecC eu = oracle::kron(e, u);
        CHECK((E * fv).norm() <= 1e-10 * std::max(1.0, fv.norm()));
        CHECK((E.adjoint() * eu).norm() <= 1e-10 * std::max(1.0, eu.norm()));
        // Control: without the engineered relation E is nonsingular.
        const MatC C2 = D * T * (mu * 1.7).asDiagonal() * Tinv;
        const MatC E2 = oracle::kron(D, B) - oracle::kron(C2, A);
        CHECK((E2 * fv).norm() > 1e-3 * fv.norm());
    }
}
