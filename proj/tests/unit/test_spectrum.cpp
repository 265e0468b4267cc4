#include <doctest.h>

#include <cmath>

#include "ssmkit/cohomology.hpp"
#include "ssmkit/spectrum.hpp"

using namespace ssmkit;

TEST_CASE("Lorenz center subspace") {
    const auto sys = lorenz_extended(1.0, 1.0);
    const auto sp = master_spectrum(sys, Selection::smallest(2));
    const MasterSubspace& ms = sp.master;
    REQUIRE(ms.M == 2);
    CHECK(std::abs(ms.lambdas[0]) <= 1e-14);
    CHECK(std::abs(ms.lambdas[1]) <= 1e-14);
    // Columns proportional to (1,1,0,0)/sqrt2 and (0,0,0,1), with V = U because B = I and A symmetric.
    MatC expected = MatC::Zero(4, 2);
    expected(0, 0) = expected(1, 0) = 1.0 / std::sqrt(2.0);
    expected(3, 1) = 1.0;
    CHECK((ms.V - expected).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((ms.U - ms.V).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(check_normalization(ms, sys) <= 1e-12);
    REQUIRE(sp.outer.size() == 2);
    CHECK(std::abs(sp.outer[0] - cplx(-1.0, 0.0)) <= 1e-12);
    CHECK(std::abs(sp.outer[1] - cplx(-2.0, 0.0)) <= 1e-12);
    CHECK(ms.partner == std::vector<int>{0, 1});
}

TEST_CASE("chain spectrum and pairing") {
    const auto sys = build_first_order(oscillator_chain(10, 1, 1, 0.1, 0.3));
    const auto sp = master_spectrum(sys, Selection::smallest(6));
    const auto& l = sp.master.lambdas;
    const double im[] = {0.2846, 0.5632, 0.8301};
    for (int p = 0; p < 3; ++p) {
        CHECK(std::abs(l[2 * p].imag() - im[p]) <= 1e-3);
        CHECK(l[2 * p + 1] == std::conj(l[2 * p]));
    }
    CHECK(std::abs(l[0].real() + 0.0041) <= 1e-3);
    CHECK(std::abs(l[2].real() + 0.0159) <= 1e-3);
    CHECK(std::abs(l[4].real() + 0.0345) <= 1e-3);
    CHECK(sp.master.partner == std::vector<int>{1, 0, 3, 2, 5, 4});
    CHECK(sp.master.is_conjugate_closed());
    CHECK(check_normalization(sp.master, sys) <= 1e-10);
    CHECK(eigen_residual(sp.master, sys) <= 1e-9);
    CHECK(sp.master.V.col(1).isApprox(sp.master.V.col(0).conjugate(), 0.0));
    // Symmetric systems use U = conj(V).
    CHECK((sp.master.U - sp.master.V.conjugate()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(sp.outer.size() == 10);
    CHECK(std::abs(sp.outer[0]) >= std::abs(l[5]) - 1e-12);
}

TEST_CASE("undamped single oscillator") {
    const auto sys = build_first_order(duffing(1.0, 0.0, 1.0, 0.0));
    const auto sp = master_spectrum(sys, Selection::smallest(2));
    CHECK(std::abs(sp.master.lambdas[0] - cplx(0, 1)) <= 1e-12);
    CHECK(std::abs(sp.master.lambdas[1] - cplx(0, -1)) <= 1e-12);
    CHECK(sp.outer.size() == 0);
}

TEST_CASE("non-symmetric systems use separate left eigenvectors") {
    MechanicalSystem mech = oscillator_chain(4, 1, 1, 0.05, 0.1);
    mech.C.coeffRef(0, 1) += 0.2;  // non-symmetric damping
    const auto sys = build_first_order(mech);
    CHECK_FALSE(sys.symmetric);
    const auto sp = master_spectrum(sys, Selection::smallest(4));
    CHECK(check_normalization(sp.master, sys) <= 1e-10);
    CHECK(eigen_residual(sp.master, sys) <= 1e-9);
    // Largest-magnitude entry of each v is real positive.
    for (int j = 0; j < 4; ++j) {
        Eigen::Index k;
        sp.master.V.col(j).cwiseAbs().maxCoeff(&k);
        if (j % 2 == 0) {
            CHECK(std::abs(sp.master.V(k, j).imag()) <= 1e-14);
            CHECK(sp.master.V(k, j).real() > 0.0);
        }
    }
}

TEST_CASE("normalization check reacts to rescaling") {
    const auto sys = build_first_order(oscillator_chain(10, 1, 1, 0.1, 0.3));
    auto sp = master_spectrum(sys, Selection::smallest(2));
    sp.master.V.col(0) *= 2.0;
    CHECK(check_normalization(sp.master, sys) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rescaled eigenvectors rescale the normal form monomially") {
    // v_j -> a_j v_j, u_j -> u_j / a_j keeps U^*BV = I; then R_i(j, l) scales by prod a_{l_k} / a_j.
    const auto sys = lorenz_extended(1.0, 1.0);
    const auto base = master_spectrum(sys, Selection::smallest(2));
    auto scaled = base;
    const double a0 = 2.0, a1 = 3.0;
    scaled.master.V.col(0) *= a0;
    scaled.master.V.col(1) *= a1;
    scaled.master.U.col(0) /= a0;
    scaled.master.U.col(1) /= a1;
    CHECK(check_normalization(scaled.master, sys) <= 1e-12);
    const auto m0 = compute_manifold(sys, base, 2);
    const auto m1 = compute_manifold(sys, scaled, 2);
    const double a[] = {a0, a1};
    for (int j = 0; j < 2; ++j) {
        for (int l = 0; l < 4; ++l) {
            const double factor = a[l / 2] * a[l % 2] / a[j];
            CHECK(std::abs(m1.R[2](j, l) - factor * m0.R[2](j, l)) <= 1e-12);
        }
    }
    CHECK(std::abs(m1.R[2](0, 1) + m1.R[2](0, 2) - 0.5 * a1) <= 1e-12);
}

TEST_CASE("selection rules") {
    const auto sys = build_first_order(oscillator_chain(10, 1, 1, 0.1, 0.3));
    CHECK_THROWS_AS(master_spectrum(sys, Selection::smallest(1)), ValidationError);
    CHECK_THROWS_AS(master_spectrum(sys, Selection::at({0, 2})), ValidationError);
    CHECK_THROWS_AS(master_spectrum(sys, Selection::at({0, 0})), ValidationError);
    CHECK_THROWS_AS(master_spectrum(sys, Selection::at({40})), ValidationError);
    CHECK_THROWS_AS(master_spectrum(sys, Selection::smallest(22)), ValidationError);
    const auto mode2 = master_spectrum(sys, Selection::at({2, 3}));
    CHECK(std::abs(mode2.master.lambdas[0].imag() - 0.5632) <= 1e-3);
    const auto slow = master_spectrum(sys, Selection::slowest(2));
    CHECK(slow.master.lambdas[0].real() >= slow.outer[0].real());
}

TEST_CASE("defective eigenvalues are rejected") {
    FirstOrderSystem sys;
    sys.N = 2;
    sys.A = SpMatR(2, 2);
    sys.A.insert(0, 1) = 1.0;
    sys.B = SpMatR(2, 2);
    sys.B.setIdentity();
    CHECK_THROWS_AS(master_spectrum(sys, Selection::smallest(2)), UnsupportedError);
}

TEST_CASE("shift-invert path agrees with the dense path") {
    const auto sys = build_first_order(oscillator_chain(10, 1, 1, 0.1, 0.3));
    SpectrumOptions opt;
    opt.method = SpectrumOptions::Method::ShiftInvert;
    opt.shift = cplx(0.0, 0.0);
    const auto a = master_spectrum(sys, Selection::smallest(4), 2, opt);
    const auto b = master_spectrum(sys, Selection::smallest(4), 2);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(a.master.lambdas[j] - b.master.lambdas[j]) <= 1e-10);
    CHECK(check_normalization(a.master, sys) <= 1e-10);
    CHECK(eigen_residual(a.master, sys) <= 1e-9);
    for (int j = 0; j < 4; ++j) {
        // Same vectors up to the deterministic phase convention.
        CHECK((a.master.V.col(j) - b.master.V.col(j)).norm() <= 1e-8);
    }
}
