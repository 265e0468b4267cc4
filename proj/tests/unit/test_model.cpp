#include <doctest.h>

#include <algorithm>
#include <random>

#include "ssmkit/model.hpp"
#include "ssmkit/spectrum.hpp"

using namespace ssmkit;

namespace {

std::vector<cplx> sorted_eigs(const VecC& v) {
    std::vector<cplx> out(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
        if (std::abs(a.imag() - b.imag()) > 1e-9) return a.imag() < b.imag();
        return a.real() < b.real();
    });
    return out;
}

}  // namespace

TEST_CASE("undamped cubic oscillator in L2 form") {
    const MechanicalSystem mech = duffing(1.0, 0.0, 1.0, 2.0);
    const FirstOrderSystem sys = build_first_order(mech, Variant::L2, NChoice::MassM);
    MatR B(2, 2), A(2, 2);
    B << 0, 1, 1, 0;
    A << -1, 0, 0, 1;
    CHECK(MatR(sys.B).isApprox(B));
    CHECK(MatR(sys.A).isApprox(A));
    CHECK(sys.symmetric);
    VecR z(2);
    z << 0.7, -0.3;
    const VecR F = sys.nonlinearity(z);
    CHECK(F[0] == doctest::Approx(-2.0 * 0.7 * 0.7 * 0.7).epsilon(1e-15));
    CHECK(F[1] == 0.0);
}

TEST_CASE("chain first-order form is symmetric with N = 20") {
    const auto mech = oscillator_chain(10, 1.0, 1.0, 0.1, 0.3);
    const auto sys = build_first_order(mech, Variant::L2, NChoice::MassM);
    CHECK(sys.N == 20);
    CHECK(sys.symmetric);
    CHECK(is_symmetric(sys.A));
    CHECK(is_symmetric(sys.B));
    CHECK(sys.n_dof == 10);
    const auto def = build_first_order(mech);
    CHECK(def.symmetric);
    CHECK(MatR(def.A).isApprox(MatR(sys.A)));

    const auto l1 = build_first_order(mech, Variant::L1, NChoice::Identity);
    CHECK_FALSE(l1.symmetric);
    const auto l1k = build_first_order(mech, Variant::L1, NChoice::MinusK);
    CHECK(l1k.symmetric);
}

TEST_CASE("L1 and L2 forms share their eigenvalues") {
    const auto mech = oscillator_chain(10, 1.0, 1.0, 0.1, 0.3);
    const auto a = master_spectrum(build_first_order(mech, Variant::L2, NChoice::MassM), Selection::smallest(6));
    const auto b = master_spectrum(build_first_order(mech, Variant::L1, NChoice::Identity), Selection::smallest(6));
    const auto c = master_spectrum(build_first_order(mech, Variant::L1, NChoice::MinusK), Selection::smallest(6));
    for (Eigen::Index j = 0; j < 6; ++j) {
        CHECK(std::abs(a.master.lambdas[j] - b.master.lambdas[j]) <= 1e-10);
        CHECK(std::abs(a.master.lambdas[j] - c.master.lambdas[j]) <= 1e-10);
    }

    // Full multiset on a non-proportionally damped 4-DOF system.
    MechanicalSystem m4 = oscillator_chain(4, 1.0, 1.0, 0.05, 0.2);
    m4.C.coeffRef(0, 0) += 0.3;
    const auto e2 = sorted_eigs(all_eigenvalues(build_first_order(m4, Variant::L2, NChoice::MassM)));
    const auto e1 = sorted_eigs(all_eigenvalues(build_first_order(m4, Variant::L1, NChoice::Identity)));
    REQUIRE(e1.size() == e2.size());
    for (std::size_t k = 0; k < e1.size(); ++k) CHECK(std::abs(e1[k] - e2[k]) <= 1e-9 * std::abs(e1[k]));
}

TEST_CASE("nonlinearity block placement per variant") {
    const auto mech = oscillator_chain(3, 1.0, 1.0, 0.1, 0.3);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VecR z(6);
    for (int k = 0; k < 6; ++k) z[k] = u(rng);
    VecR f = VecR::Zero(3);
    for (const auto& fk : mech.f) f += fk.evaluate(VecR(z.head(3)));

    const VecR F1 = build_first_order(mech, Variant::L1, NChoice::Identity).nonlinearity(z);
    CHECK(F1.head(3).isZero(0.0));
    CHECK((F1.tail(3) + f).isZero(0.0));
    const VecR F2 = build_first_order(mech, Variant::L2, NChoice::MassM).nonlinearity(z);
    CHECK((F2.head(3) + f).isZero(0.0));
    CHECK(F2.tail(3).isZero(0.0));
}

TEST_CASE("oscillator chain data") {
    SUBCASE("n = 1 reduces to a wall-to-wall spring pair") {
        const auto mech = oscillator_chain(1, 1.0, 1.5, 0.0, 0.4);
        CHECK(MatR(mech.K)(0, 0) == doctest::Approx(3.0));
        VecR x(1);
        x << 0.6;
        CHECK(mech.f[0].evaluate(x)[0] == doctest::Approx(2.0 * 0.4 * 0.216).epsilon(1e-14));
    }
    SUBCASE("n = 3 hand evaluation") {
        const double kappa = 0.3;
        const auto mech = oscillator_chain(3, 1.0, 1.0, 0.1, kappa);
        VecR x(3);
        x << 1.0, 0.0, 0.0;
        const VecR f = mech.f[0].evaluate(x);
        CHECK(f[0] == doctest::Approx(2.0 * kappa));
        CHECK(f[1] == doctest::Approx(-kappa));
        CHECK(f[2] == doctest::Approx(0.0));
    }
    SUBCASE("matrices") {
        const auto mech = oscillator_chain(4, 2.0, 3.0, 0.5, 0.1);
        const MatR K = MatR(mech.K);
        CHECK(K(0, 0) == 6.0);
        CHECK(K(0, 1) == -3.0);
        CHECK(K(3, 3) == 6.0);
        CHECK(K(0, 2) == 0.0);
        CHECK(MatR(mech.M).isApprox(2.0 * MatR::Identity(4, 4)));
        CHECK(MatR(mech.C).isApprox(K / 6.0));
    }
    SUBCASE("master eigenvalues of the 10-mass chain") {
        const auto sp = master_spectrum(build_first_order(oscillator_chain(10, 1, 1, 0.1, 0.3)), Selection::smallest(2));
        CHECK(std::abs(sp.master.lambdas[0] - cplx(-0.0041, 0.2846)) <= 1e-3);
        CHECK(std::abs(sp.master.lambdas[1] - cplx(-0.0041, -0.2846)) <= 1e-3);
    }
    SUBCASE("odd nonlinearity") {
        const auto mech = oscillator_chain(10, 1, 1, 0.1, 0.3);
        std::mt19937 rng(3);
        std::normal_distribution<double> g;
        for (int t = 0; t < 20; ++t) {
            VecR x(10);
            for (int k = 0; k < 10; ++k) x[k] = g(rng);
            const VecR a = mech.f[0].evaluate(x);
            const VecR b = mech.f[0].evaluate(VecR(-x));
            CHECK((a + b).norm() <= 1e-14 * a.norm());
        }
    }
    SUBCASE("invalid parameters") {
        CHECK_THROWS_AS(oscillator_chain(0, 1, 1, 0, 0), ValidationError);
        CHECK_THROWS_AS(oscillator_chain(3, -1, 1, 0, 0), ValidationError);
        CHECK_THROWS_AS(oscillator_chain(3, 1, 1, -0.1, 0), ValidationError);
    }
}

TEST_CASE("extended Lorenz system") {
    const auto sys = lorenz_extended(1.0, 1.0);
    CHECK(sys.N == 4);
    CHECK(MatR(sys.B).isApprox(MatR::Identity(4, 4)));
    // Spectrum {0, 0, -1, -2}; see the sign note in the acceptance test.
    const VecC ev = all_eigenvalues(sys);
    std::vector<double> re;
    for (Eigen::Index k = 0; k < 4; ++k) {
        CHECK(std::abs(ev[k].imag()) <= 1e-14);
        re.push_back(ev[k].real());
    }
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(-2.0));
    CHECK(re[1] == doctest::Approx(-1.0));
    CHECK(std::abs(re[2]) <= 1e-14);
    CHECK(std::abs(re[3]) <= 1e-14);

    REQUIRE(sys.F.size() == 1);
    const PolyCoeffs& F2 = sys.F[0];
    CHECK(F2.degree() == 2);
    CHECK(F2.nnz() == 3);
    std::vector<std::tuple<std::size_t, int, int, double>> got;
    for (std::size_t t = 0; t < F2.nnz(); ++t) got.emplace_back(F2.row(t), F2.index(t)[0], F2.index(t)[1], F2.value(t).real());
    const std::vector<std::tuple<std::size_t, int, int, double>> want{{1, 0, 2, -1.0}, {1, 0, 3, 1.0}, {2, 0, 1, 1.0}};
    CHECK(got == want);

    const VecR F = sys.nonlinearity(VecR(VecR::Ones(4)));
    CHECK(F.isApprox((VecR(4) << 0, 0, 1, 0).finished()));
    CHECK_THROWS_AS(lorenz_extended(0.0, 1.0), ValidationError);
}

TEST_CASE("construction errors") {
    MechanicalSystem mech = oscillator_chain(2, 1, 1, 0.1, 0.0);
    SUBCASE("singular N block") {
        mech.K = SpMatR(2, 2);
        CHECK_THROWS_AS(build_first_order(mech, Variant::L1, NChoice::MinusK), ValidationError);
    }
    SUBCASE("dimension mismatch") {
        mech.C = SpMatR(3, 3);
        CHECK_THROWS_AS(build_first_order(mech), ValidationError);
    }
    SUBCASE("forcing must be conjugate-closed") {
        mech.forcing.push_back({{1}, VecC::Ones(2)});
        CHECK_THROWS_AS(mech.validate(), ValidationError);
    }
    SUBCASE("cosine forcing shape length") {
        CHECK_THROWS_AS(add_cosine_forcing(mech, VecR::Ones(3), 0.1), ValidationError);
    }
}

TEST_CASE("external force is real and scaled by epsilon") {
    MechanicalSystem mech = oscillator_chain(10, 1, 1, 0.1, 0.3);
    add_cosine_forcing(mech, chain_forcing_shape(), 0.1);
    const auto sys = build_first_order(mech);
    const VecR phase = VecR::Constant(1, 0.3);
    const VecR f = sys.external_force(phase);
    CHECK(f.head(10).isApprox(0.1 * std::cos(0.3) * chain_forcing_shape(), 1e-14));
    CHECK(f.tail(10).isZero(0.0));
    CHECK(sys.external_force(phase, false).isApprox(f / 0.1));
}
