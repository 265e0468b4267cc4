#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ssmkit/analysis.hpp"
#include "ssmkit/io.hpp"
#include "ssmkit/parallel.hpp"
#include "ssmkit/serialize.hpp"
#include "ssmkit/verify.hpp"

namespace py = pybind11;
using namespace ssmkit;

namespace {

StyleSpec style_from(const std::string& s) {
    if (s == "normal_form") return StyleSpec::normal_form();
    if (s == "graph") return StyleSpec::graph();
    throw ValidationError("style must be 'normal_form' or 'graph'");
}

Selection selection_from(py::object select) {
    if (py::isinstance<py::int_>(select)) return Selection::smallest(select.cast<int>());
    return Selection::at(select.cast<std::vector<int>>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral submanifolds and reduced dynamics of polynomial systems";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<OuterResonanceError>(m, "OuterResonanceError", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    py::class_<MechanicalSystem>(m, "MechanicalSystem")
        .def_readonly("n", &MechanicalSystem::n)
        .def_property_readonly("M", [](const MechanicalSystem& s) { return MatR(s.M); })
        .def_property_readonly("C", [](const MechanicalSystem& s) { return MatR(s.C); })
        .def_property_readonly("K", [](const MechanicalSystem& s) { return MatR(s.K); })
        .def("nonlinearity",
             [](const MechanicalSystem& s, const VecR& x) {
                 VecR out = VecR::Zero(s.n);
                 for (const auto& fk : s.f) out += fk.evaluate(x);
                 return out;
             })
        .def("add_cosine_forcing", &add_cosine_forcing, py::arg("f0"), py::arg("epsilon"));

    py::class_<FirstOrderSystem>(m, "FirstOrderSystem")
        .def_readonly("N", &FirstOrderSystem::N)
        .def_readonly("epsilon", &FirstOrderSystem::epsilon)
        .def_readonly("symmetric", &FirstOrderSystem::symmetric)
        .def_property_readonly("A", [](const FirstOrderSystem& s) { return MatR(s.A); })
        .def_property_readonly("B", [](const FirstOrderSystem& s) { return MatR(s.B); })
        .def("nonlinearity", py::overload_cast<const VecR&>(&FirstOrderSystem::nonlinearity, py::const_));

    m.def("oscillator_chain", &oscillator_chain, py::arg("n"), py::arg("m") = 1.0, py::arg("k") = 1.0,
          py::arg("c") = 0.1, py::arg("kappa") = 0.3);
    m.def("duffing", &duffing, py::arg("m") = 1.0, py::arg("c") = 0.0, py::arg("k") = 1.0, py::arg("kappa") = 0.5);
    m.def("lorenz_extended", &lorenz_extended, py::arg("sigma") = 1.0, py::arg("beta") = 1.0);
    m.def("chain_forcing_shape", &chain_forcing_shape);
    m.def("first_order", py::overload_cast<const MechanicalSystem&>(&build_first_order));
    m.def("load_system", [](const std::filesystem::path& p) { return load_system(p); });

    py::class_<SpectrumResult>(m, "Spectrum")
        .def_property_readonly("lambdas", [](const SpectrumResult& s) { return s.master.lambdas; })
        .def_property_readonly("V", [](const SpectrumResult& s) { return s.master.V; })
        .def_property_readonly("U", [](const SpectrumResult& s) { return s.master.U; })
        .def_property_readonly("outer", [](const SpectrumResult& s) { return s.outer; });
    m.def(
        "master_spectrum",
        [](const FirstOrderSystem& sys, py::object select, int n_outer) {
            return master_spectrum(sys, selection_from(select), n_outer);
        },
        py::arg("sys"), py::arg("select") = 2, py::arg("n_outer") = 10,
        "select: count of smallest-magnitude eigenvalues, or a list of 0-based positions");

    py::class_<ManifoldExpansion>(m, "Manifold")
        .def_readonly("order", &ManifoldExpansion::order)
        .def_readonly("W", &ManifoldExpansion::W)
        .def_readonly("R", &ManifoldExpansion::R)
        .def("W_at", &ManifoldExpansion::W_at)
        .def("R_at", &ManifoldExpansion::R_at)
        .def("to_json", [](const ManifoldExpansion& me) { return manifold_json(me); });
    m.def(
        "compute_manifold",
        [](const FirstOrderSystem& sys, const SpectrumResult& spec, int order, const std::string& style,
           bool imag_only) {
            CohomologyOptions o;
            o.tolerance.imag_only = imag_only;
            return compute_manifold(sys, spec, order, style_from(style), o);
        },
        py::arg("sys"), py::arg("spectrum"), py::arg("order"), py::arg("style") = "normal_form",
        py::arg("imag_only") = false);

    py::class_<PolarROM>(m, "PolarROM")
        .def_readonly("lam", &PolarROM::lambda)
        .def_readonly("gamma", &PolarROM::gamma)
        .def_readonly("f", &PolarROM::f)
        .def_readonly("eta", &PolarROM::eta)
        .def("frequency", &PolarROM::frequency)
        .def("F", &PolarROM::F);
    m.def("polar_rom", [](const ManifoldExpansion& me) { return extract_polar_rom(me, nullptr, 1); });

    m.def(
        "backbone",
        [](const ManifoldExpansion& me, const std::vector<double>& rho) {
            std::vector<std::pair<double, double>> out;
            for (const auto& p : backbone(me, rho, {})) out.emplace_back(p.rho, p.omega);
            return out;
        },
        "List of (rho, omega) pairs.");

    m.def(
        "frc",
        [](const FirstOrderSystem& sys, const ManifoldExpansion& me, const std::vector<double>& Omegas,
           const std::vector<int>& dofs) {
            FrcOptions o;
            o.Omegas = Omegas;
            o.output_dofs = dofs;
            py::list out;
            for (const auto& p : frc_sweep(sys, me, o).points) {
                py::dict d;
                d["Omega"] = p.Omega;
                d["rho"] = p.rho;
                d["psi"] = p.psi;
                d["stable"] = p.stable;
                d["amplitudes"] = p.amplitudes;
                out.append(d);
            }
            return out;
        },
        py::arg("sys"), py::arg("manifold"), py::arg("Omegas"), py::arg("dofs") = std::vector<int>{},
        "Fixed points of the polar ROM at each forcing frequency; dofs are 0-based state indices.");

    m.def(
        "residual_slope",
        [](const FirstOrderSystem& sys, const ManifoldExpansion& me, double r_min, double r_max, int count) {
            const auto rep = invariance_residual(sys, me, log_radii(r_min, r_max, count));
            return py::make_tuple(rep.slope, rep.pass);
        },
        py::arg("sys"), py::arg("manifold"), py::arg("r_min") = 1e-4, py::arg("r_max") = 1e-2, py::arg("count") = 7);

    m.def("set_max_threads", &set_max_threads);
}
