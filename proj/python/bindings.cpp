#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kinv/oracle.hpp"
#include "kinv/parallel.hpp"
#include "kinv/runner.hpp"

namespace py = pybind11;
using namespace kinv;

namespace {

py::array_t<double> field_to_numpy(const GridFunction3& u) {
    const PhaseGrid& g = u.grid();
    py::array_t<double> out({g.Nt + 1, g.Nx, g.Nv});
    std::copy(u.data().begin(), u.data().end(), out.mutable_data());
    return out;
}

py::array_t<double> slice_to_numpy(const GridFunction2& u) {
    const PhaseGrid& g = u.grid();
    py::array_t<double> out({g.Nx, g.Nv});
    std::copy(u.data().begin(), u.data().end(), out.mutable_data());
    return out;
}

GridFunction3 field_from_numpy(const PhaseGrid& grid, py::array_t<double> arr) {
    auto a = arr.unchecked<3>();
    if (a.shape(0) != grid.Nt + 1 || a.shape(1) != grid.Nx || a.shape(2) != grid.Nv)
        throw ConfigError("array shape must be (Nt+1, Nx, Nv)");
    GridFunction3 out(grid);
    for (int k = 0; k <= grid.Nt; ++k)
        for (int i = 0; i < grid.Nx; ++i)
            for (int j = 0; j < grid.Nv; ++j) out.at(k, i, j) = a(k, i, j);
    out.ensure_finite();
    return out;
}

GridFunction2 slice_from_numpy(const PhaseGrid& grid, py::array_t<double> arr) {
    auto a = arr.unchecked<2>();
    if (a.shape(0) != grid.Nx || a.shape(1) != grid.Nv)
        throw ConfigError("array shape must be (Nx, Nv)");
    GridFunction2 out(grid);
    for (int i = 0; i < grid.Nx; ++i)
        for (int j = 0; j < grid.Nv; ++j) out.at(i, j) = a(i, j);
    out.ensure_finite();
    return out;
}

} // namespace

PYBIND11_MODULE(_kinv, m) {
    m.doc() = "Forward/inverse solvers for the modified kinetic transport equation";

    py::register_exception<ConfigError>(m, "KinvConfigError");
    py::register_exception<SolverError>(m, "KinvSolverError");
    py::register_exception<IoError>(m, "KinvIoError");

    py::class_<Geometry>(m, "Geometry")
        .def(py::init([](double L, double v0, double v1, double T) {
                 Geometry g{L, v0, v1, T};
                 g.validate();
                 return g;
             }),
             py::arg("L"), py::arg("v0"), py::arg("v1"), py::arg("T"))
        .def_readonly("L", &Geometry::L)
        .def_readonly("v0", &Geometry::v0)
        .def_readonly("v1", &Geometry::v1)
        .def_readonly("T", &Geometry::T)
        .def("flight_time_ok", &Geometry::flight_time_ok);

    py::class_<PhaseGrid>(m, "PhaseGrid")
        .def_readonly("Nx", &PhaseGrid::Nx)
        .def_readonly("Nv", &PhaseGrid::Nv)
        .def_readonly("Nt", &PhaseGrid::Nt)
        .def_readonly("dx", &PhaseGrid::dx)
        .def_readonly("dt", &PhaseGrid::dt)
        .def_readonly("x_centers", &PhaseGrid::x_centers)
        .def_readonly("v_nodes", &PhaseGrid::v_nodes)
        .def_readonly("v_weights", &PhaseGrid::v_weights)
        .def_readonly("flight_flag", &PhaseGrid::flight_flag)
        .def_property_readonly("geometry", [](const PhaseGrid& g) { return g.geom; });

    m.def("build_grid", &build_grid, py::arg("geometry"), py::arg("Nx"), py::arg("Nv"),
          py::arg("Nt"));

    m.def("inflow_set", [](const PhaseGrid& grid) {
        std::vector<std::pair<std::string, int>> out;
        for (const InflowFace& f : inflow_set(grid))
            out.emplace_back(f.side == BoundarySide::left ? "left" : "right", f.ordinate);
        return out;
    });

    m.def(
        "characteristic_foot",
        [](const Geometry& geom, double x, double v, double dt) {
            FootResult r = characteristic_foot(geom, x, v, dt);
            return std::make_pair(r.x, r.left_domain);
        },
        py::arg("geometry"), py::arg("x"), py::arg("v"), py::arg("dt"));

    py::class_<Expression>(m, "Expression")
        .def_static("parse", [](const std::string& s) { return Expression::parse(s); })
        .def("__str__", &Expression::str)
        .def("eval", [](const Expression& e, py::kwargs kw) {
            Bindings b;
            if (kw.contains("x")) b.x = kw["x"].cast<double>();
            if (kw.contains("v")) b.v = kw["v"].cast<double>();
            if (kw.contains("t")) b.t = kw["t"].cast<double>();
            if (kw.contains("vp")) b.vp = kw["vp"].cast<double>();
            return e.eval(b);
        });

    py::class_<AlphaSpec>(m, "AlphaSpec")
        .def_static("make",
                    [](const std::string& family, double c) { return AlphaSpec::make(family, c); },
                    py::arg("family"), py::arg("c") = 1.0)
        .def_readonly("C1", &AlphaSpec::C1)
        .def_readonly("C2", &AlphaSpec::C2)
        .def_property_readonly("family",
                               [](const AlphaSpec& a) { return family_name(a.family); });

    m.def(
        "alpha_eval",
        [](const AlphaSpec& spec, double u) {
            AlphaValue a = alpha_eval(spec, u);
            return std::make_tuple(a.a, a.da, a.dda);
        },
        py::arg("spec"), py::arg("u"));

    py::class_<Violation>(m, "Violation")
        .def_readonly("code", &Violation::code)
        .def_readonly("message", &Violation::message)
        .def_readonly("hard", &Violation::hard);

    py::class_<ProblemSpec>(m, "ProblemSpec")
        .def_property_readonly("grid", [](const ProblemSpec& s) { return s.grid; })
        .def_property_readonly("mode", [](const ProblemSpec& s) { return mode_name(s.mode); })
        .def_property_readonly("psi", [](const ProblemSpec& s) -> py::object {
            if (!s.psi) return py::none();
            return slice_to_numpy(*s.psi);
        });

    m.def("load_problem", &load_problem, py::arg("path"));
    m.def("problem_from_json", &problem_from_json, py::arg("json_text"),
          py::arg("base_dir") = std::filesystem::path());
    m.def("validate_problem", &validate_problem);

    m.def(
        "sample_xt",
        [](const std::string& expr, const PhaseGrid& grid) {
            return field_to_numpy(sample_xt(Expression::parse(expr), grid));
        },
        py::arg("expr"), py::arg("grid"));
    m.def(
        "sample_xv",
        [](const std::string& expr, const PhaseGrid& grid) {
            return slice_to_numpy(sample_xv(Expression::parse(expr), grid));
        },
        py::arg("expr"), py::arg("grid"));

    py::class_<PicardReport>(m, "PicardReport")
        .def_readonly("iterations", &PicardReport::iterations)
        .def_readonly("residual_history", &PicardReport::residual_history)
        .def_readonly("contraction_ratios", &PicardReport::contraction_ratios)
        .def_readonly("converged", &PicardReport::converged);

    py::class_<NewtonReport>(m, "NewtonReport")
        .def_readonly("iterations", &NewtonReport::iterations)
        .def_readonly("initial_residual", &NewtonReport::initial_residual)
        .def_readonly("residual_history", &NewtonReport::residual_history)
        .def_readonly("step_norms", &NewtonReport::step_norms)
        .def_readonly("damping_factors", &NewtonReport::damping_factors)
        .def_readonly("converged", &NewtonReport::converged)
        .def_readonly("newton_tol", &NewtonReport::newton_tol);

    py::class_<NormReport>(m, "NormReport")
        .def_readonly("sup", &NormReport::sup)
        .def_readonly("l2", &NormReport::l2)
        .def_readonly("sup_dt", &NormReport::sup_dt)
        .def_readonly("sup_stream", &NormReport::sup_stream)
        .def_readonly("trace_sup", &NormReport::trace_sup)
        .def_readonly("h_inf", &NormReport::h_inf)
        .def_readonly("w_inf_t", &NormReport::w_inf_t);

    m.def(
        "solve_forward",
        [](const ProblemSpec& spec, py::object F) {
            GridFunction3 F_field = F.is_none()
                                        ? (spec.F_known ? *spec.F_known : GridFunction3(spec.grid))
                                        : field_from_numpy(spec.grid, F.cast<py::array_t<double>>());
            NonlinearForwardResult r = solve_nonlinear_forward(spec, F_field);
            return std::make_tuple(field_to_numpy(r.u), r.picard);
        },
        py::arg("spec"), py::arg("F") = py::none(),
        "Solve the direct problem; F defaults to the configured source.");

    m.def(
        "norms",
        [](const ProblemSpec& spec, py::array_t<double> u) {
            return norms(field_from_numpy(spec.grid, u));
        },
        py::arg("spec"), py::arg("u"));

    m.def(
        "apply_S",
        [](const ProblemSpec& spec, py::array_t<double> u) {
            return field_to_numpy(apply_S(field_from_numpy(spec.grid, u), spec));
        },
        py::arg("spec"), py::arg("u"));

    m.def(
        "forward_map",
        [](const ProblemSpec& spec, py::array_t<double> chi) {
            ControlKind kind = spec.mode == Mode::inverse_absorption ? ControlKind::absorption
                                                                     : ControlKind::source;
            MapResult r = forward_map_M({slice_from_numpy(spec.grid, chi), kind}, spec);
            return std::make_tuple(slice_to_numpy(r.final), field_to_numpy(r.state));
        },
        py::arg("spec"), py::arg("chi"),
        "Final-time slice of the forward solution driven by the control chi.");

    m.def(
        "solve_inverse",
        [](const ProblemSpec& spec, py::object psi) {
            GridFunction2 data = psi.is_none()
                                     ? (spec.psi ? *spec.psi : GridFunction2(spec.grid))
                                     : slice_from_numpy(spec.grid, psi.cast<py::array_t<double>>());
            InverseResult r = solve_inverse(spec, data);
            return std::make_tuple(slice_to_numpy(r.control), field_to_numpy(r.state), r.report);
        },
        py::arg("spec"), py::arg("psi") = py::none(),
        "Recover the stationary factor from final-time data.");

    m.def(
        "oracle_inverse",
        [](const ProblemSpec& spec, py::array_t<double> psi) {
            return slice_to_numpy(oracle_inverse(spec, slice_from_numpy(spec.grid, psi)));
        },
        py::arg("spec"), py::arg("psi"),
        "Dense direct-factorization inverse (zero alpha family only).");

    m.def(
        "convergence_study",
        [](int case_id, int refinements) {
            std::vector<std::tuple<double, double, py::object>> rows;
            for (const ConvergenceRow& r : convergence_study(case_id, refinements))
                rows.emplace_back(r.h, r.error,
                                  r.order_na ? py::object(py::none()) : py::cast(r.order));
            return rows;
        },
        py::arg("case_id"), py::arg("refinements") = 3);

    py::class_<RunManifest>(m, "RunManifest")
        .def_readonly("command", &RunManifest::command)
        .def_readonly("artifacts", &RunManifest::artifacts)
        .def_readonly("exit_status", &RunManifest::exit_status)
        .def_readonly("exit_code", &RunManifest::exit_code)
        .def_readonly("wall_time", &RunManifest::wall_time);

    m.def(
        "run_forward",
        [](const std::filesystem::path& config, const std::filesystem::path& out) {
            return run_forward(config, out);
        },
        py::arg("config"), py::arg("out"));
    m.def(
        "run_inverse",
        [](const std::filesystem::path& config, const std::filesystem::path& out) {
            return run_inverse(config, out);
        },
        py::arg("config"), py::arg("out"));
    m.def(
        "run_verify",
        [](const std::string& suite, const std::filesystem::path& config,
           const std::filesystem::path& out) { return run_verify(suite, config, out); },
        py::arg("suite"), py::arg("config"), py::arg("out"));

    m.def("set_max_threads", &set_max_threads, py::arg("n"));
}
