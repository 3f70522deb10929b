#include "afem/adapt.hpp"
#include "afem/vtk.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace afem;

namespace {

py::array_t<double> vertices_array(const Mesh& mesh) {
    py::array_t<double> out({mesh.n_vertices(), 2});
    auto buf = out.mutable_unchecked<2>();
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        buf(v, 0) = mesh.vertices[v].x();
        buf(v, 1) = mesh.vertices[v].y();
    }
    return out;
}

py::array_t<int> elements_array(const Mesh& mesh) {
    py::array_t<int> out({mesh.n_elements(), 3});
    auto buf = out.mutable_unchecked<2>();
    for (int e = 0; e < mesh.n_elements(); ++e)
        for (int k = 0; k < 3; ++k) buf(e, k) = mesh.elements[e].v[k];
    return out;
}

/// Mesh plus the solution fields bundled for Python consumers; keeps the
/// mesh alive for the lifetime of the solution.
struct PySolution {
    std::shared_ptr<const Mesh> mesh;
    DiscreteSolution sol;

    Eigen::VectorXd control_centroids() const {
        Eigen::VectorXd u(mesh->n_elements());
        for (int e = 0; e < mesh->n_elements(); ++e)
            u[e] = sol.control_at(e, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        return u;
    }
};

py::dict history_dict(const AdaptiveHistory& hist) {
    py::dict out;
    const std::size_t n = hist.records.size();
    auto column = [&](auto getter) {
        py::array_t<double> arr(n);
        auto buf = arr.mutable_unchecked<1>();
        for (std::size_t i = 0; i < n; ++i) buf(i) = getter(hist.records[i]);
        return arr;
    };
    out["k"] = column([](const IterationRecord& r) { return double(r.k); });
    out["n_elem"] = column([](const IterationRecord& r) { return double(r.n_elem); });
    out["n_dof"] = column([](const IterationRecord& r) { return double(r.n_dof); });
    out["eta"] = column([](const IterationRecord& r) { return r.eta; });
    out["eta_y"] = column([](const IterationRecord& r) { return r.eta_y; });
    out["eta_p"] = column([](const IterationRecord& r) { return r.eta_p; });
    out["osc"] = column([](const IterationRecord& r) { return r.osc; });
    out["err_u"] = column([](const IterationRecord& r) { return r.err_u.value_or(nan("")); });
    out["err_y"] = column([](const IterationRecord& r) { return r.err_y.value_or(nan("")); });
    out["err_p"] = column([](const IterationRecord& r) { return r.err_p.value_or(nan("")); });
    out["grading"] = column([](const IterationRecord& r) { return r.grading; });
    out["marked"] = column([](const IterationRecord& r) { return double(r.marked); });
    out["seconds"] = column([](const IterationRecord& r) { return r.seconds; });
    out["failed"] = hist.failed;
    out["lambda"] = hist.lambda;
    return out;
}

SolverOptions solver_options(double tol, const std::string& method) {
    SolverOptions opts;
    opts.tol = tol;
    if (method == "active-set")
        opts.method = OcpMethod::ActiveSet;
    else if (method == "fixed-point")
        opts.method = OcpMethod::FixedPoint;
    else
        throw std::invalid_argument("method must be 'fixed-point' or 'active-set'");
    return opts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Adaptive FEM for control-constrained elliptic optimal control "
              "(L2-norm residual estimators, variational control discretization)";

    py::class_<Mesh, std::shared_ptr<Mesh>>(m, "Mesh")
        .def_property_readonly("n_vertices", &Mesh::n_vertices)
        .def_property_readonly("n_elements", &Mesh::n_elements)
        .def("vertices", &vertices_array)
        .def("elements", &elements_array)
        .def("generations",
             [](const Mesh& mesh) {
                 py::array_t<int> out(mesh.n_elements());
                 auto buf = out.mutable_unchecked<1>();
                 for (int e = 0; e < mesh.n_elements(); ++e) buf(e) = mesh.elements[e].generation;
                 return out;
             })
        .def("areas",
             [](const Mesh& mesh) {
                 Eigen::VectorXd a(mesh.n_elements());
                 for (int e = 0; e < mesh.n_elements(); ++e) a[e] = mesh.area(e);
                 return a;
             })
        .def("size_function", [](const Mesh& mesh) { return mesh_size_function(mesh); })
        .def("grading_norm", [](const Mesh& mesh) { return grading_norm(mesh); })
        .def("min_angle", [](const Mesh& mesh) { return shape_regularity(mesh); })
        .def("is_conforming", [](const Mesh& mesh) { return is_conforming(mesh); })
        .def("__repr__", [](const Mesh& mesh) {
            return "<Mesh: " + std::to_string(mesh.n_vertices()) + " vertices, " +
                   std::to_string(mesh.n_elements()) + " triangles>";
        });

    m.def("unit_square_mesh", [](int n) { return std::make_shared<Mesh>(create_unit_square_mesh(n)); },
          py::arg("n"), "Criss-cross initial mesh of (0,1)^2 with 2 n^2 triangles");

    m.def(
        "refine",
        [](std::shared_ptr<Mesh> mesh, const std::vector<int>& marked, int r) {
            RefineResult result = refine(*mesh, marked, r);
            return py::make_tuple(std::make_shared<Mesh>(std::move(result.mesh)),
                                  result.refined);
        },
        py::arg("mesh"), py::arg("marked"), py::arg("r") = 1,
        "Newest-vertex bisection of the marked elements with conforming "
        "closure; returns (mesh, refined_parents)");

    py::class_<ProblemSpec>(m, "Problem")
        .def_property_readonly("name", [](const ProblemSpec& spec) { return spec.name; })
        .def_property_readonly("alpha", [](const ProblemSpec& spec) { return spec.alpha; })
        .def_property_readonly("bounds",
                               [](const ProblemSpec& spec) {
                                   return py::make_tuple(spec.lower, spec.upper);
                               })
        .def_property_readonly("has_exact_solution",
                               [](const ProblemSpec& spec) { return spec.exact.has_value(); });

    m.def("example1", &example1, "Benchmark with known exact solutions");
    m.def("example2", &example2, "Benchmark with singular data");
    m.def("poisson", &manufactured_poisson, "Manufactured Poisson oracle");
    m.def("problem", &problem_by_name, py::arg("name"));

    py::class_<PySolution>(m, "Solution")
        .def_property_readonly("mesh", [](const PySolution& s) { return s.mesh; })
        .def_property_readonly("y", [](const PySolution& s) { return s.sol.y.values; })
        .def_property_readonly("p", [](const PySolution& s) { return s.sol.p.values; })
        .def_property_readonly("iterations",
                               [](const PySolution& s) { return s.sol.outer_iterations; })
        .def_property_readonly("converged", [](const PySolution& s) { return s.sol.converged; })
        .def("control_centroids", &PySolution::control_centroids,
             "Pointwise control samples at element centroids (the control is "
             "not a nodal field under variational discretization)");

    m.def(
        "solve",
        [](std::shared_ptr<Mesh> mesh, const ProblemSpec& spec, double tol,
           const std::string& method) {
            PySolution out;
            out.mesh = mesh;
            out.sol = solve_ocp(*mesh, spec, solver_options(tol, method));
            return out;
        },
        py::arg("mesh"), py::arg("problem"), py::arg("tol") = 1e-10,
        py::arg("method") = "fixed-point",
        "Solve the discrete optimality system on a fixed mesh");

    m.def(
        "indicators",
        [](const PySolution& s, const ProblemSpec& spec) {
            const IndicatorSet set = total_indicators(*s.mesh, s.sol, spec);
            py::dict out;
            out["eta2_y"] = Eigen::VectorXd(set.eta2_y);
            out["eta2_p"] = Eigen::VectorXd(set.eta2_p);
            out["eta2"] = set.eta2_all();
            out["osc2_y"] = Eigen::VectorXd(set.osc2_y);
            out["osc2_p"] = Eigen::VectorXd(set.osc2_p);
            return out;
        },
        py::arg("solution"), py::arg("problem"),
        "Per-element squared indicators and oscillation terms");

    m.def(
        "exact_errors",
        [](const PySolution& s, const ProblemSpec& spec) {
            if (!spec.exact) throw std::invalid_argument("problem has no exact solution");
            const ExactErrors err = exact_errors(*s.mesh, s.sol, *spec.exact, spec);
            return py::make_tuple(err.u, err.y, err.p);
        },
        py::arg("solution"), py::arg("problem"));

    m.def(
        "doerfler_mark",
        [](const Eigen::VectorXd& eta2, double theta) {
            return doerfler_mark(eta2, theta).marked;
        },
        py::arg("eta2"), py::arg("theta"),
        "Minimal bulk set: greedy by decreasing eta^2, ascending-id ties");

    m.def(
        "afem_run",
        [](const ProblemSpec& spec, double theta, int r, long max_dofs, int max_iters, int n0,
           bool uniform, double tol, const std::string& method) {
            AdaptOptions opts;
            opts.theta = theta;
            opts.r = r;
            opts.max_dofs = max_dofs;
            opts.max_iters = max_iters;
            opts.initial_n = n0;
            opts.uniform = uniform;
            const AfemResult result = afem_loop(spec, opts, solver_options(tol, method));
            PySolution final;
            final.mesh = result.final_mesh;
            final.sol = result.final_solution;
            return py::make_tuple(history_dict(result.history), final);
        },
        py::arg("problem"), py::arg("theta") = 0.3, py::arg("r") = 1,
        py::arg("max_dofs") = -1, py::arg("max_iters") = -1, py::arg("n0") = 8,
        py::arg("uniform") = false, py::arg("tol") = 1e-10,
        py::arg("method") = "fixed-point",
        "Run SOLVE -> ESTIMATE -> MARK -> REFINE; returns (history, solution)");

    m.def("contraction_lambda", &contraction_lambda, py::arg("r"), py::arg("d") = 2);

    m.def(
        "write_vtk",
        [](const std::string& path, const PySolution& s) {
            write_vtk(path, *s.mesh, {{"y", s.sol.y.values}, {"p", s.sol.p.values}},
                      {{"control_sample_centroid", PySolution{s.mesh, s.sol}.control_centroids()}});
        },
        py::arg("path"), py::arg("solution"));
}
