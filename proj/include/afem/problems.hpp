#pragma once

#include "afem/control.hpp"

namespace afem {

/// Benchmark on (0,1)^2 with known exact solutions:
///   y = arctan(-50 x1 + 100 x2 - 25)
///   p = 16 x1(1-x1) x2(1-x2) (1 + arctan(200 (1/16 - (x1-1/2)^2 - (x2-1/2)^2)))
///   u = max{-5, min{-1, -p/alpha}},  alpha = 0.1
/// with f = -Delta y - u and y_d = y + Delta p; the state carries the
/// inhomogeneous boundary values of y.
ProblemSpec example1();

/// Benchmark on (0,1)^2 with singular data and no exact solution:
///   f = ((x1-1)^2 + (x2-1)^2)^{-0.75},  y_d = (x1^2 + x2^2)^{-0.95}
///   alpha = 1e-2, bounds [10, 15], homogeneous boundary.
ProblemSpec example2();

/// -Delta y = 2 pi^2 sin(pi x1) sin(pi x2), zero boundary, posed as a
/// degenerate control problem whose optimal control vanishes.
ProblemSpec manufactured_poisson();

ProblemSpec problem_by_name(const std::string& name);

/// L2 errors (err_u, err_y, err_p) against the exact triple; the control
/// error integrates the clipped discrete control against the exact one.
struct ExactErrors {
    double u = 0.0, y = 0.0, p = 0.0;
    double combined() const { return u + y + p; }
};
ExactErrors exact_errors(const Mesh& mesh, const DiscreteSolution& sol, const ExactTriple& triple,
                         const ProblemSpec& spec, int quad_order = 5);

}  // namespace afem
