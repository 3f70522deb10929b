#pragma once

#include "afem/fe.hpp"

#include <optional>
#include <string>

namespace afem {

/// Exact solution triple for benchmark problems, with the analytic actions
/// L y and L* p (here -Delta y and -Delta p).
struct ExactTriple {
    ScalarFn u, y, p;
    ScalarFn L_y, Lstar_p;
};

/// Data of the control problem
///   min 1/2 ||y - y_d||^2 + alpha/2 ||u||^2
///   s.t. L y = f + u, y = g_D on the boundary, lower <= u <= upper.
struct ProblemSpec {
    std::string name;
    CoefficientSet coeff;
    ScalarFn f;
    ScalarFn y_d;
    double alpha = 1.0;
    double lower = 0.0;
    double upper = 1.0;
    ScalarFn state_boundary;  // null: homogeneous
    std::optional<ExactTriple> exact;

    void validate() const;
};

/// Pointwise projection u = max{a, min{b, -p/alpha}}.
double clamp_control(double p_value, const ProblemSpec& spec);

enum class OcpMethod { FixedPoint, ActiveSet };

struct SolverOptions {
    double tol = 1e-10;
    int max_outer = 200;
    /// 0 picks the default: 0.5 for alpha < 0.05, else 1.0.
    double damping = 0.0;
    OcpMethod method = OcpMethod::FixedPoint;
    int quad_order = 5;
    LinearSolveOptions linear;
};

/// Discrete optimal pair (y_T, p_T); the control is never stored nodally,
/// it is evaluated pointwise from p_T.
struct DiscreteSolution {
    DiscreteField y;
    DiscreteField p;
    double alpha = 1.0;
    double lower = 0.0, upper = 0.0;
    int outer_iterations = 0;
    double fixed_point_defect = 0.0;  // L2 change of the control, last step
    double last_p_change = 0.0;       // L2 change of p, last step
    bool converged = false;
    std::vector<double> j_history;
    double max_j_increase = 0.0;

    double control_at(int element, const std::array<double, 3>& bary) const {
        const double q = -p.at(element, bary) / alpha;
        return std::max(lower, std::min(upper, q));
    }
};

/// Convex polygon produced by clipping a triangle.
using ClipPolygon = std::vector<Vec2>;

/// Split a triangle by the two level lines q = a and q = b of the linear
/// function with vertex values q0,q1,q2. Returns the regions {q<=a},
/// {a<=q<=b}, {q>=b}; polygons with area below 1e-14 * |T| are dropped.
struct ClipRegions {
    ClipPolygon low, mid, high;
};
ClipRegions clip_by_bounds(const std::array<Vec2, 3>& tri, const std::array<double, 3>& q,
                           double a, double b);

/// Load vector (clamp(-p_T/alpha), phi_i) integrated exactly by clipping
/// each triangle along the kink lines of the projection.
Eigen::VectorXd control_load(const Mesh& mesh, const DiscreteField& p_T, const ProblemSpec& spec);

/// || clamp(-p1/alpha) - clamp(-p2/alpha) ||_{L2} by quadrature.
double control_defect(const Mesh& mesh, const Eigen::VectorXd& p1, const Eigen::VectorXd& p2,
                      const ProblemSpec& spec, int quad_order = 5);

/// Discrete state solve a(y,v) = (f + u, v) with u induced by p_T.
DiscreteField solve_state(const Mesh& mesh, const DiscreteField& p_T, const ProblemSpec& spec,
                          const SolverOptions& opts = {});
/// State solve with an explicit control function.
DiscreteField solve_state(const Mesh& mesh, const ScalarFn& control, const ProblemSpec& spec,
                          const SolverOptions& opts = {});
/// Discrete adjoint solve a(v,p) = (y_T - y_d, v), homogeneous boundary.
DiscreteField solve_adjoint(const Mesh& mesh, const DiscreteField& y_T, const ProblemSpec& spec,
                            const SolverOptions& opts = {});

/// Solve the coupled discrete optimality system.
DiscreteSolution solve_ocp(const Mesh& mesh, const ProblemSpec& spec, const SolverOptions& opts = {},
                           const Eigen::VectorXd* warm_start_p = nullptr);

/// Outer-loop fixed-point defect of a returned solution: the pointwise
/// projection mismatch (zero by construction) plus the recorded L2 change
/// of the control between the last two outer iterates.
double vi_residual(const DiscreteSolution& sol, const ProblemSpec& spec);

/// J(y_T, u_T) by quadrature; the control term is integrated exactly via
/// clipping.
double objective_value(const Mesh& mesh, const DiscreteField& y_T, const DiscreteField& p_T,
                       const ProblemSpec& spec, int quad_order = 5);

}  // namespace afem
