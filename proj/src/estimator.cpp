#include "afem/estimator.hpp"

#include <cmath>
#include <limits>

namespace afem {

namespace {

/// Element residual samples of f + u_T - L y_T (state) or
/// y_T - y_d - L* p_T (adjoint) at the interior quadrature points.
/// For P1 fields the second derivatives vanish, so
/// L y_T = -(div A) . grad y_T + a0 y_T.
struct ElementResidual {
    double integral2 = 0.0;  // int_T residual^2 (quadrature)
    double mean = 0.0;       // quadrature mean over T
    double deviation2 = 0.0; // int_T (residual - mean)^2
};

template <typename ResidualFn>
ElementResidual residual_moments(const Mesh& mesh, int e, const TriRule& rule, ResidualFn&& res) {
    const auto c = mesh.coords(e);
    const double area = mesh.area(e);
    ElementResidual out;
    std::vector<double> samples(rule.bary.size());
    double mean = 0.0;
    for (std::size_t q = 0; q < rule.bary.size(); ++q) {
        samples[q] = res(map_point(c, rule.bary[q]), rule.bary[q]);
        mean += rule.weights[q] * samples[q];
    }
    out.mean = mean;
    for (std::size_t q = 0; q < rule.bary.size(); ++q) {
        out.integral2 += area * rule.weights[q] * samples[q] * samples[q];
        const double d = samples[q] - mean;
        out.deviation2 += area * rule.weights[q] * d * d;
    }
    return out;
}

/// h_E^3 int_E ([A grad w] . n)^2 for one interior edge.
double edge_jump2(const Mesh& mesh, const EdgeInfo& edge, const DiscreteField& w,
                  const CoefficientSet& coeff, int edge_quad_order) {
    const Vec2 pa = mesh.vertices[edge.a];
    const Vec2 pb = mesh.vertices[edge.b];
    const double len = (pb - pa).norm();
    const Vec2 tangent = (pb - pa) / len;
    const Vec2 normal(tangent.y(), -tangent.x());
    const Vec2 gl = w.gradient(edge.left);
    const Vec2 gr = w.gradient(edge.right);
    const EdgeRule& rule = edge_rule(edge_quad_order);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const Vec2 x = pa + rule.points[q] * (pb - pa);
        const Eigen::Matrix2d A = coeff.A_at(x);
        const double jump = (A * (gl - gr)).dot(normal);
        acc += len * rule.weights[q] * jump * jump;
    }
    return len * len * len * acc;
}

struct EdgeWork {
    Eigen::VectorXd jump_y;  // per element, summed over its interior edges
    Eigen::VectorXd jump_p;
};

EdgeWork edge_contributions(const Mesh& mesh, const DiscreteSolution& sol,
                            const ProblemSpec& spec, const EstimatorOptions& opts) {
    EdgeWork work;
    work.jump_y = Eigen::VectorXd::Zero(mesh.n_elements());
    work.jump_p = Eigen::VectorXd::Zero(mesh.n_elements());
    const CoefficientSet adj = spec.coeff.adjoint();
    for (const EdgeInfo& edge : mesh.edges()) {
        if (edge.right < 0) continue;  // boundary edges carry no jump term
        const double jy = edge_jump2(mesh, edge, sol.y, spec.coeff, opts.edge_quad_order);
        const double jp = edge_jump2(mesh, edge, sol.p, adj, opts.edge_quad_order);
        work.jump_y[edge.left] += jy;
        work.jump_y[edge.right] += jy;
        work.jump_p[edge.left] += jp;
        work.jump_p[edge.right] += jp;
    }
    return work;
}

double state_residual_at(const Mesh& mesh, int e, const DiscreteSolution& sol,
                         const ProblemSpec& spec, const Vec2& x,
                         const std::array<double, 3>& bary) {
    const double u = sol.control_at(e, bary);
    const Vec2 grad_y = sol.y.gradient(e);
    const double Ly = -spec.coeff.div_A_at(x, mesh.size(e)).dot(grad_y) +
                      spec.coeff.a0_at(x) * sol.y.at(e, bary);
    return spec.f(x) + u - Ly;
}

double adjoint_residual_at(const Mesh& mesh, int e, const DiscreteSolution& sol,
                           const ProblemSpec& spec, const Vec2& x,
                           const std::array<double, 3>& bary) {
    const Vec2 grad_p = sol.p.gradient(e);
    // A symmetric: div(A^T) = div(A).
    const double Lp = -spec.coeff.div_A_at(x, mesh.size(e)).dot(grad_p) +
                      spec.coeff.a0_at(x) * sol.p.at(e, bary);
    return sol.y.at(e, bary) - spec.y_d(x) - Lp;
}

}  // namespace

double state_indicator(const Mesh& mesh, const DiscreteSolution& sol, const ProblemSpec& spec,
                       int element, const EstimatorOptions& opts) {
    const TriRule& rule = tri_rule(opts.interior_quad_order);
    const auto res = residual_moments(mesh, element, rule, [&](const Vec2& x, const auto& bc) {
        return state_residual_at(mesh, element, sol, spec, x, bc);
    });
    const double area = mesh.area(element);
    const double h4 = area * area;  // h_T^4 = |T|^2, exact
    double jump = 0.0;
    for (const EdgeInfo& edge : mesh.edges()) {
        if (edge.right < 0) continue;
        if (edge.left == element || edge.right == element)
            jump += edge_jump2(mesh, edge, sol.y, spec.coeff, opts.edge_quad_order);
    }
    return std::sqrt(h4 * res.integral2 + jump);
}

double adjoint_indicator(const Mesh& mesh, const DiscreteSolution& sol, const ProblemSpec& spec,
                         int element, const EstimatorOptions& opts) {
    const TriRule& rule = tri_rule(opts.interior_quad_order);
    const auto res = residual_moments(mesh, element, rule, [&](const Vec2& x, const auto& bc) {
        return adjoint_residual_at(mesh, element, sol, spec, x, bc);
    });
    const double area = mesh.area(element);
    const double h4 = area * area;
    const CoefficientSet adj = spec.coeff.adjoint();
    double jump = 0.0;
    for (const EdgeInfo& edge : mesh.edges()) {
        if (edge.right < 0) continue;
        if (edge.left == element || edge.right == element)
            jump += edge_jump2(mesh, edge, sol.p, adj, opts.edge_quad_order);
    }
    return std::sqrt(h4 * res.integral2 + jump);
}

IndicatorSet total_indicators(const Mesh& mesh, const DiscreteSolution& sol,
                              const ProblemSpec& spec, const EstimatorOptions& opts) {
    const int n = mesh.n_elements();
    IndicatorSet set;
    set.eta2_y.resize(n);
    set.eta2_p.resize(n);
    set.osc2_y.resize(n);
    set.osc2_p.resize(n);
    const TriRule& rule = tri_rule(opts.interior_quad_order);
    const EdgeWork edges = edge_contributions(mesh, sol, spec, opts);
    for (int e = 0; e < n; ++e) {
        const double area = mesh.area(e);
        const double h4 = area * area;
        const auto res_y = residual_moments(mesh, e, rule, [&](const Vec2& x, const auto& bc) {
            return state_residual_at(mesh, e, sol, spec, x, bc);
        });
        const auto res_p = residual_moments(mesh, e, rule, [&](const Vec2& x, const auto& bc) {
            return adjoint_residual_at(mesh, e, sol, spec, x, bc);
        });
        set.eta2_y[e] = h4 * res_y.integral2 + edges.jump_y[e];
        set.eta2_p[e] = h4 * res_p.integral2 + edges.jump_p[e];
        set.osc2_y[e] = h4 * res_y.deviation2;
        set.osc2_p[e] = h4 * res_p.deviation2;
    }
    return set;
}

std::pair<double, double> data_oscillation(const Mesh& mesh, const DiscreteSolution& sol,
                                           const ProblemSpec& spec,
                                           const EstimatorOptions& opts) {
    const IndicatorSet set = total_indicators(mesh, sol, spec, opts);
    return {std::sqrt(set.osc2_y.sum()), std::sqrt(set.osc2_p.sum())};
}

double effectivity_index(double eta_total, double err_u, double err_y, double err_p) {
    const double denom = err_u + err_y + err_p;
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return eta_total / denom;
}

}  // namespace afem
