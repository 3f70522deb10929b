#pragma once

#include "afem/control.hpp"

namespace afem {

/// Per-element squared indicators and oscillation contributions of the
/// L2-norm residual estimator
///   eta_y^2(T) = h_T^4 ||f + u_T - L y_T||_{0,T}^2
///              + sum_{interior E of T} h_E^3 ||[A grad y_T] . n||_{0,E}^2
/// and the mirrored adjoint indicator with data y_T - y_d and A^T.
struct IndicatorSet {
    Eigen::VectorXd eta2_y, eta2_p;
    Eigen::VectorXd osc2_y, osc2_p;

    double eta2(int T) const { return eta2_y[T] + eta2_p[T]; }
    double total_eta2_y() const { return eta2_y.sum(); }
    double total_eta2_p() const { return eta2_p.sum(); }
    double total_eta2() const { return eta2_y.sum() + eta2_p.sum(); }
    double total_osc2() const { return osc2_y.sum() + osc2_p.sum(); }
    Eigen::VectorXd eta2_all() const { return eta2_y + eta2_p; }
};

struct EstimatorOptions {
    int interior_quad_order = 5;
    int edge_quad_order = 3;  // two-point Gauss
};

/// eta_{T,y}(T): state-equation indicator of a single element.
double state_indicator(const Mesh& mesh, const DiscreteSolution& sol, const ProblemSpec& spec,
                       int element, const EstimatorOptions& opts = {});

/// eta_{T,p}(T): adjoint-equation indicator of a single element.
double adjoint_indicator(const Mesh& mesh, const DiscreteSolution& sol, const ProblemSpec& spec,
                         int element, const EstimatorOptions& opts = {});

/// All per-element indicator and oscillation entries in one sweep.
IndicatorSet total_indicators(const Mesh& mesh, const DiscreteSolution& sol,
                              const ProblemSpec& spec, const EstimatorOptions& opts = {});

/// Totals (osc_y, osc_p) of the data oscillation; the residual means are
/// taken over the same quadrature nodes as the indicators.
std::pair<double, double> data_oscillation(const Mesh& mesh, const DiscreteSolution& sol,
                                           const ProblemSpec& spec,
                                           const EstimatorOptions& opts = {});

/// eta / (||u-u_T|| + ||y-y_T|| + ||p-p_T||); +inf when the error vanishes.
double effectivity_index(double eta_total, double err_u, double err_y, double err_p);

}  // namespace afem
