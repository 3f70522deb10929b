#pragma once

#include <array>
#include <vector>

namespace afem {

/// Quadrature rule on the reference triangle, stored in barycentric
/// coordinates. Weights sum to one, so an integral is approximated by
/// |T| * sum(w_q * f(x_q)).
struct TriRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;
    int degree = 0;
};

/// Rule on the unit interval [0,1] with weights summing to one:
/// int_E f ~ |E| * sum(w_q * f(t_q)).
struct EdgeRule {
    std::vector<double> points;
    std::vector<double> weights;
    int degree = 0;
};

/// Smallest built-in symmetric rule exact for polynomials of total degree
/// >= `degree`. Degrees above the built-in tables fall back to a conical
/// product rule.
const TriRule& tri_rule(int degree);

/// Conical product (Duffy) rule exact to the requested total degree.
/// Built from Gauss-Legendre nodes only, so it is an algebraically
/// independent route from the symmetric tables.
TriRule conical_tri_rule(int degree);

/// Gauss-Legendre rule on [0,1] exact for polynomials of degree >= `degree`.
const EdgeRule& edge_rule(int degree);

/// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

}  // namespace afem
