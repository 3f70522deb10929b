#pragma once

#include "afem/mesh.hpp"
#include "afem/quadrature.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <optional>

namespace afem {

using ScalarFn = std::function<double(const Vec2&)>;
using MatrixFn = std::function<Eigen::Matrix2d(const Vec2&)>;
using VectorFn = std::function<Vec2(const Vec2&)>;
using SpMat = Eigen::SparseMatrix<double>;

/// Coefficients of the operator L y = -div(A grad y) + a0 y. Null A means
/// the identity, null a0 means zero. div_A is needed by the estimator for
/// variable A; when absent it is approximated by central differences.
struct CoefficientSet {
    MatrixFn A;
    ScalarFn a0;
    VectorFn div_A;
    bool constant_A = true;

    Eigen::Matrix2d A_at(const Vec2& x) const {
        return A ? A(x) : Eigen::Matrix2d::Identity();
    }
    double a0_at(const Vec2& x) const { return a0 ? a0(x) : 0.0; }
    Vec2 div_A_at(const Vec2& x, double h_scale) const;
    /// Coefficients of the adjoint operator (A transposed).
    CoefficientSet adjoint() const;
};

/// Nodal P1 field on a mesh.
struct DiscreteField {
    const Mesh* mesh = nullptr;
    Eigen::VectorXd values;

    double at(int element, const std::array<double, 3>& bary) const {
        const auto& t = mesh->elements[element].v;
        return bary[0] * values[t[0]] + bary[1] * values[t[1]] + bary[2] * values[t[2]];
    }
    /// Constant gradient on an element.
    Vec2 gradient(int element) const;
};

/// Symmetric sparse system with Dirichlet bookkeeping. After
/// apply_dirichlet the matrix rows/columns of constrained DOFs are
/// eliminated symmetrically (unit diagonal, lifted right-hand side).
struct SparseSystem {
    SpMat matrix;
    Eigen::VectorXd rhs;
    std::vector<int> constrained;
    Eigen::VectorXd constrained_values;
};

struct LinearSolveOptions {
    double rel_tol = 1e-12;
    long direct_dof_threshold = 400000;  // above this, use CG
    int max_cg_iterations = 20000;
};

/// Galerkin matrix of a(y,v) = (A grad y, grad v) + (a0 y, v).
SpMat assemble_operator(const Mesh& mesh, const CoefficientSet& coeff, int quad_order = 5);

/// Load vector (g, phi_i). Throws if g is non-finite at a quadrature point.
Eigen::VectorXd assemble_load(const Mesh& mesh, const ScalarFn& g, int quad_order = 5);

/// P1 mass matrix (exact).
SpMat assemble_mass(const Mesh& mesh);

/// Constrain boundary vertices to the nodal interpolant of boundary_values;
/// symmetric elimination.
SparseSystem apply_dirichlet(const Mesh& mesh, SpMat matrix, Eigen::VectorXd rhs,
                             const ScalarFn& boundary_values);

/// Solve the constrained SPD system to relative residual rel_tol.
Eigen::VectorXd solve_spd(const SparseSystem& system, const LinearSolveOptions& opts = {});

/// Reusable factorization for repeated solves against the same matrix.
class SpdSolver {
public:
    SpdSolver(const Mesh& mesh, SpMat matrix, std::vector<int> constrained,
              LinearSolveOptions opts = {});
    /// Solve with the given raw load and Dirichlet values on the
    /// constrained DOFs.
    Eigen::VectorXd solve(Eigen::VectorXd rhs, const Eigen::VectorXd& constrained_values) const;
    const SpMat& matrix() const { return matrix_; }

private:
    SpMat matrix_;            // unconstrained operator
    SpMat reduced_;           // after elimination
    std::vector<int> constrained_;
    std::vector<char> is_constrained_;
    LinearSolveOptions opts_;
    bool use_direct_ = true;
    Eigen::SimplicialLDLT<SpMat> ldlt_;
};

/// Zero out rows/columns of constrained DOFs and put ones on their
/// diagonal entries.
SpMat eliminate_constrained(const SpMat& matrix, const std::vector<char>& is_constrained);

DiscreteField interpolate_nodal(const Mesh& mesh, const ScalarFn& g);

/// || field - g ||_{L2} by element quadrature.
double l2_norm_diff(const DiscreteField& field, const ScalarFn& g, int quad_order = 5);

/// L2 norm of a nodal field via the exact P1 mass form.
double l2_norm(const DiscreteField& field);

/// Mean value of g over element T: the piecewise-constant L2 projection.
double element_mean(const Mesh& mesh, const ScalarFn& g, int element, int quad_order = 5);

/// Physical quadrature point for barycentric coordinates on an element.
inline Vec2 map_point(const std::array<Vec2, 3>& c, const std::array<double, 3>& b) {
    return b[0] * c[0] + b[1] * c[1] + b[2] * c[2];
}

}  // namespace afem
