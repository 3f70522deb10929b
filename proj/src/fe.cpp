#include "afem/fe.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <stdexcept>

namespace afem {

Vec2 CoefficientSet::div_A_at(const Vec2& x, double h_scale) const {
    if (!A || constant_A) return Vec2::Zero();
    if (div_A) return div_A(x);
    const double h = 1e-6 * h_scale;
    const Eigen::Matrix2d dx = (A(x + Vec2(h, 0)) - A(x - Vec2(h, 0))) / (2 * h);
    const Eigen::Matrix2d dy = (A(x + Vec2(0, h)) - A(x - Vec2(0, h))) / (2 * h);
    // (div A)_j = sum_i d_i a_ij
    return Vec2(dx(0, 0) + dy(1, 0), dx(0, 1) + dy(1, 1));
}

CoefficientSet CoefficientSet::adjoint() const {
    CoefficientSet adj = *this;
    if (A) {
        MatrixFn a = A;
        adj.A = [a](const Vec2& x) { return a(x).transpose().eval(); };
        // A is symmetric by contract, so div(A^T) = div(A) and the analytic
        // divergence hook carries over.
    }
    return adj;
}

Vec2 DiscreteField::gradient(int element) const {
    const auto c = mesh->coords(element);
    const auto& t = mesh->elements[element].v;
    const double inv2A = 1.0 / (2.0 * mesh->signed_area(element));
    Vec2 g = Vec2::Zero();
    for (int k = 0; k < 3; ++k) {
        const Vec2& pj = c[(k + 1) % 3];
        const Vec2& pk = c[(k + 2) % 3];
        g += values[t[k]] * Vec2(inv2A * (pj.y() - pk.y()), inv2A * (pk.x() - pj.x()));
    }
    return g;
}

namespace {

std::array<Vec2, 3> p1_gradients(const std::array<Vec2, 3>& c, double signed_area) {
    const double inv2A = 1.0 / (2.0 * signed_area);
    std::array<Vec2, 3> g;
    for (int k = 0; k < 3; ++k) {
        const Vec2& pj = c[(k + 1) % 3];
        const Vec2& pk = c[(k + 2) % 3];
        g[k] = Vec2(inv2A * (pj.y() - pk.y()), inv2A * (pk.x() - pj.x()));
    }
    return g;
}

}  // namespace

SpMat assemble_operator(const Mesh& mesh, const CoefficientSet& coeff, int quad_order) {
    if (quad_order < 2) throw std::invalid_argument("assemble_operator: quad_order >= 2");
    const TriRule& rule = tri_rule(quad_order);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.n_elements() * 9);
    const bool identity_A = !coeff.A;
    const bool zero_a0 = !coeff.a0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto c = mesh.coords(e);
        const double sa = mesh.signed_area(e);
        const auto g = p1_gradients(c, sa);
        const auto& t = mesh.elements[e].v;
        Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
        if (identity_A && zero_a0) {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) local(i, j) = sa * g[i].dot(g[j]);
        } else {
            // A is symmetric by contract; assemble the upper triangle and
            // mirror so K equals its transpose bitwise.
            for (std::size_t q = 0; q < rule.bary.size(); ++q) {
                const Vec2 x = map_point(c, rule.bary[q]);
                const double w = sa * rule.weights[q];
                const Eigen::Matrix2d Aq = coeff.A_at(x);
                const double a0q = coeff.a0_at(x);
                for (int i = 0; i < 3; ++i) {
                    const Vec2 Ag_i = Aq * g[i];
                    for (int j = i; j < 3; ++j) {
                        const double phi_i = rule.bary[q][i];
                        const double phi_j = rule.bary[q][j];
                        local(i, j) += w * (Ag_i.dot(g[j]) + a0q * phi_i * phi_j);
                    }
                }
            }
            for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j) local(j, i) = local(i, j);
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], local(i, j));
    }
    SpMat K(mesh.n_vertices(), mesh.n_vertices());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const ScalarFn& g, int quad_order) {
    const TriRule& rule = tri_rule(quad_order);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto c = mesh.coords(e);
        const double area = mesh.area(e);
        const auto& t = mesh.elements[e].v;
        for (std::size_t q = 0; q < rule.bary.size(); ++q) {
            const Vec2 x = map_point(c, rule.bary[q]);
            const double gq = g(x);
            if (!std::isfinite(gq))
                throw std::runtime_error("assemble_load: non-finite data at quadrature point in element " +
                                         std::to_string(e));
            const double w = area * rule.weights[q] * gq;
            for (int i = 0; i < 3; ++i) b[t[i]] += w * rule.bary[q][i];
        }
    }
    return b;
}

SpMat assemble_mass(const Mesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.n_elements() * 9);
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const double a = mesh.area(e);
        const auto& t = mesh.elements[e].v;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(t[i], t[j], a / 12.0 * (i == j ? 2.0 : 1.0));
    }
    SpMat M(mesh.n_vertices(), mesh.n_vertices());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

SpMat eliminate_constrained(const SpMat& K, const std::vector<char>& is_constrained) {
    SpMat R = K;
    for (int col = 0; col < R.outerSize(); ++col) {
        for (SpMat::InnerIterator it(R, col); it; ++it) {
            if (is_constrained[it.row()] || is_constrained[it.col()])
                it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
        }
    }
    R.prune(0.0);
    return R;
}

SparseSystem apply_dirichlet(const Mesh& mesh, SpMat matrix, Eigen::VectorXd rhs,
                             const ScalarFn& boundary_values) {
    SparseSystem sys;
    const auto& mask = mesh.boundary_vertex();
    std::vector<char> is_constrained(mesh.n_vertices(), 0);
    for (int v = 0; v < mesh.n_vertices(); ++v)
        if (mask[v]) sys.constrained.push_back(v);
    sys.constrained_values.resize(sys.constrained.size());
    Eigen::VectorXd lift = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (std::size_t i = 0; i < sys.constrained.size(); ++i) {
        const int v = sys.constrained[i];
        const double g = boundary_values ? boundary_values(mesh.vertices[v]) : 0.0;
        if (!std::isfinite(g))
            throw std::runtime_error("apply_dirichlet: non-finite boundary value at vertex " +
                                     std::to_string(v));
        sys.constrained_values[i] = g;
        lift[v] = g;
        is_constrained[v] = 1;
    }
    rhs -= matrix * lift;
    sys.matrix = eliminate_constrained(matrix, is_constrained);
    sys.rhs = std::move(rhs);
    for (std::size_t i = 0; i < sys.constrained.size(); ++i)
        sys.rhs[sys.constrained[i]] = sys.constrained_values[i];
    return sys;
}

namespace {

void check_spd_factorization(const Eigen::SimplicialLDLT<SpMat>& ldlt) {
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("solve_spd: factorization failed (matrix not SPD?)");
    if ((ldlt.vectorD().array() <= 0.0).any())
        throw std::runtime_error("solve_spd: non-positive pivot; reduced matrix is not SPD "
                                 "(check coefficients A, a0)");
}

Eigen::VectorXd cg_solve(const SpMat& A, const Eigen::VectorXd& b, const LinearSolveOptions& opts) {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opts.rel_tol);
    cg.setMaxIterations(opts.max_cg_iterations);
    cg.compute(A);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success)
        throw std::runtime_error("solve_spd: CG did not converge in " +
                                 std::to_string(cg.iterations()) +
                                 " iterations, residual = " + std::to_string(cg.error()));
    return x;
}

}  // namespace

Eigen::VectorXd solve_spd(const SparseSystem& system, const LinearSolveOptions& opts) {
    Eigen::VectorXd x;
    if (system.matrix.rows() <= opts.direct_dof_threshold) {
        Eigen::SimplicialLDLT<SpMat> ldlt(system.matrix);
        check_spd_factorization(ldlt);
        x = ldlt.solve(system.rhs);
    } else {
        x = cg_solve(system.matrix, system.rhs, opts);
    }
    const double bn = system.rhs.norm();
    if (bn > 0.0) {
        const double rel = (system.rhs - system.matrix * x).norm() / bn;
        if (rel > opts.rel_tol * 100)
            x = cg_solve(system.matrix, system.rhs, opts);
    }
    return x;
}

SpdSolver::SpdSolver(const Mesh& mesh, SpMat matrix, std::vector<int> constrained,
                     LinearSolveOptions opts)
    : matrix_(std::move(matrix)), constrained_(std::move(constrained)), opts_(opts) {
    is_constrained_.assign(mesh.n_vertices(), 0);
    for (int v : constrained_) is_constrained_[v] = 1;
    reduced_ = eliminate_constrained(matrix_, is_constrained_);
    use_direct_ = reduced_.rows() <= opts_.direct_dof_threshold;
    if (use_direct_) {
        ldlt_.compute(reduced_);
        check_spd_factorization(ldlt_);
    }
}

Eigen::VectorXd SpdSolver::solve(Eigen::VectorXd rhs,
                                 const Eigen::VectorXd& constrained_values) const {
    Eigen::VectorXd lift = Eigen::VectorXd::Zero(matrix_.rows());
    for (std::size_t i = 0; i < constrained_.size(); ++i) lift[constrained_[i]] = constrained_values[i];
    rhs -= matrix_ * lift;
    for (std::size_t i = 0; i < constrained_.size(); ++i) rhs[constrained_[i]] = constrained_values[i];
    Eigen::VectorXd x;
    if (use_direct_)
        x = ldlt_.solve(rhs);
    else
        x = cg_solve(reduced_, rhs, opts_);
    return x;
}

DiscreteField interpolate_nodal(const Mesh& mesh, const ScalarFn& g) {
    DiscreteField f;
    f.mesh = &mesh;
    f.values.resize(mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        f.values[v] = g(mesh.vertices[v]);
        if (!std::isfinite(f.values[v]))
            throw std::runtime_error("interpolate_nodal: non-finite value at vertex " +
                                     std::to_string(v));
    }
    return f;
}

double l2_norm_diff(const DiscreteField& field, const ScalarFn& g, int quad_order) {
    const Mesh& mesh = *field.mesh;
    const TriRule& rule = tri_rule(quad_order);
    double acc = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto c = mesh.coords(e);
        const double area = mesh.area(e);
        for (std::size_t q = 0; q < rule.bary.size(); ++q) {
            const double d = field.at(e, rule.bary[q]) - g(map_point(c, rule.bary[q]));
            acc += area * rule.weights[q] * d * d;
        }
    }
    return std::sqrt(acc);
}

double l2_norm(const DiscreteField& field) {
    const SpMat M = assemble_mass(*field.mesh);
    return std::sqrt(field.values.dot(M * field.values));
}

double element_mean(const Mesh& mesh, const ScalarFn& g, int element, int quad_order) {
    const TriRule& rule = tri_rule(quad_order);
    const auto c = mesh.coords(element);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.bary.size(); ++q)
        acc += rule.weights[q] * g(map_point(c, rule.bary[q]));
    return acc;
}

}  // namespace afem
