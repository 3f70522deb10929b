#include "afem/control.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace afem {

void ProblemSpec::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("ProblemSpec: alpha > 0 required");
    if (!(lower < upper)) throw std::invalid_argument("ProblemSpec: lower < upper required");
    if (!f || !y_d) throw std::invalid_argument("ProblemSpec: f and y_d required");
}

double clamp_control(double p_value, const ProblemSpec& spec) {
    return std::max(spec.lower, std::min(spec.upper, -p_value / spec.alpha));
}

namespace {

struct PQ {
    Vec2 x;
    double q;
};

double polygon_area(const std::vector<PQ>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p0 = poly[i].x;
        const auto& p1 = poly[(i + 1) % poly.size()].x;
        a += p0.x() * p1.y() - p1.x() * p0.y();
    }
    return 0.5 * a;
}

/// One Sutherland-Hodgman pass against the half-plane {sgn*(q-level) <= 0}.
std::vector<PQ> clip_halfplane(const std::vector<PQ>& poly, double level, double sgn) {
    std::vector<PQ> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const PQ& cur = poly[i];
        const PQ& nxt = poly[(i + 1) % n];
        const double dc = sgn * (cur.q - level);
        const double dn = sgn * (nxt.q - level);
        if (dc <= 0.0) out.push_back(cur);
        if ((dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0)) {
            const double t = dc / (dc - dn);
            out.push_back({cur.x + t * (nxt.x - cur.x), cur.q + t * (nxt.q - cur.q)});
        }
    }
    return out;
}

ClipPolygon strip_q(const std::vector<PQ>& poly) {
    ClipPolygon out;
    out.reserve(poly.size());
    for (const auto& v : poly) out.push_back(v.x);
    return out;
}

}  // namespace

ClipRegions clip_by_bounds(const std::array<Vec2, 3>& tri, const std::array<double, 3>& q,
                           double a, double b) {
    std::vector<PQ> base = {{tri[0], q[0]}, {tri[1], q[1]}, {tri[2], q[2]}};
    const double area = std::abs(polygon_area(base));
    const double drop = 1e-14 * area;
    auto accept = [&](std::vector<PQ>&& poly) -> ClipPolygon {
        if (poly.size() < 3 || std::abs(polygon_area(poly)) < drop) return {};
        return strip_q(poly);
    };
    ClipRegions regions;
    regions.low = accept(clip_halfplane(base, a, 1.0));
    std::vector<PQ> above_a = clip_halfplane(base, a, -1.0);
    regions.mid = accept(clip_halfplane(above_a, b, 1.0));
    regions.high = accept(clip_halfplane(above_a, b, -1.0));
    return regions;
}

namespace {

std::array<double, 3> barycentric_of(const std::array<Vec2, 3>& tri, const Vec2& x) {
    const double det = (tri[1] - tri[0]).x() * (tri[2] - tri[0]).y() -
                       (tri[1] - tri[0]).y() * (tri[2] - tri[0]).x();
    const double l1 = ((x - tri[0]).x() * (tri[2] - tri[0]).y() -
                       (x - tri[0]).y() * (tri[2] - tri[0]).x()) / det;
    const double l2 = ((tri[1] - tri[0]).x() * (x - tri[0]).y() -
                       (tri[1] - tri[0]).y() * (x - tri[0]).x()) / det;
    return {1.0 - l1 - l2, l1, l2};
}

/// Integrate f over a convex polygon by fanning into triangles and using
/// the 3-point degree-2 rule on each.
template <typename F>
void integrate_polygon(const ClipPolygon& poly, F&& f) {
    if (poly.size() < 3) return;
    const TriRule& rule = tri_rule(2);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const std::array<Vec2, 3> sub = {poly[0], poly[k], poly[k + 1]};
        const double area = 0.5 * std::abs((sub[1] - sub[0]).x() * (sub[2] - sub[0]).y() -
                                           (sub[1] - sub[0]).y() * (sub[2] - sub[0]).x());
        if (area == 0.0) continue;
        for (std::size_t qi = 0; qi < rule.bary.size(); ++qi) {
            const Vec2 x = map_point(sub, rule.bary[qi]);
            f(x, area * rule.weights[qi]);
        }
    }
}

}  // namespace

Eigen::VectorXd control_load(const Mesh& mesh, const DiscreteField& p_T, const ProblemSpec& spec) {
    if (p_T.mesh != &mesh) throw std::invalid_argument("control_load: field on a different mesh");
    const double a = spec.lower, b = spec.upper, alpha = spec.alpha;
    Eigen::VectorXd load = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto& t = mesh.elements[e].v;
        const auto tri = mesh.coords(e);
        const std::array<double, 3> q = {-p_T.values[t[0]] / alpha, -p_T.values[t[1]] / alpha,
                                         -p_T.values[t[2]] / alpha};
        const double qmin = std::min({q[0], q[1], q[2]});
        const double qmax = std::max({q[0], q[1], q[2]});
        const double area = mesh.area(e);
        if (qmax <= a) {
            for (int i = 0; i < 3; ++i) load[t[i]] += a * area / 3.0;
        } else if (qmin >= b) {
            for (int i = 0; i < 3; ++i) load[t[i]] += b * area / 3.0;
        } else if (qmin >= a && qmax <= b) {
            // (q, phi_i) with q linear: exact P1 mass action.
            const double qs = q[0] + q[1] + q[2];
            for (int i = 0; i < 3; ++i) load[t[i]] += area / 12.0 * (qs + q[i]);
        } else {
            const ClipRegions regions = clip_by_bounds(tri, q, a, b);
            auto add = [&](const ClipPolygon& poly, auto value) {
                integrate_polygon(poly, [&](const Vec2& x, double w) {
                    const auto bc = barycentric_of(tri, x);
                    const double v = value(bc);
                    for (int i = 0; i < 3; ++i) load[t[i]] += w * v * bc[i];
                });
            };
            add(regions.low, [&](const std::array<double, 3>&) { return a; });
            add(regions.high, [&](const std::array<double, 3>&) { return b; });
            add(regions.mid, [&](const std::array<double, 3>& bc) {
                return bc[0] * q[0] + bc[1] * q[1] + bc[2] * q[2];
            });
        }
    }
    return load;
}

double control_defect(const Mesh& mesh, const Eigen::VectorXd& p1, const Eigen::VectorXd& p2,
                      const ProblemSpec& spec, int quad_order) {
    const TriRule& rule = tri_rule(quad_order);
    double acc = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto& t = mesh.elements[e].v;
        const double area = mesh.area(e);
        for (std::size_t qi = 0; qi < rule.bary.size(); ++qi) {
            const auto& bc = rule.bary[qi];
            const double pa = bc[0] * p1[t[0]] + bc[1] * p1[t[1]] + bc[2] * p1[t[2]];
            const double pb = bc[0] * p2[t[0]] + bc[1] * p2[t[1]] + bc[2] * p2[t[2]];
            const double d = clamp_control(pa, spec) - clamp_control(pb, spec);
            acc += area * rule.weights[qi] * d * d;
        }
    }
    return std::sqrt(acc);
}

namespace {

/// Assembled pieces reused across outer iterations on a fixed mesh.
struct OcpWorkspace {
    const Mesh& mesh;
    SpMat K_state, K_adjoint, M;
    Eigen::VectorXd load_f, load_yd;
    std::vector<int> constrained;
    Eigen::VectorXd bc_state, bc_zero;
    SpdSolver state_solver, adjoint_solver;

    OcpWorkspace(const Mesh& m, const ProblemSpec& spec, const SolverOptions& opts)
        : mesh(m),
          K_state(assemble_operator(m, spec.coeff, opts.quad_order)),
          K_adjoint(assemble_operator(m, spec.coeff.adjoint(), opts.quad_order)),
          M(assemble_mass(m)),
          load_f(assemble_load(m, spec.f, opts.quad_order)),
          load_yd(assemble_load(m, spec.y_d, opts.quad_order)),
          constrained(),
          state_solver(make_solver(m, K_state, constrained, opts)),
          adjoint_solver(make_solver(m, K_adjoint, constrained, opts)) {
        bc_state.resize(constrained.size());
        bc_zero = Eigen::VectorXd::Zero(constrained.size());
        for (std::size_t i = 0; i < constrained.size(); ++i) {
            const Vec2& x = mesh.vertices[constrained[i]];
            bc_state[i] = spec.state_boundary ? spec.state_boundary(x) : 0.0;
        }
    }

private:
    SpdSolver make_solver(const Mesh& m, const SpMat& K, std::vector<int>& constrained,
                          const SolverOptions& opts) {
        if (constrained.empty()) {
            const auto& mask = m.boundary_vertex();
            for (int v = 0; v < m.n_vertices(); ++v)
                if (mask[v]) constrained.push_back(v);
        }
        return SpdSolver(m, K, constrained, opts.linear);
    }
};

double mass_norm(const SpMat& M, const Eigen::VectorXd& v) {
    return std::sqrt(std::max(0.0, v.dot(M * v)));
}

DiscreteSolution solve_ocp_fixed_point(const Mesh& mesh, const ProblemSpec& spec,
                                       const SolverOptions& opts, OcpWorkspace& ws,
                                       Eigen::VectorXd p) {
    const double omega = opts.damping > 0.0 ? opts.damping : (spec.alpha < 0.05 ? 0.5 : 1.0);
    DiscreteSolution sol;
    sol.alpha = spec.alpha;
    sol.lower = spec.lower;
    sol.upper = spec.upper;
    DiscreteField p_field{&mesh, p};
    Eigen::VectorXd y;
    double defect = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_outer; ++it) {
        p_field.values = p;
        const Eigen::VectorXd rhs_state = ws.load_f + control_load(mesh, p_field, spec);
        y = ws.state_solver.solve(rhs_state, ws.bc_state);
        const Eigen::VectorXd rhs_adj = ws.M * y - ws.load_yd;
        const Eigen::VectorXd p_raw = ws.adjoint_solver.solve(rhs_adj, ws.bc_zero);
        const Eigen::VectorXd p_next = (1.0 - omega) * p + omega * p_raw;

        sol.j_history.push_back(objective_value(mesh, DiscreteField{&mesh, y},
                                                DiscreteField{&mesh, p}, spec, opts.quad_order));
        if (sol.j_history.size() > 1) {
            const double inc = sol.j_history.back() - sol.j_history[sol.j_history.size() - 2];
            sol.max_j_increase = std::max(sol.max_j_increase, inc);
        }

        const double dp = mass_norm(ws.M, p_next - p);
        defect = control_defect(mesh, p_next, p, spec, opts.quad_order);
        sol.last_p_change = dp;
        p = p_next;
        if (dp <= opts.tol * (1.0 + mass_norm(ws.M, p))) {
            sol.converged = true;
            ++it;
            break;
        }
    }
    // Final state solve so the returned pair is consistent with p.
    p_field.values = p;
    y = ws.state_solver.solve(ws.load_f + control_load(mesh, p_field, spec), ws.bc_state);
    sol.y = DiscreteField{&mesh, y};
    sol.p = DiscreteField{&mesh, p};
    sol.outer_iterations = it;
    sol.fixed_point_defect = defect;
    return sol;
}

DiscreteSolution solve_ocp_active_set(const Mesh& mesh, const ProblemSpec& spec,
                                      const SolverOptions& opts, OcpWorkspace& ws,
                                      Eigen::VectorXd p) {
    const int n = mesh.n_vertices();
    DiscreteSolution sol;
    sol.alpha = spec.alpha;
    sol.lower = spec.lower;
    sol.upper = spec.upper;

    std::vector<char> is_constrained(2 * n, 0);
    for (int v : ws.constrained) {
        is_constrained[v] = 1;
        is_constrained[n + v] = 1;
    }
    Eigen::VectorXd lift = Eigen::VectorXd::Zero(2 * n);
    for (std::size_t i = 0; i < ws.constrained.size(); ++i) lift[ws.constrained[i]] = ws.bc_state[i];

    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    double defect = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opts.max_outer; ++it) {
        // Partial mass on the inactive region and bound loads on the active
        // regions, from the current adjoint iterate.
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd bound_load = Eigen::VectorXd::Zero(n);
        for (int e = 0; e < mesh.n_elements(); ++e) {
            const auto& t = mesh.elements[e].v;
            const auto tri = mesh.coords(e);
            const std::array<double, 3> q = {-p[t[0]] / spec.alpha, -p[t[1]] / spec.alpha,
                                             -p[t[2]] / spec.alpha};
            const ClipRegions regions = clip_by_bounds(tri, q, spec.lower, spec.upper);
            integrate_polygon(regions.low, [&](const Vec2& x, double w) {
                const auto bc = barycentric_of(tri, x);
                for (int i = 0; i < 3; ++i) bound_load[t[i]] += w * spec.lower * bc[i];
            });
            integrate_polygon(regions.high, [&](const Vec2& x, double w) {
                const auto bc = barycentric_of(tri, x);
                for (int i = 0; i < 3; ++i) bound_load[t[i]] += w * spec.upper * bc[i];
            });
            integrate_polygon(regions.mid, [&](const Vec2& x, double w) {
                const auto bc = barycentric_of(tri, x);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        trip.emplace_back(t[i], t[j], w * bc[i] * bc[j]);
            });
        }
        SpMat M_inactive(n, n);
        M_inactive.setFromTriplets(trip.begin(), trip.end());

        // Block system for (y, p):
        //   K y + (1/alpha) M_I p = load_f + bound_load
        //   -M y + K* p           = -load_yd
        std::vector<Eigen::Triplet<double>> blk;
        auto add_block = [&](const SpMat& A, int r0, int c0, double scale) {
            for (int col = 0; col < A.outerSize(); ++col)
                for (SpMat::InnerIterator itr(A, col); itr; ++itr)
                    blk.emplace_back(r0 + itr.row(), c0 + itr.col(), scale * itr.value());
        };
        add_block(ws.K_state, 0, 0, 1.0);
        add_block(M_inactive, 0, n, 1.0 / spec.alpha);
        add_block(ws.M, n, 0, -1.0);
        add_block(ws.K_adjoint, n, n, 1.0);
        SpMat B(2 * n, 2 * n);
        B.setFromTriplets(blk.begin(), blk.end());

        Eigen::VectorXd rhs(2 * n);
        rhs.head(n) = ws.load_f + bound_load;
        rhs.tail(n) = -ws.load_yd;
        rhs -= B * lift;
        const SpMat Bb = eliminate_constrained(B, is_constrained);
        for (int v : ws.constrained) rhs[n + v] = 0.0;
        for (std::size_t i = 0; i < ws.constrained.size(); ++i)
            rhs[ws.constrained[i]] = ws.bc_state[i];

        Eigen::SparseLU<SpMat> lu(Bb);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("solve_ocp: active-set block factorization failed");
        const Eigen::VectorXd xy = lu.solve(rhs);
        y = xy.head(n);
        const Eigen::VectorXd p_next = xy.tail(n);

        sol.j_history.push_back(objective_value(mesh, DiscreteField{&mesh, y},
                                                DiscreteField{&mesh, p_next}, spec,
                                                opts.quad_order));
        const double dp = mass_norm(ws.M, p_next - p);
        defect = control_defect(mesh, p_next, p, spec, opts.quad_order);
        sol.last_p_change = dp;
        p = p_next;
        if (dp <= opts.tol * (1.0 + mass_norm(ws.M, p))) {
            sol.converged = true;
            ++it;
            break;
        }
    }
    DiscreteField p_field{&mesh, p};
    y = ws.state_solver.solve(ws.load_f + control_load(mesh, p_field, spec), ws.bc_state);
    sol.y = DiscreteField{&mesh, y};
    sol.p = DiscreteField{&mesh, p};
    sol.outer_iterations = it;
    sol.fixed_point_defect = defect;
    return sol;
}

}  // namespace

DiscreteField solve_state(const Mesh& mesh, const DiscreteField& p_T, const ProblemSpec& spec,
                          const SolverOptions& opts) {
    const SpMat K = assemble_operator(mesh, spec.coeff, opts.quad_order);
    const Eigen::VectorXd rhs =
        assemble_load(mesh, spec.f, opts.quad_order) + control_load(mesh, p_T, spec);
    const SparseSystem sys = apply_dirichlet(mesh, K, rhs, spec.state_boundary);
    return DiscreteField{&mesh, solve_spd(sys, opts.linear)};
}

DiscreteField solve_state(const Mesh& mesh, const ScalarFn& control, const ProblemSpec& spec,
                          const SolverOptions& opts) {
    const SpMat K = assemble_operator(mesh, spec.coeff, opts.quad_order);
    const ScalarFn f = spec.f;
    const Eigen::VectorXd rhs = assemble_load(
        mesh, [&](const Vec2& x) { return f(x) + control(x); }, opts.quad_order);
    const SparseSystem sys = apply_dirichlet(mesh, K, rhs, spec.state_boundary);
    return DiscreteField{&mesh, solve_spd(sys, opts.linear)};
}

DiscreteField solve_adjoint(const Mesh& mesh, const DiscreteField& y_T, const ProblemSpec& spec,
                            const SolverOptions& opts) {
    const SpMat K = assemble_operator(mesh, spec.coeff.adjoint(), opts.quad_order);
    const Eigen::VectorXd rhs =
        assemble_mass(mesh) * y_T.values - assemble_load(mesh, spec.y_d, opts.quad_order);
    const SparseSystem sys = apply_dirichlet(mesh, K, rhs, nullptr);
    return DiscreteField{&mesh, solve_spd(sys, opts.linear)};
}

DiscreteSolution solve_ocp(const Mesh& mesh, const ProblemSpec& spec, const SolverOptions& opts,
                           const Eigen::VectorXd* warm_start_p) {
    spec.validate();
    OcpWorkspace ws(mesh, spec, opts);
    Eigen::VectorXd p0 = warm_start_p && warm_start_p->size() == mesh.n_vertices()
                             ? *warm_start_p
                             : Eigen::VectorXd::Zero(mesh.n_vertices());
    return opts.method == OcpMethod::ActiveSet
               ? solve_ocp_active_set(mesh, spec, opts, ws, std::move(p0))
               : solve_ocp_fixed_point(mesh, spec, opts, ws, std::move(p0));
}

double vi_residual(const DiscreteSolution& sol, const ProblemSpec& spec) {
    const Mesh& mesh = *sol.p.mesh;
    const TriRule& rule = tri_rule(5);
    double pointwise = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        for (const auto& bc : rule.bary) {
            const double u = sol.control_at(e, bc);
            const double proj = clamp_control(sol.p.at(e, bc), spec);
            pointwise = std::max(pointwise, std::abs(u - proj));
        }
    }
    return pointwise + sol.fixed_point_defect;
}

double objective_value(const Mesh& mesh, const DiscreteField& y_T, const DiscreteField& p_T,
                       const ProblemSpec& spec, int quad_order) {
    const double misfit = l2_norm_diff(y_T, spec.y_d, quad_order);
    // alpha/2 * ||u||^2 with u = clamp(-p/alpha), integrated exactly.
    double u2 = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto& t = mesh.elements[e].v;
        const auto tri = mesh.coords(e);
        const std::array<double, 3> q = {-p_T.values[t[0]] / spec.alpha,
                                         -p_T.values[t[1]] / spec.alpha,
                                         -p_T.values[t[2]] / spec.alpha};
        const ClipRegions regions = clip_by_bounds(tri, q, spec.lower, spec.upper);
        const double qmin = std::min({q[0], q[1], q[2]});
        const double qmax = std::max({q[0], q[1], q[2]});
        if (qmax <= spec.lower) {
            u2 += spec.lower * spec.lower * mesh.area(e);
            continue;
        }
        if (qmin >= spec.upper) {
            u2 += spec.upper * spec.upper * mesh.area(e);
            continue;
        }
        integrate_polygon(regions.low,
                          [&](const Vec2&, double w) { u2 += w * spec.lower * spec.lower; });
        integrate_polygon(regions.high,
                          [&](const Vec2&, double w) { u2 += w * spec.upper * spec.upper; });
        integrate_polygon(regions.mid, [&](const Vec2& x, double w) {
            const auto bc = barycentric_of(tri, x);
            const double qq = bc[0] * q[0] + bc[1] * q[1] + bc[2] * q[2];
            u2 += w * qq * qq;
        });
    }
    return 0.5 * misfit * misfit + 0.5 * spec.alpha * u2;
}

}  // namespace afem
