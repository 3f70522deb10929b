#include "afem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace afem {

namespace {

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

double Mesh::signed_area(int e) const {
    const auto c = coords(e);
    const Vec2 u = c[1] - c[0];
    const Vec2 w = c[2] - c[0];
    return 0.5 * (u.x() * w.y() - u.y() * w.x());
}

double Mesh::size(int e) const { return std::sqrt(area(e)); }

const std::vector<EdgeInfo>& Mesh::edges() const {
    if (edges_built_) return edge_cache_;
    std::unordered_map<std::uint64_t, int> index;
    index.reserve(elements.size() * 2);
    edge_cache_.clear();
    for (int e = 0; e < n_elements(); ++e) {
        const auto& t = elements[e].v;
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            const auto key = edge_key(a, b);
            auto it = index.find(key);
            if (it == index.end()) {
                EdgeInfo info;
                info.a = std::min(a, b);
                info.b = std::max(a, b);
                info.left = e;
                index.emplace(key, static_cast<int>(edge_cache_.size()));
                edge_cache_.push_back(info);
            } else {
                edge_cache_[it->second].right = e;
            }
        }
    }
    std::sort(edge_cache_.begin(), edge_cache_.end(),
              [](const EdgeInfo& x, const EdgeInfo& y) {
                  return x.a != y.a ? x.a < y.a : x.b < y.b;
              });
    boundary_cache_.assign(vertices.size(), 0);
    for (const auto& ed : edge_cache_) {
        if (ed.right < 0) {
            boundary_cache_[ed.a] = 1;
            boundary_cache_[ed.b] = 1;
        }
    }
    edges_built_ = true;
    return edge_cache_;
}

const std::vector<char>& Mesh::boundary_vertex() const {
    edges();
    return boundary_cache_;
}

int Mesh::n_interior_vertices() const {
    const auto& mask = boundary_vertex();
    int n = 0;
    for (char m : mask)
        if (!m) ++n;
    return n;
}

Mesh create_unit_square_mesh(int n) {
    if (n < 1) throw std::invalid_argument("create_unit_square_mesh: n >= 1 required");
    Mesh mesh;
    const double h = 1.0 / n;
    mesh.vertices.reserve((n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            mesh.vertices.emplace_back(i * h, j * h);
    auto vid = [n](int i, int j) { return j * (n + 1) + i; };
    mesh.elements.reserve(2 * n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = vid(i, j), b = vid(i + 1, j);
            const int c = vid(i + 1, j + 1), d = vid(i, j + 1);
            // Both triangles carry the diagonal (a,c) as refinement edge.
            mesh.elements.push_back({{c, a, b}, 0});
            mesh.elements.push_back({{a, c, d}, 0});
        }
    }
    return mesh;
}

Mesh single_triangle_mesh(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
    Mesh mesh;
    mesh.vertices = {p0, p1, p2};
    mesh.elements.push_back({{0, 1, 2}, 0});
    if (mesh.signed_area(0) <= 0.0)
        throw std::invalid_argument("single_triangle_mesh: vertices must be counter-clockwise");
    return mesh;
}

namespace {

struct Bisector {
    std::vector<Element>& work;
    std::vector<int>& ancestor;
    std::vector<Vec2>& vertices;
    std::unordered_map<std::uint64_t, int>& midpoint;
    std::vector<std::array<int, 2>>& new_vertex_parents;
    long bisections = 0;

    int midpoint_of(int a, int b) {
        const auto key = edge_key(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int m = static_cast<int>(vertices.size());
        vertices.push_back(0.5 * (vertices[a] + vertices[b]));
        new_vertex_parents.push_back({std::min(a, b), std::max(a, b)});
        midpoint.emplace(key, m);
        return m;
    }

    /// Split element `e` through its refinement edge; the left child stays
    /// at index e, the right child is appended.
    int bisect(int e) {
        const Element t = work[e];
        const int m = midpoint_of(t.v[0], t.v[1]);
        work[e] = {{t.v[2], t.v[0], m}, t.generation + 1};
        work.push_back({{t.v[1], t.v[2], m}, t.generation + 1});
        ancestor.push_back(ancestor[e]);
        ++bisections;
        return static_cast<int>(work.size()) - 1;
    }
};

}  // namespace

RefineResult refine(const Mesh& mesh, const ElementSet& marked, int r) {
    if (r < 1) throw std::invalid_argument("refine: r >= 1 required");
    {
        ElementSet check = marked;
        std::sort(check.begin(), check.end());
        if (!check.empty() &&
            (check.front() < 0 || check.back() >= mesh.n_elements()))
            throw std::invalid_argument("refine: marked element out of range");
        if (std::adjacent_find(check.begin(), check.end()) != check.end())
            throw std::invalid_argument("refine: duplicate marked element");
    }

    RefineResult out;
    out.mesh.vertices = mesh.vertices;
    std::vector<Element> work = mesh.elements;
    std::vector<int> ancestor(work.size());
    for (int i = 0; i < static_cast<int>(ancestor.size()); ++i) ancestor[i] = i;
    std::unordered_map<std::uint64_t, int> midpoint;
    Bisector bi{work, ancestor, out.mesh.vertices, midpoint, out.new_vertex_parents};

    std::vector<char> was_refined(mesh.n_elements(), 0);

    // Bisect marked elements r times, generation by generation.
    std::vector<int> frontier(marked.begin(), marked.end());
    std::sort(frontier.begin(), frontier.end());
    for (int pass = 0; pass < r; ++pass) {
        std::vector<int> next;
        next.reserve(frontier.size() * 2);
        for (int e : frontier) {
            was_refined[ancestor[e]] = 1;
            const int sibling = bi.bisect(e);
            next.push_back(e);
            next.push_back(sibling);
        }
        frontier = std::move(next);
    }

    // Iterated closure: any element holding an already-split edge is
    // bisected through its refinement edge until no split edge remains.
    const long guard = 100L * std::max<long>(1, static_cast<long>(work.size()));
    bool changed = true;
    while (changed) {
        changed = false;
        for (int e = 0; e < static_cast<int>(work.size()); ++e) {
            const auto& t = work[e].v;
            for (int k = 0; k < 3; ++k) {
                if (midpoint.count(edge_key(t[k], t[(k + 1) % 3]))) {
                    was_refined[ancestor[e]] = 1;
                    bi.bisect(e);
                    changed = true;
                    break;
                }
            }
            if (bi.bisections > guard)
                throw std::logic_error(
                    "refine: closure did not terminate; incompatible refinement-edge labeling");
        }
    }

    out.mesh.elements = std::move(work);
    out.ancestor = std::move(ancestor);
    for (int e = 0; e < mesh.n_elements(); ++e)
        if (was_refined[e]) out.refined.push_back(e);
    return out;
}

Eigen::VectorXd mesh_size_function(const Mesh& mesh) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(mesh.n_vertices());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const double h = mesh.size(e);
        for (int v : mesh.elements[e].v) {
            sum[v] += h;
            count[v] += 1.0;
        }
    }
    return sum.array() / count.array();
}

namespace {

/// Gradient of the P1 interpolant of nodal values on element e.
Vec2 p1_gradient(const Mesh& mesh, int e, const Eigen::VectorXd& nodal) {
    const auto c = mesh.coords(e);
    const auto& t = mesh.elements[e].v;
    const double inv2A = 1.0 / (2.0 * mesh.signed_area(e));
    Vec2 g = Vec2::Zero();
    for (int k = 0; k < 3; ++k) {
        const Vec2& pj = c[(k + 1) % 3];
        const Vec2& pk = c[(k + 2) % 3];
        const Vec2 grad_phi(inv2A * (pj.y() - pk.y()), inv2A * (pk.x() - pj.x()));
        g += nodal[t[k]] * grad_phi;
    }
    return g;
}

}  // namespace

double grading_norm(const Mesh& mesh) {
    const Eigen::VectorXd h = mesh_size_function(mesh);
    double worst = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e)
        worst = std::max(worst, p1_gradient(mesh, e, h).norm());
    return worst;
}

double shape_regularity(const Mesh& mesh) {
    double worst = 180.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto c = mesh.coords(e);
        for (int k = 0; k < 3; ++k) {
            const Vec2 u = c[(k + 1) % 3] - c[k];
            const Vec2 w = c[(k + 2) % 3] - c[k];
            const double ang =
                std::acos(std::clamp(u.dot(w) / (u.norm() * w.norm()), -1.0, 1.0));
            worst = std::min(worst, ang * 180.0 / M_PI);
        }
    }
    return worst;
}

bool is_conforming(const Mesh& mesh, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    for (int e = 0; e < mesh.n_elements(); ++e)
        if (mesh.signed_area(e) <= 0.0)
            return fail("element " + std::to_string(e) + " not positively oriented");

    std::unordered_map<std::uint64_t, int> count;
    count.reserve(mesh.n_elements() * 2);
    for (const auto& el : mesh.elements)
        for (int k = 0; k < 3; ++k)
            ++count[edge_key(el.v[k], el.v[(k + 1) % 3])];

    // Coordinate hash for hanging-midpoint detection. Bisection midpoints
    // are exact dyadic averages, so exact comparison is the right test.
    std::unordered_map<std::uint64_t, int> coord_hash;
    coord_hash.reserve(mesh.vertices.size());
    auto chash = [](const Vec2& p) {
        std::uint64_t hx, hy;
        const double x = p.x(), y = p.y();
        static_assert(sizeof(double) == 8);
        std::memcpy(&hx, &x, 8);
        std::memcpy(&hy, &y, 8);
        return hx * 1000003ULL ^ hy;
    };
    for (int v = 0; v < mesh.n_vertices(); ++v) coord_hash.emplace(chash(mesh.vertices[v]), v);

    for (const auto& [key, c] : count) {
        if (c > 2) return fail("edge shared by more than two elements");
        if (c == 1) {
            const int a = static_cast<int>(key >> 32);
            const int b = static_cast<int>(key & 0xffffffffu);
            const Vec2 mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
            auto it = coord_hash.find(chash(mid));
            if (it != coord_hash.end() && mesh.vertices[it->second] == mid)
                return fail("hanging node on edge (" + std::to_string(a) + "," +
                            std::to_string(b) + ")");
        }
    }
    return true;
}

}  // namespace afem
