#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace afem {

using Vec2 = Eigen::Vector2d;

/// Triangle with newest-vertex-bisection bookkeeping: the refinement edge is
/// (v[0], v[1]) and v[2] is the newest vertex (the peak). Vertices are
/// ordered counter-clockwise.
struct Element {
    std::array<int, 3> v;
    int generation = 0;
};

struct EdgeInfo {
    int a = -1, b = -1;      // endpoint vertices, a < b
    int left = -1;           // incident element
    int right = -1;          // second incident element, -1 on the boundary
};

/// Conforming triangulation. Plain data plus lazily built connectivity
/// caches; treat a Mesh as immutable once handed out.
class Mesh {
public:
    std::vector<Vec2> vertices;
    std::vector<Element> elements;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_elements() const { return static_cast<int>(elements.size()); }

    std::array<Vec2, 3> coords(int e) const {
        const auto& t = elements[e].v;
        return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
    }
    double signed_area(int e) const;
    double area(int e) const { return std::abs(signed_area(e)); }
    /// h_T = |T|^{1/2} (d = 2).
    double size(int e) const;

    /// All mesh edges with incidence, sorted by (a, b). Built on first use.
    const std::vector<EdgeInfo>& edges() const;
    /// Mask of vertices lying on the domain boundary.
    const std::vector<char>& boundary_vertex() const;
    int n_interior_vertices() const;

private:
    mutable std::vector<EdgeInfo> edge_cache_;
    mutable std::vector<char> boundary_cache_;
    mutable bool edges_built_ = false;
};

using ElementSet = std::vector<int>;

struct RefineResult {
    Mesh mesh;
    /// Elements of the input mesh that were bisected (marked or closure),
    /// ascending ids: the set R_{T -> T~}.
    ElementSet refined;
    /// For each vertex appended by this call, the two parent vertices whose
    /// edge it bisects; parents precede children in creation order.
    std::vector<std::array<int, 2>> new_vertex_parents;
    /// Ancestor in the input mesh of every output element.
    std::vector<int> ancestor;
};

/// Criss-cross initial mesh of (0,1)^2: every cell split along the same
/// diagonal, refinement edge on the hypotenuse. 2 n^2 triangles.
Mesh create_unit_square_mesh(int n);

/// Single reference triangle (0,0),(1,0),(0,1); handy in tests.
Mesh single_triangle_mesh(const Vec2& p0, const Vec2& p1, const Vec2& p2);

/// Bisect every marked element r times via newest vertex bisection, then
/// iterate closure bisections until the mesh is conforming.
RefineResult refine(const Mesh& mesh, const ElementSet& marked, int r = 1);

/// Continuous piecewise-linear mesh size function: the value at a vertex is
/// the mean of |T|^{1/2} over the elements containing it.
Eigen::VectorXd mesh_size_function(const Mesh& mesh);

/// sup-norm of the gradient of the mesh size function (the grading measure).
double grading_norm(const Mesh& mesh);

/// Minimum interior angle over all elements, degrees.
double shape_regularity(const Mesh& mesh);

/// Conformity audit: positive orientation, every edge in at most two
/// elements, and no single-count edge with a hanging midpoint vertex.
bool is_conforming(const Mesh& mesh, std::string* why = nullptr);

}  // namespace afem
