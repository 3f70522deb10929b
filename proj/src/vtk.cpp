#include "afem/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace afem {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_scalars(std::ofstream& out, const std::vector<NamedField>& fields, long expected) {
    for (const auto& [name, values] : fields) {
        if (values.size() != expected)
            throw std::runtime_error("write_vtk: field '" + name + "' has wrong length");
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (long i = 0; i < values.size(); ++i) out << fmt(values[i]) << "\n";
    }
}

}  // namespace

void write_vtk(const std::string& path, const Mesh& mesh,
               const std::vector<NamedField>& point_data,
               const std::vector<NamedField>& cell_data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
    out << "# vtk DataFile Version 3.0\n";
    out << "afem mesh snapshot\n";
    out << "ASCII\n";
    out << "DATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.n_vertices() << " double\n";
    for (const auto& v : mesh.vertices) out << fmt(v.x()) << " " << fmt(v.y()) << " 0\n";
    out << "CELLS " << mesh.n_elements() << " " << 4L * mesh.n_elements() << "\n";
    for (const auto& el : mesh.elements)
        out << "3 " << el.v[0] << " " << el.v[1] << " " << el.v[2] << "\n";
    out << "CELL_TYPES " << mesh.n_elements() << "\n";
    for (int e = 0; e < mesh.n_elements(); ++e) out << "5\n";

    out << "CELL_DATA " << mesh.n_elements() << "\n";
    out << "SCALARS generation int 1\nLOOKUP_TABLE default\n";
    for (const auto& el : mesh.elements) out << el.generation << "\n";
    write_scalars(out, cell_data, mesh.n_elements());

    if (!point_data.empty()) {
        out << "POINT_DATA " << mesh.n_vertices() << "\n";
        write_scalars(out, point_data, mesh.n_vertices());
    }
    if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

std::vector<Segment> trace_level_segments(const Mesh& mesh, const Eigen::VectorXd& nodal,
                                          double level) {
    if (nodal.size() != mesh.n_vertices())
        throw std::invalid_argument("trace_level_segments: nodal size mismatch");
    std::vector<Segment> segments;
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto& t = mesh.elements[e].v;
        const auto c = mesh.coords(e);
        const std::array<double, 3> d = {nodal[t[0]] - level, nodal[t[1]] - level,
                                         nodal[t[2]] - level};
        if (d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0) continue;  // flat at the level
        std::vector<Vec2> pts;
        for (int k = 0; k < 3; ++k) {
            const double da = d[k], db = d[(k + 1) % 3];
            if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
                const double s = da / (da - db);
                pts.push_back(c[k] + s * (c[(k + 1) % 3] - c[k]));
            } else if (da == 0.0) {
                pts.push_back(c[k]);
            }
        }
        if (pts.size() >= 2 && (pts[0] - pts[1]).norm() > 0.0)
            segments.push_back({pts[0], pts[1]});
    }
    return segments;
}

void write_segments_vtk(const std::string& path, const std::vector<Segment>& segments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_segments_vtk: cannot open " + path);
    out << "# vtk DataFile Version 3.0\n";
    out << "afem level-set segments\n";
    out << "ASCII\n";
    out << "DATASET POLYDATA\n";
    out << "POINTS " << 2 * segments.size() << " double\n";
    for (const auto& s : segments) {
        out << fmt(s.a.x()) << " " << fmt(s.a.y()) << " 0\n";
        out << fmt(s.b.x()) << " " << fmt(s.b.y()) << " 0\n";
    }
    out << "LINES " << segments.size() << " " << 3 * segments.size() << "\n";
    for (std::size_t i = 0; i < segments.size(); ++i)
        out << "2 " << 2 * i << " " << 2 * i + 1 << "\n";
    if (!out) throw std::runtime_error("write_segments_vtk: write failed for " + path);
}

}  // namespace afem
