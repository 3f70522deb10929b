#pragma once

#include "afem/fe.hpp"

#include <string>
#include <utility>
#include <vector>

namespace afem {

using NamedField = std::pair<std::string, Eigen::VectorXd>;

/// Legacy ASCII VTK unstructured grid: POINTS, CELLS (triangle type 5),
/// CELL_DATA and POINT_DATA scalars. Cell generation is always included.
void write_vtk(const std::string& path, const Mesh& mesh,
               const std::vector<NamedField>& point_data = {},
               const std::vector<NamedField>& cell_data = {});

struct Segment {
    Vec2 a, b;
};

/// Straight level-set segments of the P1 interpolant of nodal values,
/// traced element by element. Elements on which the interpolant is
/// constant at the level are skipped.
std::vector<Segment> trace_level_segments(const Mesh& mesh, const Eigen::VectorXd& nodal,
                                          double level);

/// Legacy ASCII VTK polydata with the given line segments.
void write_segments_vtk(const std::string& path, const std::vector<Segment>& segments);

}  // namespace afem
