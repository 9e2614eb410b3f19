#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace nsvr {

// Planar triangulation. Vertex i sits at points[i]; triangles index points.
struct TriangularMesh {
  std::vector<std::array<double, 2>> points;
  std::vector<std::array<int, 3>> triangles;

  std::size_t n_vertices() const { return points.size(); }
  std::size_t n_triangles() const { return triangles.size(); }

  // Throws unless indices are in range, every triangle has positive area,
  // every vertex is used and the edge graph is connected.
  void validate() const;

  double triangle_area(std::size_t t) const;

  // Sorted neighbor lists over triangle edges.
  std::vector<std::vector<int>> adjacency() const;
  // Unique undirected edges (i < j).
  std::vector<std::array<int, 2>> edges() const;
  double median_edge_length() const;
};

// Header "L n_triangles", L lines "x y", then n_triangles lines "i j k" with
// 0-based indices.
TriangularMesh read_mesh(const std::string& path);
void write_mesh(const std::string& path, const TriangularMesh& mesh);

// Pixel-centre triangulation of a boolean image mask (row-major, width x
// height). Pixel (x, y) sits at (x * spacing, y * spacing). Each 2x2 block
// with all four pixels masked gives two triangles; a block with exactly three
// gives one. Masked pixels not covered by any triangle are dropped, as are
// components other than the largest.
struct GridMesh {
  TriangularMesh mesh;
  int width = 0;
  int height = 0;
  std::vector<int> vertex_of_pixel;  // -1 when the pixel is not a vertex
  std::vector<int> pixel_of_vertex;  // pixel index y * width + x
};

GridMesh make_grid_mesh(const std::vector<bool>& mask, int width, int height,
                        double spacing = 1.0);

// n x n pixel grid mapped onto the unit square.
GridMesh make_unit_square_mesh(int n);

}  // namespace nsvr
