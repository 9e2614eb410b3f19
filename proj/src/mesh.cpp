#include "nsvr/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include "nsvr/error.hpp"

namespace nsvr {

namespace {

double signed_area(const std::array<double, 2>& a, const std::array<double, 2>& b,
                   const std::array<double, 2>& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

// Component id per vertex under the given adjacency.
std::vector<int> components(const std::vector<std::vector<int>>& adj, int* count) {
  std::vector<int> comp(adj.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < adj.size(); ++s) {
    if (comp[s] >= 0) continue;
    std::queue<int> q;
    q.push(static_cast<int>(s));
    comp[s] = next;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = next;
          q.push(w);
        }
      }
    }
    ++next;
  }
  *count = next;
  return comp;
}

}  // namespace

double TriangularMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return std::abs(signed_area(points[static_cast<std::size_t>(tri[0])],
                              points[static_cast<std::size_t>(tri[1])],
                              points[static_cast<std::size_t>(tri[2])]));
}

void TriangularMesh::validate() const {
  const auto n = static_cast<int>(points.size());
  require(n > 0 && !triangles.empty(), ErrorCode::kInvalidArgument,
          "mesh needs at least one triangle");
  std::vector<bool> used(points.size(), false);
  double scale = 0.0;
  for (const auto& p : points) scale = std::max({scale, std::abs(p[0]), std::abs(p[1])});
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int idx : triangles[t]) {
      require(idx >= 0 && idx < n, ErrorCode::kInvalidArgument,
              "triangle " + std::to_string(t) + " has an index out of range");
      used[static_cast<std::size_t>(idx)] = true;
    }
    const auto& tri = triangles[t];
    require(tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2],
            ErrorCode::kInvalidArgument,
            "triangle " + std::to_string(t) + " repeats a vertex");
    require(triangle_area(t) > 1e-14 * std::max(1.0, scale * scale),
            ErrorCode::kDomain,
            "triangle " + std::to_string(t) + " has zero area");
  }
  for (std::size_t v = 0; v < used.size(); ++v)
    require(used[v], ErrorCode::kInvalidArgument,
            "vertex " + std::to_string(v) + " belongs to no triangle");
  int count = 0;
  components(adjacency(), &count);
  require(count == 1, ErrorCode::kInvalidArgument, "mesh is not connected");
}

std::vector<std::vector<int>> TriangularMesh::adjacency() const {
  std::vector<std::vector<int>> adj(points.size());
  for (const auto& tri : triangles)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (a != b) adj[static_cast<std::size_t>(tri[a])].push_back(tri[b]);
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

std::vector<std::array<int, 2>> TriangularMesh::edges() const {
  std::vector<std::array<int, 2>> out;
  const auto adj = adjacency();
  for (std::size_t i = 0; i < adj.size(); ++i)
    for (int j : adj[i])
      if (static_cast<int>(i) < j) out.push_back({static_cast<int>(i), j});
  return out;
}

double TriangularMesh::median_edge_length() const {
  std::vector<double> len;
  for (const auto& e : edges()) {
    const auto& a = points[static_cast<std::size_t>(e[0])];
    const auto& b = points[static_cast<std::size_t>(e[1])];
    len.push_back(std::hypot(a[0] - b[0], a[1] - b[1]));
  }
  require(!len.empty(), ErrorCode::kInvalidArgument, "mesh has no edges");
  std::sort(len.begin(), len.end());
  const std::size_t m = len.size();
  return m % 2 == 1 ? len[m / 2] : 0.5 * (len[m / 2 - 1] + len[m / 2]);
}

TriangularMesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open mesh file " + path);
  long long nv = -1, nt = -1;
  require(static_cast<bool>(in >> nv >> nt) && nv > 0 && nt > 0, ErrorCode::kParse,
          path + ": expected header 'L n_triangles'");
  TriangularMesh mesh;
  mesh.points.resize(static_cast<std::size_t>(nv));
  for (auto& p : mesh.points)
    require(static_cast<bool>(in >> p[0] >> p[1]), ErrorCode::kParse,
            path + ": truncated vertex list");
  mesh.triangles.resize(static_cast<std::size_t>(nt));
  for (auto& t : mesh.triangles)
    require(static_cast<bool>(in >> t[0] >> t[1] >> t[2]), ErrorCode::kParse,
            path + ": truncated triangle list");
  mesh.validate();
  return mesh;
}

void write_mesh(const std::string& path, const TriangularMesh& mesh) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write mesh file " + path);
  out.precision(17);
  out << mesh.n_vertices() << ' ' << mesh.n_triangles() << '\n';
  for (const auto& p : mesh.points) out << p[0] << ' ' << p[1] << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

GridMesh make_grid_mesh(const std::vector<bool>& mask, int width, int height,
                        double spacing) {
  require(width >= 2 && height >= 2, ErrorCode::kInvalidArgument,
          "grid mesh needs at least 2 x 2 pixels");
  require(mask.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
          ErrorCode::kDimensionMismatch, "mask size does not match width x height");
  require(spacing > 0.0, ErrorCode::kInvalidArgument, "spacing must be positive");
  auto at = [&](int x, int y) { return mask[static_cast<std::size_t>(y * width + x)]; };
  auto pix = [&](int x, int y) { return y * width + x; };

  // Triangles over pixel indices first.
  std::vector<std::array<int, 3>> tri_pix;
  for (int y = 0; y + 1 < height; ++y) {
    for (int x = 0; x + 1 < width; ++x) {
      const int a = pix(x, y), b = pix(x + 1, y), c = pix(x, y + 1), d = pix(x + 1, y + 1);
      const bool ma = at(x, y), mb = at(x + 1, y), mc = at(x, y + 1), md = at(x + 1, y + 1);
      const int count = ma + mb + mc + md;
      if (count == 4) {
        tri_pix.push_back({a, b, d});
        tri_pix.push_back({a, d, c});
      } else if (count == 3) {
        if (!ma) tri_pix.push_back({b, d, c});
        if (!mb) tri_pix.push_back({a, d, c});
        if (!mc) tri_pix.push_back({a, b, d});
        if (!md) tri_pix.push_back({a, b, c});
      }
    }
  }
  require(!tri_pix.empty(), ErrorCode::kInvalidArgument,
          "mask produces no triangles");

  // Keep the largest edge-connected component.
  const std::size_t npix = mask.size();
  std::vector<std::vector<int>> adj(npix);
  for (const auto& t : tri_pix)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) adj[static_cast<std::size_t>(t[i])].push_back(t[j]);
  int ncomp = 0;
  auto comp = components(adj, &ncomp);
  std::vector<std::size_t> size(static_cast<std::size_t>(ncomp), 0);
  for (std::size_t p = 0; p < npix; ++p)
    if (!adj[p].empty()) ++size[static_cast<std::size_t>(comp[p])];
  const int keep = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());

  GridMesh out;
  out.width = width;
  out.height = height;
  out.vertex_of_pixel.assign(npix, -1);
  for (std::size_t p = 0; p < npix; ++p) {
    if (adj[p].empty() || comp[p] != keep) continue;
    out.vertex_of_pixel[p] = static_cast<int>(out.pixel_of_vertex.size());
    out.pixel_of_vertex.push_back(static_cast<int>(p));
    const auto x = static_cast<double>(static_cast<int>(p) % width);
    const auto y = static_cast<double>(static_cast<int>(p) / width);
    out.mesh.points.push_back({x * spacing, y * spacing});
  }
  for (const auto& t : tri_pix) {
    if (comp[static_cast<std::size_t>(t[0])] != keep) continue;
    out.mesh.triangles.push_back({out.vertex_of_pixel[static_cast<std::size_t>(t[0])],
                                  out.vertex_of_pixel[static_cast<std::size_t>(t[1])],
                                  out.vertex_of_pixel[static_cast<std::size_t>(t[2])]});
  }
  out.mesh.validate();
  return out;
}

GridMesh make_unit_square_mesh(int n) {
  require(n >= 2, ErrorCode::kInvalidArgument, "unit square mesh needs n >= 2");
  return make_grid_mesh(std::vector<bool>(static_cast<std::size_t>(n * n), true), n, n,
                        1.0 / (n - 1));
}

}  // namespace nsvr
