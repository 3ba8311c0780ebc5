#include "gevnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gevnet/errors.hpp"

namespace gev {

std::size_t icosphere_vertex_count(int level) {
  return 10u * (std::size_t{1} << (2 * level)) + 2u;
}

namespace {

struct MeshTopo {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

MeshTopo base_icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p = normalized(p);
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  // Make every face outward-oriented: (a x b) . c > 0.
  for (auto& face : f) {
    const Vec3 &a = v[face[0]], &b = v[face[1]], &c = v[face[2]];
    if (dot(cross(a, b), c) < 0.0) std::swap(face[1], face[2]);
  }
  return {std::move(v), std::move(f)};
}

MeshTopo subdivide(const MeshTopo& mesh) {
  MeshTopo out;
  out.vertices = mesh.vertices;  // originals keep their indices
  out.faces.reserve(mesh.faces.size() * 4);
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int idx = static_cast<int>(out.vertices.size());
    out.vertices.push_back(normalized(mesh.vertices[a] + mesh.vertices[b]));
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& f : mesh.faces) {
    const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
    out.faces.push_back({f[0], ab, ca});
    out.faces.push_back({f[1], bc, ab});
    out.faces.push_back({f[2], ca, bc});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

}  // namespace

IcosphereGrid build_icosphere(int level) {
  if (level < 0 || level > 7)
    throw BoundedResourceError("icosphere level must be in [0, 7], got " + std::to_string(level));

  MeshTopo mesh = base_icosahedron();
  for (int l = 0; l < level; ++l) mesh = subdivide(mesh);

  IcosphereGrid grid;
  grid.level = level;
  grid.vertices = std::move(mesh.vertices);
  grid.faces = std::move(mesh.faces);

  const int n = grid.num_vertices();
  std::vector<std::set<int>> adj(n);
  grid.vertex_faces.assign(n, {});
  for (std::size_t fi = 0; fi < grid.faces.size(); ++fi) {
    const auto& f = grid.faces[fi];
    for (int k = 0; k < 3; ++k) {
      adj[f[k]].insert(f[(k + 1) % 3]);
      adj[f[k]].insert(f[(k + 2) % 3]);
      grid.vertex_faces[f[k]].push_back(static_cast<int>(fi));
    }
  }
  grid.adjacency.resize(n);
  for (int i = 0; i < n; ++i) grid.adjacency[i].assign(adj[i].begin(), adj[i].end());

  build_gauges(grid);

  double sum = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j : grid.adjacency[i]) {
      sum += std::acos(std::clamp(dot(grid.vertices[i], grid.vertices[j]), -1.0, 1.0));
      ++count;
    }
  }
  grid.ring_radius = sum / static_cast<double>(count);
  return grid;
}

Vec3 exp_map(const Vec3& p, const Vec3& v) {
  if (std::abs(dot(p, v)) > 1e-10)
    throw ContractViolation("exp_map: v is not tangent at p");
  const double r = norm(v);
  if (r < 1e-14) return p;
  return p * std::cos(r) + (v / r) * std::sin(r);
}

Vec3 log_map(const Vec3& p, const Vec3& q) {
  const double c = std::clamp(dot(p, q), -1.0, 1.0);
  if (c <= -1.0 + 1e-8)
    throw SingularGeometryError("log_map: antipodal points");
  const Vec3 perp = q - p * c;  // component of q orthogonal to p
  const double s = norm(perp);
  if (s < 1e-14) return {0.0, 0.0, 0.0};
  return (perp / s) * std::acos(c);
}

GaugeFrame reference_gauge(const Vec3& p) {
  const Vec3 zhat{0.0, 0.0, 1.0};
  Vec3 a = cross(zhat, p);
  if (norm(a) < 1e-8) {
    // Polar fallback.
    a = cross(Vec3{1.0, 0.0, 0.0}, p);
  }
  GaugeFrame g;
  g.e1 = normalized(a);
  g.e2 = cross(p, g.e1);
  return g;
}

void build_gauges(IcosphereGrid& grid) {
  grid.gauge_frames.resize(grid.vertices.size());
  for (std::size_t i = 0; i < grid.vertices.size(); ++i)
    grid.gauge_frames[i] = reference_gauge(grid.vertices[i]);
}

Mat3 parallel_transport(const Vec3& q, const Vec3& p) {
  const double c = std::clamp(dot(p, q), -1.0, 1.0);
  if (c <= -1.0 + 1e-8)
    throw SingularGeometryError("parallel_transport: antipodal points");
  const Vec3 axis = cross(q, p);
  const double s = norm(axis);
  if (s < 1e-14) return Mat3::identity();
  return Mat3::axis_angle(axis / s, std::acos(c));
}

double transport_angle(const Vec3& p, const Vec3& q, const GaugeFrame& gauge_p,
                       const GaugeFrame& gauge_q) {
  const Mat3 T = parallel_transport(q, p);
  const Vec3 t1 = T * gauge_q.e1;
  // rho_1(t) has columns (transported e_j) written in the p-frame.
  return wrap_angle_2pi(std::atan2(dot(t1, gauge_p.e2), dot(t1, gauge_p.e1)));
}

namespace {

GeometryStencil build_stencil_impl(const IcosphereGrid& grid,
                                   const std::vector<GaugeFrame>& frames) {
  const int n = grid.num_vertices();
  GeometryStencil st;
  st.level = grid.level;
  st.ring_radius = grid.ring_radius;
  st.entries.resize(n);

#pragma omp parallel for schedule(static)
  for (int p = 0; p < n; ++p) {
    auto& row = st.entries[p];
    row.reserve(grid.adjacency[p].size() + 1);
    row.push_back({p, {0.0, 0.0}, 0.0});
    const GaugeFrame& gp = frames[p];
    for (int q : grid.adjacency[p]) {
      const Vec3 lg = log_map(grid.vertices[p], grid.vertices[q]);
      StencilEntry e;
      e.neighbor = q;
      e.log_coords = {dot(lg, gp.e1), dot(lg, gp.e2)};
      e.transport = transport_angle(grid.vertices[p], grid.vertices[q], gp, frames[q]);
      row.push_back(e);
    }
  }

  st.reverse_edges.resize(n);
  for (int p = 0; p < n; ++p)
    for (std::size_t j = 0; j < st.entries[p].size(); ++j)
      st.reverse_edges[st.entries[p][j].neighbor].push_back({p, static_cast<int>(j)});
  return st;
}

}  // namespace

GeometryStencil build_stencil(const IcosphereGrid& grid) {
  return build_stencil_impl(grid, grid.gauge_frames);
}

GeometryStencil build_stencil_with_gauge(const IcosphereGrid& grid,
                                         const std::vector<double>& gauge_angles) {
  if (gauge_angles.size() != grid.vertices.size())
    throw ContractViolation("build_stencil_with_gauge: one angle per vertex required");
  std::vector<GaugeFrame> frames(grid.vertices.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const GaugeFrame& g = grid.gauge_frames[i];
    const double c = std::cos(gauge_angles[i]), s = std::sin(gauge_angles[i]);
    frames[i].e1 = g.e1 * c + g.e2 * s;
    frames[i].e2 = g.e1 * (-s) + g.e2 * c;
  }
  return build_stencil_impl(grid, frames);
}

GridHierarchy build_hierarchy(int max_level) {
  if (max_level < 1)
    throw ContractViolation("build_hierarchy: max_level must be >= 1");
  GridHierarchy h;
  for (int l = 0; l <= max_level; ++l) h.grids.push_back(build_icosphere(l));

  for (int l = 0; l < max_level; ++l) {
    const IcosphereGrid& coarse = h.grids[l];
    const IcosphereGrid& fine = h.grids[l + 1];
    HierarchyStep step;
    step.coarse_level = l;
    step.cells.resize(coarse.num_vertices());
    // Nested subdivision: coarse vertex i sits at fine vertex i.
    for (int i = 0; i < coarse.num_vertices(); ++i) {
      std::vector<int> fine_nbrs = {i};
      fine_nbrs.insert(fine_nbrs.end(), fine.adjacency[i].begin(), fine.adjacency[i].end());
      const double w = 1.0 / static_cast<double>(fine_nbrs.size());
      for (int q : fine_nbrs) {
        PoolCell cell;
        cell.fine = q;
        cell.weight = w;
        cell.transport = (q == i) ? 0.0
                                  : transport_angle(fine.vertices[i], fine.vertices[q],
                                                    fine.gauge_frames[i], fine.gauge_frames[q]);
        step.cells[i].push_back(cell);
      }
    }
    h.steps.push_back(std::move(step));
  }
  return h;
}

}  // namespace gev
