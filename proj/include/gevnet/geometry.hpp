#pragma once

#include <array>
#include <vector>

#include "gevnet/linalg.hpp"

// Icospherical grids, tangent gauges, Riemannian exp/log on the unit sphere,
// closed-form parallel transport, neighbor stencils and pooling hierarchies.
//
// All structures here are immutable once built and safe to read from many
// threads. Construction loops are parallelized over vertices where it pays.
namespace gev {

// Orthonormal, positively oriented tangent frame (e1, e2) at a sphere point.
struct GaugeFrame {
  Vec3 e1, e2;
};

struct IcosphereGrid {
  int level = 0;
  std::vector<Vec3> vertices;                // unit 3-vectors
  std::vector<std::vector<int>> adjacency;   // 5 or 6 neighbors per vertex
  std::vector<std::array<int, 3>> faces;     // outward-oriented triangles
  std::vector<std::vector<int>> vertex_faces;  // faces incident to each vertex
  std::vector<GaugeFrame> gauge_frames;
  double ring_radius = 0.0;                  // mean geodesic neighbor distance

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int valence(int v) const { return static_cast<int>(adjacency[v].size()); }
};

// Expected vertex count 10*4^level + 2.
std::size_t icosphere_vertex_count(int level);

// Subdivided icosahedron projected to the unit sphere. Vertices of level L
// are a prefix of the vertices of level L+1 (nested subdivision).
// Throws BoundedResourceError for level < 0 or level > 7.
IcosphereGrid build_icosphere(int level);

// Geodesic shooting: returns cos(|v|) p + sin(|v|) v/|v|; p itself for |v| ~ 0.
// Throws ContractViolation if v is not tangent at p (|v.p| > 1e-10).
Vec3 exp_map(const Vec3& p, const Vec3& v);

// Inverse of exp_map: tangent vector at p of length arccos(p.q) pointing
// toward q. Throws SingularGeometryError for (near-)antipodal pairs.
Vec3 log_map(const Vec3& p, const Vec3& q);

// Deterministic local east/north gauge from the global z-axis, with an
// x-axis based fallback inside the polar caps where z x p degenerates.
GaugeFrame reference_gauge(const Vec3& p);

// Fills grid.gauge_frames with reference_gauge at every vertex.
void build_gauges(IcosphereGrid& grid);

// Closed-form Levi-Civita transport along the geodesic q -> p: rotation in
// the plane spanned by p and q. Maps T_q S^2 to T_p S^2.
Mat3 parallel_transport(const Vec3& q, const Vec3& p);

// Angle t of the SO(2) matrix expressing (transport of gauge_q to p) in
// gauge_p coordinates: rho_1(t) applied to q-frame coordinates of a
// transported vector yields its p-frame coordinates.
double transport_angle(const Vec3& p, const Vec3& q, const GaugeFrame& gauge_p,
                       const GaugeFrame& gauge_q);

// One directed edge of the stencil: entry 0 of each vertex is the vertex
// itself (log_coords = 0, transport = 0), entries 1.. are the 1-ring.
struct StencilEntry {
  int neighbor = -1;
  Vec2 log_coords;    // w_p^{-1}(log_p q), radians of arc length
  double transport = 0.0;  // t_{p <- q} in [0, 2pi)
};

struct GeometryStencil {
  int level = 0;
  double ring_radius = 0.0;
  std::vector<std::vector<StencilEntry>> entries;  // per vertex

  // For the backward gather: all (vertex p, entry index j) with
  // entries[p][j].neighbor == q, for each q.
  std::vector<std::vector<std::pair<int, int>>> reverse_edges;
};

GeometryStencil build_stencil(const IcosphereGrid& grid);

// Variant used by the gauge-equivariance suites: frames at each vertex are
// the grid's frames rotated in-plane by the given angles (new e1 =
// cos(a) e1 + sin(a) e2, i.e. w~ = w o rot(a)).
GeometryStencil build_stencil_with_gauge(const IcosphereGrid& grid,
                                         const std::vector<double>& gauge_angles);

struct PoolCell {
  int fine = -1;       // fine-grid vertex index
  double weight = 0.0; // averaging weight; sums to 1 per coarse vertex
  double transport = 0.0;  // t_{coarse <- fine}
};

struct HierarchyStep {
  int coarse_level = 0;
  std::vector<std::vector<PoolCell>> cells;  // per coarse vertex
};

struct GridHierarchy {
  std::vector<IcosphereGrid> grids;    // levels 0..max_level
  std::vector<HierarchyStep> steps;    // steps[l]: level l+1 -> level l
};

// Grids 0..max_level plus pooling tables. Each coarse vertex averages itself
// and its fine-grid 1-ring, features transported into the coarse frame.
GridHierarchy build_hierarchy(int max_level);

}  // namespace gev
