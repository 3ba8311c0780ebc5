#include "gevnet/rotation.hpp"

#include <algorithm>
#include <cmath>

#include "gevnet/errors.hpp"

namespace gev {

namespace {

bool is_rotation_matrix(const Mat3& R) {
  const Mat3 G = R.transpose() * R;
  double dev = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      dev = std::max(dev, std::abs(G.m[i][j] - (i == j ? 1.0 : 0.0)));
  return dev <= 1e-12 && std::abs(R.det() - 1.0) <= 1e-12;
}

// Greedy descent to the vertex closest to x. The icosphere triangulation is
// convex, so the walk cannot get stuck in a non-global optimum.
int nearest_vertex(const IcosphereGrid& grid, const Vec3& x) {
  int cur = 0;
  double best = dot(grid.vertices[cur], x);
  for (;;) {
    int next = cur;
    for (int nb : grid.adjacency[cur]) {
      const double d = dot(grid.vertices[nb], x);
      if (d > best) {
        best = d;
        next = nb;
      }
    }
    if (next == cur) return cur;
    cur = next;
  }
}

// Planar barycentric weights of the radial projection of x onto face f,
// or empty if x is outside the face's spherical triangle.
bool face_barycentric(const IcosphereGrid& grid, const std::array<int, 3>& f,
                      const Vec3& x, std::array<double, 3>& w) {
  const Vec3 &a = grid.vertices[f[0]], &b = grid.vertices[f[1]], &c = grid.vertices[f[2]];
  const double d0 = dot(cross(a, b), x);
  const double d1 = dot(cross(b, c), x);
  const double d2 = dot(cross(c, a), x);
  const double eps = -1e-12;
  if (d0 < eps || d1 < eps || d2 < eps) return false;
  // Solve [a b c] w = x by Cramer's rule.
  const double det = dot(cross(a, b), c);
  w[0] = d1 / det;
  w[1] = d2 / det;
  w[2] = d0 / det;
  const double s = w[0] + w[1] + w[2];
  for (auto& wi : w) wi = std::max(0.0, wi / s);
  const double s2 = w[0] + w[1] + w[2];
  for (auto& wi : w) wi /= s2;
  return true;
}

}  // namespace

RotationOp build_rotation_plan(const Mat3& rotation, const IcosphereGrid& grid) {
  if (!is_rotation_matrix(rotation))
    throw ContractViolation("build_rotation_plan: matrix is not in SO(3)");

  const Mat3 Rinv = rotation.transpose();
  const int n = grid.num_vertices();
  RotationOp op;
  op.rotation = rotation;
  op.level = grid.level;
  op.plan.resize(n);
  op.is_permutation = true;

#pragma omp parallel for schedule(static)
  for (int p = 0; p < n; ++p) {
    const Vec3 x = Rinv * grid.vertices[p];
    const int nv = nearest_vertex(grid, x);

    // Pushforward correction: the target frame vs the rotated lookup frame.
    const GaugeFrame gx = reference_gauge(x);
    const Vec3 re1 = rotation * gx.e1;
    const GaugeFrame& gp = grid.gauge_frames[p];
    const double correction =
        wrap_angle_2pi(std::atan2(dot(re1, gp.e2), dot(re1, gp.e1)));

    if (norm(grid.vertices[nv] - x) < 1e-9) {
      // Grid symmetry: exact source vertex. reference_gauge(x) coincides with
      // the source frame, so the correction alone aligns the feature.
      op.plan[p] = {{nv, 1.0, correction}};
      continue;
    }
    op.is_permutation = false;

    std::array<double, 3> w;
    const std::array<int, 3>* hit = nullptr;
    for (int fi : grid.vertex_faces[nv]) {
      if (face_barycentric(grid, grid.faces[fi], x, w)) {
        hit = &grid.faces[fi];
        break;
      }
    }
    if (hit == nullptr) {
      for (const auto& f : grid.faces) {  // fallback sweep
        if (face_barycentric(grid, f, x, w)) {
          hit = &f;
          break;
        }
      }
    }
    if (hit == nullptr)
      throw SingularGeometryError("build_rotation_plan: no containing face found");

    for (int k = 0; k < 3; ++k) {
      const int src = (*hit)[k];
      ResampleEntry e;
      e.src = src;
      e.weight = w[k];
      // Align the corner feature with the lookup point's frame, then push
      // through the rotation.
      const double t = transport_angle(x, grid.vertices[src], gx, grid.gauge_frames[src]);
      e.angle = wrap_angle_2pi(correction + t);
      op.plan[p].push_back(e);
    }
  }
  return op;
}

std::vector<Mat3> icosahedral_rotations() {
  const IcosphereGrid ico = build_icosphere(0);
  const int n0 = ico.adjacency[0][0];
  auto frame_for = [&](int v, int nb) {
    const Vec3 a = ico.vertices[v];
    const Vec3 b = normalized(ico.vertices[nb] - a * dot(a, ico.vertices[nb]));
    return Mat3::from_columns(a, b, cross(a, b));
  };
  const Mat3 base = frame_for(0, n0).transpose();

  // The rotation group acts simply transitively on (vertex, incident edge)
  // flags: 12 * 5 = 60 elements.
  std::vector<Mat3> rots;
  rots.reserve(60);
  for (int v = 0; v < ico.num_vertices(); ++v)
    for (int nb : ico.adjacency[v])
      rots.push_back(frame_for(v, nb) * base);
  return rots;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double q[4];
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& qi : q) {
      qi = gauss(rng);
      n2 += qi * qi;
    }
  } while (n2 < 1e-12);
  const double s = 1.0 / std::sqrt(n2);
  const double w = q[0] * s, x = q[1] * s, y = q[2] * s, z = q[3] * s;
  Mat3 R;
  R.m[0][0] = 1 - 2 * (y * y + z * z);
  R.m[0][1] = 2 * (x * y - w * z);
  R.m[0][2] = 2 * (x * z + w * y);
  R.m[1][0] = 2 * (x * y + w * z);
  R.m[1][1] = 1 - 2 * (x * x + z * z);
  R.m[1][2] = 2 * (y * z - w * x);
  R.m[2][0] = 2 * (x * z - w * y);
  R.m[2][1] = 2 * (y * z + w * x);
  R.m[2][2] = 1 - 2 * (x * x + y * y);
  return R;
}

}  // namespace gev
