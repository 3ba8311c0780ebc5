#pragma once

#include <random>
#include <vector>

#include "gevnet/geometry.hpp"

namespace gev {

// One source contribution to a resampled target vertex. The angle is the
// full SO(2) correction applied to rho_1 parts of the source feature: frame
// alignment at the source, transport to the lookup point, and the rotation
// pushforward onto the target frame, composed into a single rotation.
struct ResampleEntry {
  int src = -1;
  double weight = 0.0;
  double angle = 0.0;
};

struct RotationOp {
  Mat3 rotation;
  int level = 0;
  std::vector<std::vector<ResampleEntry>> plan;  // per target vertex
  bool is_permutation = false;  // every target resolves to a single source with weight 1
};

// Resampling plan for (R f)(p) = corrected f(R^{-1} p). R must be a rotation
// (R^T R = I to 1e-12, det = +1), else ContractViolation. When R maps the
// grid onto itself the plan degenerates to an exact permutation.
RotationOp build_rotation_plan(const Mat3& rotation, const IcosphereGrid& grid);

// The 60 rotations of the icosahedral symmetry group, each mapping every
// icosphere level onto itself.
std::vector<Mat3> icosahedral_rotations();

// Haar-uniform random rotation from a seeded generator (uniform unit quaternion).
Mat3 random_rotation(std::mt19937_64& rng);

}  // namespace gev
