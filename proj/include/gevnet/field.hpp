#pragma once

#include <vector>

#include "gevnet/rotation.hpp"
#include "gevnet/steerable.hpp"

namespace gev {

// Per-vertex feature coefficients on an icosphere level. Values are indexed
// [vertex][channel][component] with every channel sharing one FeatureType.
struct FeatureField {
  int level = 0;
  int channels = 0;
  FeatureType type;
  std::vector<double> values;

  static FeatureField zeros(int level, int channels, FeatureType type) {
    FeatureField f;
    f.level = level;
    f.channels = channels;
    f.type = type;
    f.values.assign(icosphere_vertex_count(level) * channels * type.dim(), 0.0);
    return f;
  }
  int num_vertices() const { return static_cast<int>(icosphere_vertex_count(level)); }
  double* at(int v, int c) { return values.data() + (static_cast<std::size_t>(v) * channels + c) * type.dim(); }
  const double* at(int v, int c) const {
    return values.data() + (static_cast<std::size_t>(v) * channels + c) * type.dim();
  }
};

// Re-coordinatizes a field under per-vertex gauge rotations: vector slots
// pick up rho_1(t^-1), scalar slots are untouched.
FeatureField gauge_transform_field(const FeatureField& f, const std::vector<double>& angles);

// Barycentric resampling along a rotation plan with per-entry SO(2)
// correction of the vector slots.
FeatureField rotate_field(const RotationOp& op, const FeatureField& f);

}  // namespace gev
