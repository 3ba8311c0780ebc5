#include "gevnet/field.hpp"

#include <cmath>

#include "gevnet/errors.hpp"

namespace gev {

FeatureField gauge_transform_field(const FeatureField& f, const std::vector<double>& angles) {
  if (angles.size() != static_cast<std::size_t>(f.num_vertices()))
    throw ContractViolation("gauge_transform_field: one angle per vertex required");
  FeatureField out = f;
  const int nv = f.num_vertices();
  for (int v = 0; v < nv; ++v) {
    const double c = std::cos(angles[v]), s = std::sin(angles[v]);
    for (int ch = 0; ch < f.channels; ++ch) {
      double* d = out.at(v, ch);
      for (int k = 0; k < f.type.n1; ++k) {
        const int o = f.type.n0 + 2 * k;
        const double x = d[o], y = d[o + 1];
        // rho_1(t^-1) = R(-angle)
        d[o] = c * x + s * y;
        d[o + 1] = -s * x + c * y;
      }
    }
  }
  return out;
}

FeatureField rotate_field(const RotationOp& op, const FeatureField& f) {
  if (op.level != f.level)
    throw ContractViolation("rotate_field: plan level does not match field level");
  FeatureField out = FeatureField::zeros(f.level, f.channels, f.type);
  const int nv = f.num_vertices();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < nv; ++v) {
    for (const ResampleEntry& e : op.plan[v]) {
      const double c = std::cos(e.angle), s = std::sin(e.angle);
      for (int ch = 0; ch < f.channels; ++ch) {
        const double* src = f.at(e.src, ch);
        double* dst = out.at(v, ch);
        for (int i = 0; i < f.type.n0; ++i) dst[i] += e.weight * src[i];
        for (int k = 0; k < f.type.n1; ++k) {
          const int o = f.type.n0 + 2 * k;
          dst[o] += e.weight * (c * src[o] - s * src[o + 1]);
          dst[o + 1] += e.weight * (s * src[o] + c * src[o + 1]);
        }
      }
    }
  }
  return out;
}

}  // namespace gev
