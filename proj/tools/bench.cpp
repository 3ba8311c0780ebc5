// Benchmark: OpenMP stencil convolution against the serial per-pair
// reference oracle, with an agreement check. Usage: gevnet_bench [level].

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gevnet/reference.hpp"

using namespace gev;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int level = argc > 1 ? std::atoi(argv[1]) : 2;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  if (level > 2) {
    std::cerr << "reference path is guarded to level <= 2\n";
    return 2;
  }

  const IcosphereGrid grid = build_icosphere(level);
  const GeometryStencil geom = build_stencil(grid);
  const ConvStencil st = homogenize_stencil(geom, 1000);

  const LayerSpec spec = gevconv(2, FeatureType::scalar_vector(), 2, FeatureType::scalar_vector());
  const LayerBasis basis = make_layer_basis(spec.out_type, spec.in_type, true);

  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 0.5);
  LayerParams par;
  par.coef1.resize(static_cast<std::size_t>(spec.c_out) * spec.c_in * basis.first.size());
  par.coef2.resize(static_cast<std::size_t>(spec.c_out) * spec.c_in * spec.c_in *
                   basis.second.size());
  par.bias.resize(static_cast<std::size_t>(spec.c_out) * spec.out_type.n0);
  for (Param* p : {&par.coef1, &par.coef2, &par.bias})
    for (double& x : p->value) x = g(rng);

  FeatureField in = FeatureField::zeros(level, spec.c_in, spec.in_type);
  for (double& x : in.values) x = g(rng);

  std::vector<double> out_fast(in.num_vertices() * spec.c_out * spec.out_type.dim());

#ifdef _OPENMP
  std::cout << "threads: " << omp_get_max_threads() << "\n";
#else
  std::cout << "threads: 1 (no OpenMP)\n";
#endif
  std::cout << "level " << level << ", " << grid.num_vertices() << " vertices, "
            << basis.first.size() << " first order and " << basis.second.size()
            << " second order basis elements per channel block\n";

  double t0 = now_seconds();
  for (int r = 0; r < reps; ++r)
    conv_forward(spec, basis, st, par, in.values.data(), 1, out_fast.data());
  const double fast = (now_seconds() - t0) / reps;

  t0 = now_seconds();
  FeatureField out_ref;
  const int ref_reps = std::max(1, reps / 10);
  for (int r = 0; r < ref_reps; ++r)
    out_ref = gevconv_naive(grid, geom, spec, basis, par, 1000, in);
  const double slow = (now_seconds() - t0) / ref_reps;

  double worst = 0.0;
  for (std::size_t i = 0; i < out_fast.size(); ++i)
    worst = std::max(worst, std::abs(out_fast[i] - out_ref.values[i]));

  std::cout << "optimized forward: " << fast * 1e3 << " ms\n";
  std::cout << "serial reference:  " << slow * 1e3 << " ms  (x" << slow / fast << ")\n";
  std::cout << "max |difference|:  " << worst << "\n";
  return worst <= 1e-12 ? 0 : 1;
}
