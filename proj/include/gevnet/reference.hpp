#pragma once

#include <vector>

#include "gevnet/field.hpp"
#include "gevnet/network.hpp"

// Brute-force oracles kept separate from the optimized OpenMP paths: the
// classical discrete Volterra series evaluated by literal nested loops, a
// naive per-pair evaluation of the order-2 gauge convolution, and the
// flat-grid reduction check tying the two together. Everything here is
// serial on purpose.
namespace gev {

// Dense Volterra kernels on a square window of offsets in [-w, w]^2
// (1-D signals use the row tau_y = 0).
struct VolterraKernelSet {
  int window = 0;       // half width w
  double h0 = 0.0;      // constant term
  std::vector<double> h1;  // [(2w+1)^2]
  std::vector<double> h2;  // [(2w+1)^2][(2w+1)^2]

  int side() const { return 2 * window + 1; }
  double k1(int tx, int ty) const { return h1[(ty + window) * side() + (tx + window)]; }
  double k2(int t1x, int t1y, int t2x, int t2y) const {
    const int i = (t1y + window) * side() + (t1x + window);
    const int j = (t2y + window) * side() + (t2x + window);
    return h2[static_cast<std::size_t>(i) * side() * side() + j];
  }
};

// V f(x) = h0 + sum_tau h1(tau) f(x - tau)
//             + sum_{tau1, tau2} h2(tau1, tau2) f(x - tau1) f(x - tau2),
// zero padding outside the signal; m in {0, 1, 2} truncates the series.
std::vector<double> volterra_discrete(const VolterraKernelSet& kernels,
                                      const std::vector<double>& signal, int width, int height,
                                      int m);

// Literal per-vertex, per-pair evaluation of the order-2 expansion on the
// sphere: explicit rho_in(t_{p<-q}) transport, explicit restricted tensor
// products, own quadrature loop over the Voronoi cells. Level <= 2 only.
FeatureField gevconv_naive(const IcosphereGrid& grid, const GeometryStencil& geom,
                           const LayerSpec& spec, const LayerBasis& basis,
                           const LayerParams& params, int Q, const FeatureField& in);

// Runs the same per-site and per-pair accumulation loop as gevconv_naive on
// a flat periodic-free grid with identity transport and lattice offsets, and
// compares it against volterra_discrete on the same kernels. Returns the
// max absolute discrepancy; the reduction claim says it vanishes.
double planar_reduction_check(const VolterraKernelSet& kernels, const std::vector<double>& signal,
                              int width, int height);

}  // namespace gev
