#include "gevnet/reference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "gevnet/errors.hpp"

namespace gev {

std::vector<double> volterra_discrete(const VolterraKernelSet& kernels,
                                      const std::vector<double>& signal, int width, int height,
                                      int m) {
  if (m < 0) throw ContractViolation("volterra_discrete: m must be >= 0");
  if (signal.size() != static_cast<std::size_t>(width) * height)
    throw ContractViolation("volterra_discrete: signal size mismatch");
  const int w = kernels.window;
  auto sample = [&](int x, int y) -> double {
    if (x < 0 || x >= width || y < 0 || y >= height) return 0.0;  // zero padding
    return signal[static_cast<std::size_t>(y) * width + x];
  };

  std::vector<double> out(signal.size(), 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = kernels.h0;
      if (m >= 1) {
        for (int ty = -w; ty <= w; ++ty)
          for (int tx = -w; tx <= w; ++tx)
            acc += kernels.k1(tx, ty) * sample(x - tx, y - ty);
      }
      if (m >= 2) {
        for (int t1y = -w; t1y <= w; ++t1y)
          for (int t1x = -w; t1x <= w; ++t1x)
            for (int t2y = -w; t2y <= w; ++t2y)
              for (int t2x = -w; t2x <= w; ++t2x)
                acc += kernels.k2(t1x, t1y, t2x, t2y) * sample(x - t1x, y - t1y) *
                       sample(x - t2x, y - t2y);
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

namespace {

// Voronoi cell midpoint average of one angular profile, written again from
// the cell definition rather than shared with the optimized stencil baker.
struct CellAverager {
  std::vector<double> lo, width;  // per ring entry, original entry order

  CellAverager(const std::vector<StencilEntry>& entries, int /*unused*/) {
    const int m = static_cast<int>(entries.size()) - 1;
    std::vector<double> theta(m);
    for (int j = 0; j < m; ++j)
      theta[j] = std::atan2(entries[j + 1].log_coords.y, entries[j + 1].log_coords.x);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return theta[a] < theta[b]; });
    lo.resize(m);
    width.resize(m);
    for (int r = 0; r < m; ++r) {
      const int j = order[r];
      const double prev = theta[order[(r + m - 1) % m]];
      const double next = theta[order[(r + 1) % m]];
      width[j] = 0.5 * wrap_angle_2pi(theta[j] - prev) + 0.5 * wrap_angle_2pi(next - theta[j]);
      lo[j] = theta[j] - 0.5 * wrap_angle_2pi(theta[j] - prev);
    }
  }

  // mean over the cell of ring entry j, scaled by its fraction of the ring
  void average(FactorKind kind, int j, int Q, double out[4]) const {
    const double frac = width[j] / (2.0 * M_PI);
    const int nsamp = std::max<int>(1, static_cast<int>(std::llround(Q * frac)));
    double acc[4] = {0, 0, 0, 0};
    for (int s = 0; s < nsamp; ++s) {
      double val[4] = {};
      factor_eval(kind, lo[j] + (s + 0.5) * width[j] / nsamp, val);
      for (int u = 0; u < 4; ++u) acc[u] += val[u];
    }
    for (int u = 0; u < 4; ++u) out[u] = acc[u] * frac / nsamp;
  }
};

}  // namespace

FeatureField gevconv_naive(const IcosphereGrid& grid, const GeometryStencil& geom,
                           const LayerSpec& spec, const LayerBasis& basis,
                           const LayerParams& params, int Q, const FeatureField& in) {
  if (grid.level > 2)
    throw BoundedResourceError("gevconv_naive: level <= 2 only, this is the slow oracle");
  if (!(in.type == spec.in_type) || in.channels != spec.c_in)
    throw TypeError("gevconv_naive: input does not match the layer spec");

  const FeatureType& ti = spec.in_type;
  const FeatureType& to = spec.out_type;
  const int Din = ti.dim(), Dout = to.dim();
  const int B1 = static_cast<int>(basis.first.size());
  const int B2 = static_cast<int>(basis.second.size());
  FeatureField out = FeatureField::zeros(grid.level, spec.c_out, to);

  for (int p = 0; p < grid.num_vertices(); ++p) {
    const auto& entries = geom.entries[p];
    const int ne = static_cast<int>(entries.size());
    const CellAverager cells(entries, Q);

    // Cell averages of every angular profile at every entry, evaluated once.
    std::vector<std::array<double, 4>> avg(static_cast<std::size_t>(ne) * kNumFactorKinds);
    for (int j = 0; j < ne; ++j) {
      for (int ki = 0; ki < kNumFactorKinds; ++ki) {
        const auto kind = static_cast<FactorKind>(ki);
        double* out4 = avg[static_cast<std::size_t>(j) * kNumFactorKinds + ki].data();
        std::fill(out4, out4 + 4, 0.0);
        if (factor_traits(kind).center != (j == 0)) continue;
        if (j == 0)
          factor_eval(kind, 0.0, out4);
        else
          cells.average(kind, j - 1, Q, out4);
      }
    }
    auto avg_at = [&](int j, FactorKind k) {
      return avg[static_cast<std::size_t>(j) * kNumFactorKinds + static_cast<int>(k)].data();
    };

    // Explicit parallel transport of every neighbor feature into p's frame.
    std::vector<double> g(static_cast<std::size_t>(ne) * spec.c_in * Din);
    for (int j = 0; j < ne; ++j) {
      const Mat2 rho = Mat2::rotation(entries[j].transport);
      for (int ci = 0; ci < spec.c_in; ++ci) {
        const double* f = in.at(entries[j].neighbor, ci);
        double* gj = g.data() + (static_cast<std::size_t>(j) * spec.c_in + ci) * Din;
        for (int s = 0; s < ti.n0; ++s) gj[s] = f[s];
        for (int k = 0; k < ti.n1; ++k) {
          const int o = ti.n0 + 2 * k;
          const Vec2 r = rho * Vec2{f[o], f[o + 1]};
          gj[o] = r.x;
          gj[o + 1] = r.y;
        }
      }
    }

    // First order: K(v_j) as a full d_out x d_in matrix per element.
    std::vector<double> K1(static_cast<std::size_t>(ne) * B1 * Dout * Din, 0.0);
    for (int j = 0; j < ne; ++j) {
      for (int e = 0; e < B1; ++e) {
        const auto& el = basis.first[e];
        const FactorTraits tr = factor_traits(el.k);
        if (tr.center != (j == 0)) continue;
        const double* val = avg_at(j, el.k);
        double* Ke = K1.data() + (static_cast<std::size_t>(j) * B1 + e) * Dout * Din;
        const int ro = to.slot_offset(el.out_slot), co = ti.slot_offset(el.in_slot);
        for (int r = 0; r < irrep_dim(tr.out); ++r)
          for (int c = 0; c < irrep_dim(tr.in); ++c)
            Ke[(ro + r) * Din + (co + c)] = val[r * irrep_dim(tr.in) + c];
      }
    }

    for (int co = 0; co < spec.c_out; ++co) {
      double* o = out.at(p, co);
      if (spec.bias)
        for (int s = 0; s < to.n0; ++s)
          o[s] += params.bias.value[static_cast<std::size_t>(co) * to.n0 + s];

      for (int j = 0; j < ne; ++j) {
        for (int ci = 0; ci < spec.c_in; ++ci) {
          const double* gj = g.data() + (static_cast<std::size_t>(j) * spec.c_in + ci) * Din;
          for (int e = 0; e < B1; ++e) {
            const double c =
                params.coef1.value[(static_cast<std::size_t>(co) * spec.c_in + ci) * B1 + e];
            const double* Ke = K1.data() + (static_cast<std::size_t>(j) * B1 + e) * Dout * Din;
            for (int r = 0; r < Dout; ++r) {
              double acc = 0.0;
              for (int cc = 0; cc < Din; ++cc) acc += Ke[r * Din + cc] * gj[cc];
              o[r] += c * acc;
            }
          }
        }
      }

      if (!spec.second_order) continue;
      // Ordered neighbor pairs including the diagonal; explicit restricted
      // tensor product z = (s1 s2) + (r1 (x) r2) per channel pair.
      for (int j1 = 0; j1 < ne; ++j1) {
        for (int j2 = 0; j2 < ne; ++j2) {
          for (int ci1 = 0; ci1 < spec.c_in; ++ci1) {
            const double* ga = g.data() + (static_cast<std::size_t>(j1) * spec.c_in + ci1) * Din;
            for (int ci2 = 0; ci2 < spec.c_in; ++ci2) {
              const double* gb =
                  g.data() + (static_cast<std::size_t>(j2) * spec.c_in + ci2) * Din;
              const double* crow =
                  params.coef2.value.data() +
                  ((static_cast<std::size_t>(co) * spec.c_in + ci1) * spec.c_in + ci2) * B2;
              for (int e = 0; e < B2; ++e) {
                const auto& el = basis.second[e];
                const FactorTraits ta = factor_traits(el.a), tb = factor_traits(el.b);
                if (ta.center != (j1 == 0) || tb.center != (j2 == 0)) continue;
                const double* va = avg_at(j1, el.a);
                const double* vb = avg_at(j2, el.b);

                // Input pair component for the element's slot pair.
                const int o1 = ti.slot_offset(el.in_slot1), o2 = ti.slot_offset(el.in_slot2);
                const int d1 = ti.slot_dim(el.in_slot1), d2 = ti.slot_dim(el.in_slot2);
                double z[4];
                for (int u = 0; u < d1; ++u)
                  for (int v = 0; v < d2; ++v) z[u * d2 + v] = ga[o1 + u] * gb[o2 + v];

                // K2 = kron(va, vb) applied to z.
                const int ra = irrep_dim(ta.out), rb = irrep_dim(tb.out);
                const int ca = irrep_dim(ta.in), cb = irrep_dim(tb.in);
                const double cw = crow[e];
                const int oo = to.slot_offset(el.out_slot);
                for (int ia = 0; ia < ra; ++ia)
                  for (int ib = 0; ib < rb; ++ib) {
                    double acc = 0.0;
                    for (int ja = 0; ja < ca; ++ja)
                      for (int jb = 0; jb < cb; ++jb)
                        acc += va[ia * ca + ja] * vb[ib * cb + jb] * z[ja * d2 + jb];
                    o[oo + ia * rb + ib] += cw * acc;
                  }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

double planar_reduction_check(const VolterraKernelSet& kernels, const std::vector<double>& signal,
                              int width, int height) {
  // Def 3.3 on a flat grid: trivial representation, identity transport,
  // log coordinates are the lattice offsets, K(v) := h(-v). Same per-site /
  // per-pair loop shape as the spherical oracle above.
  const int w = kernels.window;
  auto sample = [&](int x, int y) -> double {
    if (x < 0 || x >= width || y < 0 || y >= height) return 0.0;
    return signal[static_cast<std::size_t>(y) * width + x];
  };

  std::vector<double> machinery(signal.size(), 0.0);
  const int side = kernels.side();
  const int npatch = side * side;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Patch of transported neighbor features g_j = rho(t_j) f(q_j) = f(x + v_j).
      std::vector<double> g(npatch);
      std::vector<std::pair<int, int>> offs(npatch);
      int idx = 0;
      for (int vy = -w; vy <= w; ++vy)
        for (int vx = -w; vx <= w; ++vx) {
          offs[idx] = {vx, vy};
          g[idx] = 1.0 * sample(x + vx, y + vy);  // trivial rho
          ++idx;
        }
      double acc = kernels.h0;  // order-0 term doubles as the bias
      for (int j = 0; j < npatch; ++j)
        acc += kernels.k1(-offs[j].first, -offs[j].second) * g[j];
      for (int j1 = 0; j1 < npatch; ++j1)
        for (int j2 = 0; j2 < npatch; ++j2)
          acc += kernels.k2(-offs[j1].first, -offs[j1].second, -offs[j2].first,
                            -offs[j2].second) *
                 (g[j1] * g[j2]);  // restricted product of two scalars
      machinery[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }

  const std::vector<double> oracle = volterra_discrete(kernels, signal, width, height, 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i)
    worst = std::max(worst, std::abs(machinery[i] - oracle[i]));
  return worst;
}

}  // namespace gev
