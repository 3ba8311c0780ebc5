#include <algorithm>
#include <cmath>
#include <numeric>

#include "gevnet/errors.hpp"
#include "gevnet/steerable.hpp"

namespace gev {

namespace {

// Right-composes the evaluated profile with rho_in(t) when the input irrep
// is rho_1; scalars are untouched.
void compose_transport(FactorKind kind, double transport, double m[4]) {
  if (factor_traits(kind).in != Irrep::Vector) return;
  const Mat2 r = Mat2::rotation(transport);
  const int rows = irrep_dim(factor_traits(kind).out);
  for (int i = 0; i < rows; ++i) {
    const double a = m[i * 2 + 0], b = m[i * 2 + 1];
    m[i * 2 + 0] = a * r.m[0][0] + b * r.m[1][0];
    m[i * 2 + 1] = a * r.m[0][1] + b * r.m[1][1];
  }
}

}  // namespace

ConvStencil homogenize_stencil(const GeometryStencil& geom, int Q) {
  int max_valence = 0;
  for (const auto& row : geom.entries)
    max_valence = std::max(max_valence, static_cast<int>(row.size()) - 1);
  if (Q < 4 * max_valence)
    throw BoundedResourceError("homogenize_stencil: Q must be >= 4 * max valence");

  const int n = static_cast<int>(geom.entries.size());
  ConvStencil st;
  st.level = geom.level;
  st.quadrature = Q;
  st.neighbor.resize(n);
  st.factors.resize(n);
  st.reverse_edges = geom.reverse_edges;

#pragma omp parallel for schedule(static)
  for (int p = 0; p < n; ++p) {
    const auto& row = geom.entries[p];
    const int m = static_cast<int>(row.size()) - 1;  // ring size
    st.neighbor[p].resize(row.size());
    st.factors[p].resize(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) st.neighbor[p][j] = row[j].neighbor;

    // Center entry: frequency-0 profiles with unit weight, transport 0.
    auto& self = st.factors[p][0];
    self.k[static_cast<int>(FactorKind::ScalarCenter)][0] = 1.0;
    factor_eval(FactorKind::MatIdCenter, 0.0, self.k[static_cast<int>(FactorKind::MatIdCenter)]);
    factor_eval(FactorKind::MatRotCenter, 0.0, self.k[static_cast<int>(FactorKind::MatRotCenter)]);

    // Angular Voronoi cells of the ring neighbors: boundaries midway between
    // consecutive neighbor angles in the gauge.
    std::vector<double> theta(m);
    for (int j = 0; j < m; ++j)
      theta[j] = std::atan2(row[j + 1].log_coords.y, row[j + 1].log_coords.x);
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return theta[a] < theta[b]; });

    for (int r = 0; r < m; ++r) {
      const int j = order[r];
      const double th = theta[j];
      const double prev = theta[order[(r + m - 1) % m]];
      const double next = theta[order[(r + 1) % m]];
      const double lo = th - 0.5 * wrap_angle_2pi(th - prev);
      const double width = 0.5 * wrap_angle_2pi(th - prev) + 0.5 * wrap_angle_2pi(next - th);
      const double frac = width / (2.0 * M_PI);
      const int nsamp = std::max<int>(1, static_cast<int>(std::llround(Q * frac)));

      auto& fm = st.factors[p][j + 1];
      for (int ki = 0; ki < kNumFactorKinds; ++ki) {
        const auto kind = static_cast<FactorKind>(ki);
        if (factor_traits(kind).center) continue;
        double acc[4] = {0, 0, 0, 0};
        for (int s = 0; s < nsamp; ++s) {
          double val[4] = {};
          factor_eval(kind, lo + (s + 0.5) * width / nsamp, val);
          for (int u = 0; u < 4; ++u) acc[u] += val[u];
        }
        // Cell mean scaled by cell fraction, then the transporter.
        for (int u = 0; u < 4; ++u) fm.k[ki][u] = acc[u] * frac / nsamp;
        compose_transport(kind, row[j + 1].transport, fm.k[ki]);
      }
    }
  }
  return st;
}

namespace {

// Places a (slot x slot) block into the full d_out x d_in matrix.
void scatter_block(std::vector<double>& out, int d_in, int row0, int col0,
                   const double* block, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[(row0 + i) * d_in + (col0 + j)] = block[i * cols + j];
}

}  // namespace

std::vector<double> materialize_kernel1(const ConvStencil& st, const LayerBasis& basis,
                                        std::size_t elem, int v, int entry) {
  const auto& e = basis.first.at(elem);
  const FactorTraits tr = factor_traits(e.k);
  std::vector<double> out(basis.out.dim() * basis.in.dim(), 0.0);
  scatter_block(out, basis.in.dim(), basis.out.slot_offset(e.out_slot),
                basis.in.slot_offset(e.in_slot), st.factors[v][entry].k[static_cast<int>(e.k)],
                irrep_dim(tr.out), irrep_dim(tr.in));
  return out;
}

std::vector<double> materialize_kernel2(const ConvStencil& st, const LayerBasis& basis,
                                        std::size_t elem, int v, int entry1, int entry2) {
  const auto& e = basis.second.at(elem);
  const FactorTraits ta = factor_traits(e.a), tb = factor_traits(e.b);
  const double* ma = st.factors[v][entry1].k[static_cast<int>(e.a)];
  const double* mb = st.factors[v][entry2].k[static_cast<int>(e.b)];
  const int ra = irrep_dim(ta.out), ca = irrep_dim(ta.in);
  const int rb = irrep_dim(tb.out), cb = irrep_dim(tb.in);
  // Kronecker product of the two evaluated factors, rows = d(out slot),
  // cols = pair dimension (1 for scalar pairs, 4 for vector pairs).
  std::vector<double> out(static_cast<std::size_t>(ra * rb) * (ca * cb), 0.0);
  for (int ia = 0; ia < ra; ++ia)
    for (int ib = 0; ib < rb; ++ib)
      for (int ja = 0; ja < ca; ++ja)
        for (int jb = 0; jb < cb; ++jb)
          out[(ia * rb + ib) * (ca * cb) + (ja * cb + jb)] = ma[ia * ca + ja] * mb[ib * cb + jb];
  return out;
}

}  // namespace gev
