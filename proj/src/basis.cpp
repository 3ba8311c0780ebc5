#include "gevnet/steerable.hpp"

#include <cmath>
#include <random>

#include "gevnet/errors.hpp"

namespace gev {

FactorTraits factor_traits(FactorKind k) {
  switch (k) {
    case FactorKind::ScalarRing:   return {Irrep::Scalar, Irrep::Scalar, false};
    case FactorKind::ScalarCenter: return {Irrep::Scalar, Irrep::Scalar, true};
    case FactorKind::ProjCos:      return {Irrep::Vector, Irrep::Scalar, false};
    case FactorKind::ProjSin:      return {Irrep::Vector, Irrep::Scalar, false};
    case FactorKind::GradCos:      return {Irrep::Scalar, Irrep::Vector, false};
    case FactorKind::GradSin:      return {Irrep::Scalar, Irrep::Vector, false};
    case FactorKind::MatId:        return {Irrep::Vector, Irrep::Vector, false};
    case FactorKind::MatRot:       return {Irrep::Vector, Irrep::Vector, false};
    case FactorKind::MatRef0:      return {Irrep::Vector, Irrep::Vector, false};
    case FactorKind::MatRef1:      return {Irrep::Vector, Irrep::Vector, false};
    case FactorKind::MatIdCenter:  return {Irrep::Vector, Irrep::Vector, true};
    case FactorKind::MatRotCenter: return {Irrep::Vector, Irrep::Vector, true};
  }
  throw ContractViolation("unknown factor kind");
}

void factor_eval(FactorKind k, double theta, double out[4]) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double c2 = std::cos(2.0 * theta), s2 = std::sin(2.0 * theta);
  switch (k) {
    case FactorKind::ScalarRing:
    case FactorKind::ScalarCenter:
      out[0] = 1.0;
      return;
    case FactorKind::ProjCos:
    case FactorKind::GradCos:
      out[0] = c; out[1] = s;
      return;
    case FactorKind::ProjSin:
    case FactorKind::GradSin:
      out[0] = -s; out[1] = c;
      return;
    case FactorKind::MatId:
    case FactorKind::MatIdCenter:
      out[0] = 1; out[1] = 0; out[2] = 0; out[3] = 1;
      return;
    case FactorKind::MatRot:
    case FactorKind::MatRotCenter:
      out[0] = 0; out[1] = -1; out[2] = 1; out[3] = 0;
      return;
    case FactorKind::MatRef0:
      out[0] = c2; out[1] = s2; out[2] = s2; out[3] = -c2;
      return;
    case FactorKind::MatRef1:
      out[0] = -s2; out[1] = c2; out[2] = c2; out[3] = s2;
      return;
  }
}

KernelBasis1 basis_first_order(Irrep in, Irrep out) {
  KernelBasis1 b;
  b.in = in;
  b.out = out;
  for (int ki = 0; ki < kNumFactorKinds; ++ki) {
    const auto k = static_cast<FactorKind>(ki);
    const FactorTraits t = factor_traits(k);
    if (t.in == in && t.out == out) b.kinds.push_back(k);
  }
  return b;
}

namespace {

// Ordered pairs of first order profiles whose output irreps compose to
// `out`: (rho0, rho0) -> rho0, and (rho1, rho0) or (rho0, rho1) -> rho1.
std::vector<Basis2Element> enumerate_products(Irrep in, Irrep out) {
  std::vector<Basis2Element> elems;
  auto push_products = [&](Irrep out_a, Irrep out_b) {
    const KernelBasis1 ba = basis_first_order(in, out_a);
    const KernelBasis1 bb = basis_first_order(in, out_b);
    for (FactorKind a : ba.kinds)
      for (FactorKind b : bb.kinds) elems.push_back({a, b});
  };
  if (out == Irrep::Scalar) {
    push_products(Irrep::Scalar, Irrep::Scalar);
  } else {
    push_products(Irrep::Vector, Irrep::Scalar);
    push_products(Irrep::Scalar, Irrep::Vector);
  }
  return elems;
}

// Eigenvalues of a small symmetric matrix by cyclic Jacobi sweeps.
std::vector<double> symmetric_eigenvalues(std::vector<double> a, int n) {
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = 0.5 * (a[q * n + q] - a[p * n + p]) / apq;
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a[i * n + i];
  return ev;
}

// Samples one order-2 element as a flat vector over an angle grid. Center
// factors are evaluated only in their own radial bin, ring factors in
// theirs, so radial support participates in the independence test.
std::vector<double> sample_element2(const Basis2Element& e, int grid) {
  const FactorTraits ta = factor_traits(e.a);
  const FactorTraits tb = factor_traits(e.b);
  const int ra = irrep_dim(ta.out) * irrep_dim(ta.in);
  const int rb = irrep_dim(tb.out) * irrep_dim(tb.in);
  // Radial bins: 0 = ring, 1 = center. 4 tag combinations in fixed order.
  std::vector<double> vec;
  for (int tag_a = 0; tag_a < 2; ++tag_a) {
    for (int tag_b = 0; tag_b < 2; ++tag_b) {
      const bool live = (tag_a == 1) == ta.center && (tag_b == 1) == tb.center;
      const int na = ta.center ? 1 : grid;
      const int nb = tb.center ? 1 : grid;
      for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
          double ma[4] = {}, mb[4] = {};
          factor_eval(e.a, 2.0 * M_PI * i / grid + 0.3, ma);
          factor_eval(e.b, 2.0 * M_PI * j / grid + 0.3, mb);
          for (int u = 0; u < ra; ++u)
            for (int v = 0; v < rb; ++v) vec.push_back(live ? ma[u] * mb[v] : 0.0);
        }
      }
    }
  }
  return vec;
}

int gram_rank(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  std::vector<double> g(n * n, 0.0);
  double maxdiag = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      const std::size_t m = std::min(rows[i].size(), rows[j].size());
      for (std::size_t k = 0; k < m; ++k) s += rows[i][k] * rows[j][k];
      g[i * n + j] = s;
    }
    maxdiag = std::max(maxdiag, g[i * n + i]);
  }
  const auto ev = symmetric_eigenvalues(std::move(g), n);
  // Dependence threshold: singular values below 1e-8 of the largest.
  const double cut = maxdiag * 1e-16;
  int rank = 0;
  for (double e : ev)
    if (e > cut) ++rank;
  return rank;
}

}  // namespace

KernelBasis2 basis_second_order(Irrep in, Irrep out) {
  KernelBasis2 b;
  b.in = in;
  b.out = out;
  const auto candidates = enumerate_products(in, out);
  // Keep each candidate only if it increases the Gram rank of the kept set.
  std::vector<std::vector<double>> kept_samples;
  for (const auto& e : candidates) {
    auto s = sample_element2(e, 8);
    kept_samples.push_back(std::move(s));
    if (gram_rank(kept_samples) < static_cast<int>(kept_samples.size())) {
      kept_samples.pop_back();
      continue;
    }
    b.elems.push_back(e);
  }
  return b;
}

int basis2_gram_rank(const KernelBasis2& basis) {
  std::vector<std::vector<double>> rows;
  for (const auto& e : basis.elems) rows.push_back(sample_element2(e, 8));
  return gram_rank(rows);
}

namespace {

// In/out representation matrices of a gauge rotation t.
void rep_matrix(Irrep r, double t, double out[4], int& dim) {
  if (r == Irrep::Scalar) {
    out[0] = 1.0;
    dim = 1;
    return;
  }
  const Mat2 m = Mat2::rotation(t);
  out[0] = m.m[0][0]; out[1] = m.m[0][1];
  out[2] = m.m[1][0]; out[3] = m.m[1][1];
  dim = 2;
}

// C = A(ra x ca) * B(ca x cb), row-major flat buffers.
void matmul(const double* A, int ra, int ca, const double* B, int cb, double* C) {
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < cb; ++j) {
      double s = 0.0;
      for (int k = 0; k < ca; ++k) s += A[i * ca + k] * B[k * cb + j];
      C[i * cb + j] = s;
    }
}

double residual_kind(FactorKind k, double t, double theta) {
  const FactorTraits tr = factor_traits(k);
  const int din = irrep_dim(tr.in), dout = irrep_dim(tr.out);
  double lhs[4] = {}, kv[4] = {};
  factor_eval(k, tr.center ? 0.0 : theta - t, lhs);
  factor_eval(k, tr.center ? 0.0 : theta, kv);
  double rin[4], rout[4];
  int d;
  rep_matrix(tr.in, t, rin, d);
  rep_matrix(tr.out, -t, rout, d);
  double tmp[4], rhs[4];
  matmul(rout, dout, dout, kv, din, tmp);
  matmul(tmp, dout, din, rin, din, rhs);
  double r = 0.0;
  for (int i = 0; i < dout * din; ++i) r = std::max(r, std::abs(lhs[i] - rhs[i]));
  return r;
}

}  // namespace

double verify_steerability(const KernelBasis1& basis, int samples, std::uint64_t seed) {
  if (samples < 1) throw ContractViolation("verify_steerability: samples >= 1 required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double t = ang(rng), theta = ang(rng);
    for (FactorKind k : basis.kinds) worst = std::max(worst, residual_kind(k, t, theta));
  }
  return worst;
}

double verify_steerability(const KernelBasis2& basis, int samples, std::uint64_t seed) {
  if (samples < 1) throw ContractViolation("verify_steerability: samples >= 1 required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const int din = irrep_dim(basis.in);
  const int dpair = din * din;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double t = ang(rng), th1 = ang(rng), th2 = ang(rng);
    for (const auto& e : basis.elems) {
      const FactorTraits ta = factor_traits(e.a), tb = factor_traits(e.b);
      const int rows = irrep_dim(ta.out) * irrep_dim(tb.out);
      double a0[4] = {}, b0[4] = {}, a1[4] = {}, b1[4] = {};
      factor_eval(e.a, ta.center ? 0.0 : th1 - t, a0);
      factor_eval(e.b, tb.center ? 0.0 : th2 - t, b0);
      factor_eval(e.a, ta.center ? 0.0 : th1, a1);
      factor_eval(e.b, tb.center ? 0.0 : th2, b1);

      // K(t1, t2) = kron(A(t1), B(t2)), flattened row-major.
      double lhs[8], kv[8];
      const int ca = irrep_dim(ta.in), cb = irrep_dim(tb.in);
      const int ra = irrep_dim(ta.out), rb = irrep_dim(tb.out);
      for (int ia = 0; ia < ra; ++ia)
        for (int ib = 0; ib < rb; ++ib)
          for (int ja = 0; ja < ca; ++ja)
            for (int jb = 0; jb < cb; ++jb) {
              const int row = ia * rb + ib, col = ja * cb + jb;
              lhs[row * (ca * cb) + col] = a0[ia * ca + ja] * b0[ib * cb + jb];
              kv[row * (ca * cb) + col] = a1[ia * ca + ja] * b1[ib * cb + jb];
            }

      // rho_pair(t) = rho_in(t) (x) rho_in(t) on the pair slot.
      double rin[4];
      int d;
      rep_matrix(basis.in, t, rin, d);
      double rpair[16];
      for (int i = 0; i < din; ++i)
        for (int j = 0; j < din; ++j)
          for (int u = 0; u < din; ++u)
            for (int v = 0; v < din; ++v)
              rpair[(i * din + u) * dpair + (j * din + v)] = rin[i * din + j] * rin[u * din + v];

      double rout[4];
      rep_matrix(basis.out, -t, rout, d);
      double tmp[8], rhs[8];
      matmul(rout, rows, rows, kv, dpair, tmp);
      matmul(tmp, rows, dpair, rpair, dpair, rhs);
      for (int i = 0; i < rows * dpair; ++i)
        worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
    }
  }
  return worst;
}

double steerability_residual1(Irrep in, Irrep out, void (*eval)(double, double[4]),
                              int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  const int din = irrep_dim(in), dout = irrep_dim(out);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double t = ang(rng), theta = ang(rng);
    double lhs[4] = {}, kv[4] = {};
    eval(theta - t, lhs);
    eval(theta, kv);
    double rin[4], rout[4];
    int d;
    rep_matrix(in, t, rin, d);
    rep_matrix(out, -t, rout, d);
    double tmp[4], rhs[4];
    matmul(rout, dout, dout, kv, din, tmp);
    matmul(tmp, dout, din, rin, din, rhs);
    for (int i = 0; i < dout * din; ++i) worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
  }
  return worst;
}

LayerBasis make_layer_basis(FeatureType out, FeatureType in, bool second_order) {
  LayerBasis basis;
  basis.out = out;
  basis.in = in;
  for (int so = 0; so < out.slots(); ++so) {
    for (int si = 0; si < in.slots(); ++si) {
      const KernelBasis1 b1 = basis_first_order(in.slot_irrep(si), out.slot_irrep(so));
      for (FactorKind k : b1.kinds) basis.first.push_back({so, si, k});
    }
  }
  if (!second_order) return basis;
  for (int so = 0; so < out.slots(); ++so) {
    for (int s1 = 0; s1 < in.slots(); ++s1) {
      for (int s2 = 0; s2 < in.slots(); ++s2) {
        // Same-frequency pairs only: scalar*scalar and vector(x)vector.
        if (in.slot_irrep(s1) != in.slot_irrep(s2)) continue;
        const KernelBasis2 b2 = basis_second_order(in.slot_irrep(s1), out.slot_irrep(so));
        for (const auto& e : b2.elems) basis.second.push_back({so, s1, s2, e.a, e.b});
      }
    }
  }
  return basis;
}

}  // namespace gev
