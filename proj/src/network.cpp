#include "gevnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gevnet/errors.hpp"

namespace gev {

LayerSpec geconv(int c_in, FeatureType in, int c_out, FeatureType out, bool bias) {
  LayerSpec s;
  s.kind = LayerSpec::Kind::Conv;
  s.c_in = c_in;
  s.c_out = c_out;
  s.in_type = in;
  s.out_type = out;
  s.second_order = false;
  s.bias = bias;
  return s;
}

LayerSpec gevconv(int c_in, FeatureType in, int c_out, FeatureType out, bool bias) {
  LayerSpec s = geconv(c_in, in, c_out, out, bias);
  s.second_order = true;
  return s;
}

LayerSpec nonlinearity(int n_samples, bool batchnorm, bool exact) {
  LayerSpec s;
  s.kind = LayerSpec::Kind::Nonlinearity;
  s.n_samples = n_samples;
  s.batchnorm = batchnorm;
  s.exact = exact;
  return s;
}

LayerSpec pool_layer() {
  LayerSpec s;
  s.kind = LayerSpec::Kind::Pool;
  return s;
}

LayerSpec global_pool_layer() {
  LayerSpec s;
  s.kind = LayerSpec::Kind::GlobalPool;
  return s;
}

LayerSpec dense_layer(int in, int out) {
  LayerSpec s;
  s.kind = LayerSpec::Kind::Dense;
  s.dense_in = in;
  s.dense_out = out;
  return s;
}

namespace {

struct FlowState {
  int level;
  int channels;
  FeatureType type;
  bool pooled = false;  // past GlobalPool
};

FlowState flow_through(const Architecture& arch, std::size_t upto,
                       std::vector<FlowState>* trace = nullptr) {
  FlowState st{arch.input_level, arch.input_channels, arch.input_type, false};
  if (trace) trace->push_back(st);
  for (std::size_t i = 0; i < std::min(upto, arch.layers.size()); ++i) {
    const LayerSpec& l = arch.layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::Conv:
        if (st.pooled) throw ConfigError("conv after global pooling");
        if (l.c_in != st.channels || !(l.in_type == st.type))
          throw TypeError("conv layer input does not match incoming field");
        st.channels = l.c_out;
        st.type = l.out_type;
        break;
      case LayerSpec::Kind::Nonlinearity:
        if (st.pooled) throw ConfigError("nonlinearity after global pooling");
        if (!l.exact && l.n_samples < 3)
          throw BoundedResourceError("regular nonlinearity needs N >= 3 samples");
        if (st.type.n0 > 1 || st.type.n1 > 1)
          throw TypeError("regular nonlinearity supports rho0^{<=1} + rho1^{<=1} channels");
        break;
      case LayerSpec::Kind::Pool:
        if (st.pooled || st.level < 1) throw ConfigError("cannot pool below level 0");
        st.level -= 1;
        break;
      case LayerSpec::Kind::GlobalPool:
        if (st.pooled) throw ConfigError("duplicate global pooling");
        if (st.type.n1 != 0 || st.type.n0 != 1)
          throw TypeError("global invariant pooling requires pure rho0 features");
        st.pooled = true;
        break;
      case LayerSpec::Kind::Dense:
        if (!st.pooled) throw ConfigError("dense head requires globally pooled features");
        if (l.dense_in != st.channels) throw TypeError("dense input width mismatch");
        st.channels = l.dense_out;
        break;
    }
    if (trace) trace->push_back(st);
  }
  return st;
}

}  // namespace

void validate(const Architecture& arch) { flow_through(arch, arch.layers.size()); }

std::size_t count_params(const Architecture& arch) {
  validate(arch);
  std::vector<FlowState> trace;
  flow_through(arch, arch.layers.size(), &trace);
  std::size_t total = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    if (l.kind == LayerSpec::Kind::Conv) {
      const LayerBasis basis = make_layer_basis(l.out_type, l.in_type, l.second_order);
      total += static_cast<std::size_t>(l.c_out) * l.c_in * basis.first.size();
      if (l.second_order)
        total += static_cast<std::size_t>(l.c_out) * l.c_in * l.c_in * basis.second.size();
      if (l.bias) total += static_cast<std::size_t>(l.c_out) * l.out_type.n0;
    } else if (l.kind == LayerSpec::Kind::Nonlinearity) {
      total += 2 * static_cast<std::size_t>(trace[i].channels);
    } else if (l.kind == LayerSpec::Kind::Dense) {
      total += static_cast<std::size_t>(l.dense_out) * (l.dense_in + 1);
    }
  }
  return total;
}

void ParamStore::zero_grad() {
  for (auto& lp : layers)
    for (Param* p : {&lp.coef1, &lp.coef2, &lp.bias, &lp.gamma, &lp.beta, &lp.dense_w, &lp.dense_b})
      std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  for (auto& lp : layers)
    for (Param* p : {&lp.coef1, &lp.coef2, &lp.bias, &lp.gamma, &lp.beta, &lp.dense_w, &lp.dense_b})
      if (!p->value.empty()) out.push_back(p);
  return out;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& lp : layers)
    for (const Param* p :
         {&lp.coef1, &lp.coef2, &lp.bias, &lp.gamma, &lp.beta, &lp.dense_w, &lp.dense_b})
      n += p->value.size();
  return n;
}

Resources build_resources(int max_level, int Q) {
  Resources res;
  res.quadrature = Q;
  res.hierarchy = build_hierarchy(std::max(1, max_level));
  for (int l = 0; l <= max_level; ++l) {
    res.geometry[l] = build_stencil(res.hierarchy.grids[l]);
    res.stencils[l] = homogenize_stencil(res.geometry[l], Q);
  }
  res.pool_reverse.resize(res.hierarchy.steps.size());
  for (std::size_t s = 0; s < res.hierarchy.steps.size(); ++s) {
    const auto& step = res.hierarchy.steps[s];
    auto& rev = res.pool_reverse[s];
    rev.resize(res.hierarchy.grids[step.coarse_level + 1].num_vertices());
    for (std::size_t cv = 0; cv < step.cells.size(); ++cv)
      for (std::size_t k = 0; k < step.cells[cv].size(); ++k)
        rev[step.cells[cv][k].fine].push_back({static_cast<int>(cv), static_cast<int>(k)});
  }
  return res;
}

// --- convolution ------------------------------------------------------------

namespace {

// Offsets of the per-vertex factor accumulators A[kind][channel][in_slot],
// laid out channel-major so the combine loops stream through one channel
// block at a time.
struct AccLayout {
  int base[kNumFactorKinds];
  int dim[kNumFactorKinds];
  int per_channel = 0;

  explicit AccLayout(FeatureType in) {
    for (int ki = 0; ki < kNumFactorKinds; ++ki) {
      const FactorTraits t = factor_traits(static_cast<FactorKind>(ki));
      const int slots = t.in == Irrep::Scalar ? in.n0 : in.n1;
      base[ki] = per_channel;
      dim[ki] = irrep_dim(t.out);
      per_channel += slots * dim[ki];
    }
  }
  int at(FactorKind k, int ci, int slot) const {
    const int ki = static_cast<int>(k);
    return ci * per_channel + base[ki] + slot * dim[ki];
  }
};

struct E1Plan {
  int kind, acc_rel, out_off, out_dim;
};
struct E2Plan {
  int a_rel, b_rel, a_dim, b_dim, out_off;
};

struct ConvPlan {
  AccLayout acc;
  std::vector<E1Plan> first;
  std::vector<E2Plan> second;

  ConvPlan(const LayerSpec& spec, const LayerBasis& basis) : acc(spec.in_type) {
    for (const auto& e : basis.first) {
      E1Plan p;
      p.kind = static_cast<int>(e.k);
      const FactorTraits t = factor_traits(e.k);
      const int slot_rel = e.in_slot - (t.in == Irrep::Scalar ? 0 : spec.in_type.n0);
      p.acc_rel = acc.base[p.kind] + slot_rel * acc.dim[p.kind];
      p.out_off = spec.out_type.slot_offset(e.out_slot);
      p.out_dim = spec.out_type.slot_dim(e.out_slot);
      first.push_back(p);
    }
    if (!spec.second_order) return;
    for (const auto& e : basis.second) {
      E2Plan p;
      const FactorTraits ta = factor_traits(e.a), tb = factor_traits(e.b);
      const int sa = e.in_slot1 - (ta.in == Irrep::Scalar ? 0 : spec.in_type.n0);
      const int sb = e.in_slot2 - (tb.in == Irrep::Scalar ? 0 : spec.in_type.n0);
      p.a_rel = acc.base[static_cast<int>(e.a)] + sa * acc.dim[static_cast<int>(e.a)];
      p.b_rel = acc.base[static_cast<int>(e.b)] + sb * acc.dim[static_cast<int>(e.b)];
      p.a_dim = acc.dim[static_cast<int>(e.a)];
      p.b_dim = acc.dim[static_cast<int>(e.b)];
      p.out_off = spec.out_type.slot_offset(e.out_slot);
      second.push_back(p);
    }
  }
};

// Gathers the transported-and-averaged factor responses around vertex v.
void gather_accumulators(const ConvStencil& st, const FeatureType& ty, int c_in,
                         const AccLayout& acc, const double* in, int v, double* A) {
  const int D = ty.dim();
  std::fill(A, A + static_cast<std::size_t>(acc.per_channel) * c_in, 0.0);
  const auto& nbrs = st.neighbor[v];
  for (std::size_t j = 0; j < nbrs.size(); ++j) {
    const FactorMatrices& F = st.factors[v][j];
    for (int ci = 0; ci < c_in; ++ci) {
      const double* g = in + (static_cast<std::size_t>(nbrs[j]) * c_in + ci) * D;
      if (j == 0) {
        for (int s = 0; s < ty.n0; ++s) {
          const double val = g[s];
          A[acc.at(FactorKind::ScalarCenter, ci, s)] +=
              F.k[static_cast<int>(FactorKind::ScalarCenter)][0] * val;
        }
        for (int k = 0; k < ty.n1; ++k) {
          const double x = g[ty.n0 + 2 * k], y = g[ty.n0 + 2 * k + 1];
          for (FactorKind kk : {FactorKind::MatIdCenter, FactorKind::MatRotCenter}) {
            const double* m = F.k[static_cast<int>(kk)];
            double* a = A + acc.at(kk, ci, k);
            a[0] += m[0] * x + m[1] * y;
            a[1] += m[2] * x + m[3] * y;
          }
        }
      } else {
        for (int s = 0; s < ty.n0; ++s) {
          const double val = g[s];
          A[acc.at(FactorKind::ScalarRing, ci, s)] +=
              F.k[static_cast<int>(FactorKind::ScalarRing)][0] * val;
          for (FactorKind kk : {FactorKind::GradCos, FactorKind::GradSin}) {
            const double* m = F.k[static_cast<int>(kk)];
            double* a = A + acc.at(kk, ci, s);
            a[0] += m[0] * val;
            a[1] += m[1] * val;
          }
        }
        for (int k = 0; k < ty.n1; ++k) {
          const double x = g[ty.n0 + 2 * k], y = g[ty.n0 + 2 * k + 1];
          for (FactorKind kk : {FactorKind::ProjCos, FactorKind::ProjSin}) {
            const double* m = F.k[static_cast<int>(kk)];
            A[acc.at(kk, ci, k)] += m[0] * x + m[1] * y;
          }
          for (FactorKind kk : {FactorKind::MatId, FactorKind::MatRot, FactorKind::MatRef0,
                                FactorKind::MatRef1}) {
            const double* m = F.k[static_cast<int>(kk)];
            double* a = A + acc.at(kk, ci, k);
            a[0] += m[0] * x + m[1] * y;
            a[1] += m[2] * x + m[3] * y;
          }
        }
      }
    }
  }
}

}  // namespace

void conv_forward(const LayerSpec& spec, const LayerBasis& basis, const ConvStencil& st,
                  const LayerParams& par, const double* in, int B, double* out) {
  const ConvPlan plan(spec, basis);
  const int V = static_cast<int>(st.neighbor.size());
  const int Din = spec.in_type.dim(), Dout = spec.out_type.dim();
  const int B1 = static_cast<int>(plan.first.size());
  const int B2 = static_cast<int>(plan.second.size());

  for (int b = 0; b < B; ++b) {
    const double* fin = in + static_cast<std::size_t>(b) * V * spec.c_in * Din;
    double* fout = out + static_cast<std::size_t>(b) * V * spec.c_out * Dout;
#pragma omp parallel for schedule(static)
    for (int v = 0; v < V; ++v) {
      std::vector<double> A(static_cast<std::size_t>(plan.acc.per_channel) * spec.c_in);
      gather_accumulators(st, spec.in_type, spec.c_in, plan.acc, fin, v, A.data());

      double* o = fout + static_cast<std::size_t>(v) * spec.c_out * Dout;
      std::fill(o, o + static_cast<std::size_t>(spec.c_out) * Dout, 0.0);
      for (int co = 0; co < spec.c_out; ++co) {
        double* oc = o + static_cast<std::size_t>(co) * Dout;
        if (spec.bias)
          for (int s = 0; s < spec.out_type.n0; ++s)
            oc[s] += par.bias.value[static_cast<std::size_t>(co) * spec.out_type.n0 + s];

        const double* c1 = par.coef1.value.data() + static_cast<std::size_t>(co) * spec.c_in * B1;
        for (int ci = 0; ci < spec.c_in; ++ci) {
          const double* Ac = A.data() + static_cast<std::size_t>(ci) * plan.acc.per_channel;
          for (int e = 0; e < B1; ++e) {
            const E1Plan& p = plan.first[e];
            const double c = c1[ci * B1 + e];
            oc[p.out_off] += c * Ac[p.acc_rel];
            if (p.out_dim == 2) oc[p.out_off + 1] += c * Ac[p.acc_rel + 1];
          }
        }
        if (B2 > 0) {
          for (int ci1 = 0; ci1 < spec.c_in; ++ci1) {
            const double* A1 = A.data() + static_cast<std::size_t>(ci1) * plan.acc.per_channel;
            for (int ci2 = 0; ci2 < spec.c_in; ++ci2) {
              const double* A2 = A.data() + static_cast<std::size_t>(ci2) * plan.acc.per_channel;
              const double* c2 = par.coef2.value.data() +
                                 ((static_cast<std::size_t>(co) * spec.c_in + ci1) * spec.c_in +
                                  ci2) * B2;
              for (int e = 0; e < B2; ++e) {
                const E2Plan& p = plan.second[e];
                const double c = c2[e];
                const double* a = A1 + p.a_rel;
                const double* bb = A2 + p.b_rel;
                if (p.a_dim == 1 && p.b_dim == 1) {
                  oc[p.out_off] += c * a[0] * bb[0];
                } else if (p.a_dim == 2) {
                  oc[p.out_off] += c * a[0] * bb[0];
                  oc[p.out_off + 1] += c * a[1] * bb[0];
                } else {
                  oc[p.out_off] += c * a[0] * bb[0];
                  oc[p.out_off + 1] += c * a[0] * bb[1];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const LayerSpec& spec, const LayerBasis& basis, const ConvStencil& st,
                   LayerParams& par, const double* in, const double* grad_out, int B,
                   double* grad_in) {
  const ConvPlan plan(spec, basis);
  const int V = static_cast<int>(st.neighbor.size());
  const int Din = spec.in_type.dim(), Dout = spec.out_type.dim();
  const int B1 = static_cast<int>(plan.first.size());
  const int B2 = static_cast<int>(plan.second.size());
  const std::size_t acc_total = static_cast<std::size_t>(plan.acc.per_channel) * spec.c_in;

  std::vector<double> dA(static_cast<std::size_t>(V) * acc_total);

  for (int b = 0; b < B; ++b) {
    const double* fin = in + static_cast<std::size_t>(b) * V * spec.c_in * Din;
    const double* gout = grad_out + static_cast<std::size_t>(b) * V * spec.c_out * Dout;
    double* gin = grad_in + static_cast<std::size_t>(b) * V * spec.c_in * Din;

#pragma omp parallel
    {
      std::vector<double> dc1(par.coef1.value.size(), 0.0);
      std::vector<double> dc2(par.coef2.value.size(), 0.0);
      std::vector<double> dbias(par.bias.value.size(), 0.0);
      std::vector<double> A(acc_total);

#pragma omp for schedule(static)
      for (int v = 0; v < V; ++v) {
        gather_accumulators(st, spec.in_type, spec.c_in, plan.acc, fin, v, A.data());
        double* dAv = dA.data() + static_cast<std::size_t>(v) * acc_total;
        std::fill(dAv, dAv + acc_total, 0.0);
        const double* G = gout + static_cast<std::size_t>(v) * spec.c_out * Dout;

        for (int co = 0; co < spec.c_out; ++co) {
          const double* Gc = G + static_cast<std::size_t>(co) * Dout;
          if (spec.bias)
            for (int s = 0; s < spec.out_type.n0; ++s)
              dbias[static_cast<std::size_t>(co) * spec.out_type.n0 + s] += Gc[s];

          const double* c1 =
              par.coef1.value.data() + static_cast<std::size_t>(co) * spec.c_in * B1;
          double* g1 = dc1.data() + static_cast<std::size_t>(co) * spec.c_in * B1;
          for (int ci = 0; ci < spec.c_in; ++ci) {
            const double* Ac = A.data() + static_cast<std::size_t>(ci) * plan.acc.per_channel;
            double* dAc = dAv + static_cast<std::size_t>(ci) * plan.acc.per_channel;
            for (int e = 0; e < B1; ++e) {
              const E1Plan& p = plan.first[e];
              const double c = c1[ci * B1 + e];
              double gdot = Gc[p.out_off] * Ac[p.acc_rel];
              dAc[p.acc_rel] += c * Gc[p.out_off];
              if (p.out_dim == 2) {
                gdot += Gc[p.out_off + 1] * Ac[p.acc_rel + 1];
                dAc[p.acc_rel + 1] += c * Gc[p.out_off + 1];
              }
              g1[ci * B1 + e] += gdot;
            }
          }
          if (B2 > 0) {
            for (int ci1 = 0; ci1 < spec.c_in; ++ci1) {
              const double* A1 = A.data() + static_cast<std::size_t>(ci1) * plan.acc.per_channel;
              double* dA1 = dAv + static_cast<std::size_t>(ci1) * plan.acc.per_channel;
              for (int ci2 = 0; ci2 < spec.c_in; ++ci2) {
                const double* A2 =
                    A.data() + static_cast<std::size_t>(ci2) * plan.acc.per_channel;
                double* dA2 = dAv + static_cast<std::size_t>(ci2) * plan.acc.per_channel;
                const std::size_t row =
                    ((static_cast<std::size_t>(co) * spec.c_in + ci1) * spec.c_in + ci2) * B2;
                const double* c2 = par.coef2.value.data() + row;
                double* g2 = dc2.data() + row;
                for (int e = 0; e < B2; ++e) {
                  const E2Plan& p = plan.second[e];
                  const double c = c2[e];
                  const double* a = A1 + p.a_rel;
                  const double* bb = A2 + p.b_rel;
                  double* da = dA1 + p.a_rel;
                  double* db = dA2 + p.b_rel;
                  if (p.a_dim == 1 && p.b_dim == 1) {
                    const double g = Gc[p.out_off];
                    g2[e] += g * a[0] * bb[0];
                    da[0] += c * g * bb[0];
                    db[0] += c * g * a[0];
                  } else if (p.a_dim == 2) {
                    const double g0 = Gc[p.out_off], g1v = Gc[p.out_off + 1];
                    g2[e] += (g0 * a[0] + g1v * a[1]) * bb[0];
                    da[0] += c * g0 * bb[0];
                    da[1] += c * g1v * bb[0];
                    db[0] += c * (g0 * a[0] + g1v * a[1]);
                  } else {
                    const double g0 = Gc[p.out_off], g1v = Gc[p.out_off + 1];
                    g2[e] += g0 * a[0] * bb[0] + g1v * a[0] * bb[1];
                    da[0] += c * (g0 * bb[0] + g1v * bb[1]);
                    db[0] += c * g0 * a[0];
                    db[1] += c * g1v * a[0];
                  }
                }
              }
            }
          }
        }
      }

#pragma omp critical
      {
        for (std::size_t i = 0; i < dc1.size(); ++i) par.coef1.grad[i] += dc1[i];
        for (std::size_t i = 0; i < dc2.size(); ++i) par.coef2.grad[i] += dc2[i];
        for (std::size_t i = 0; i < dbias.size(); ++i) par.bias.grad[i] += dbias[i];
      }
    }

    // Input gradient: gather the adjoint factor applications over reverse
    // edges, one thread per source vertex, no write races.
#pragma omp parallel for schedule(static)
    for (int q = 0; q < V; ++q) {
      double* g = gin + static_cast<std::size_t>(q) * spec.c_in * Din;
      for (const auto& [p, j] : st.reverse_edges[q]) {
        const FactorMatrices& F = st.factors[p][j];
        const double* dAp = dA.data() + static_cast<std::size_t>(p) * acc_total;
        for (int ci = 0; ci < spec.c_in; ++ci) {
          double* gc = g + static_cast<std::size_t>(ci) * Din;
          const double* dAc = dAp + static_cast<std::size_t>(ci) * plan.acc.per_channel;
          if (j == 0) {
            for (int s = 0; s < spec.in_type.n0; ++s)
              gc[s] += F.k[static_cast<int>(FactorKind::ScalarCenter)][0] *
                       dAc[plan.acc.at(FactorKind::ScalarCenter, 0, s)];
            for (int k = 0; k < spec.in_type.n1; ++k) {
              for (FactorKind kk : {FactorKind::MatIdCenter, FactorKind::MatRotCenter}) {
                const double* m = F.k[static_cast<int>(kk)];
                const double* d = dAc + plan.acc.at(kk, 0, k);
                gc[spec.in_type.n0 + 2 * k] += m[0] * d[0] + m[2] * d[1];
                gc[spec.in_type.n0 + 2 * k + 1] += m[1] * d[0] + m[3] * d[1];
              }
            }
          } else {
            for (int s = 0; s < spec.in_type.n0; ++s) {
              double acc = F.k[static_cast<int>(FactorKind::ScalarRing)][0] *
                           dAc[plan.acc.at(FactorKind::ScalarRing, 0, s)];
              for (FactorKind kk : {FactorKind::GradCos, FactorKind::GradSin}) {
                const double* m = F.k[static_cast<int>(kk)];
                const double* d = dAc + plan.acc.at(kk, 0, s);
                acc += m[0] * d[0] + m[1] * d[1];
              }
              gc[s] += acc;
            }
            for (int k = 0; k < spec.in_type.n1; ++k) {
              double gx = 0.0, gy = 0.0;
              for (FactorKind kk : {FactorKind::ProjCos, FactorKind::ProjSin}) {
                const double* m = F.k[static_cast<int>(kk)];
                const double d = dAc[plan.acc.at(kk, 0, k)];
                gx += m[0] * d;
                gy += m[1] * d;
              }
              for (FactorKind kk : {FactorKind::MatId, FactorKind::MatRot, FactorKind::MatRef0,
                                    FactorKind::MatRef1}) {
                const double* m = F.k[static_cast<int>(kk)];
                const double* d = dAc + plan.acc.at(kk, 0, k);
                gx += m[0] * d[0] + m[2] * d[1];
                gy += m[1] * d[0] + m[3] * d[1];
              }
              gc[spec.in_type.n0 + 2 * k] += gx;
              gc[spec.in_type.n0 + 2 * k + 1] += gy;
            }
          }
        }
      }
    }
  }
}

// --- pooling ----------------------------------------------------------------

void pool_forward(const HierarchyStep& step, int channels, FeatureType type, const double* in,
                  int B, int fine_vertices, double* out) {
  const int D = type.dim();
  const int CV = static_cast<int>(step.cells.size());
  for (int b = 0; b < B; ++b) {
    const double* fin = in + static_cast<std::size_t>(b) * fine_vertices * channels * D;
    double* fout = out + static_cast<std::size_t>(b) * CV * channels * D;
#pragma omp parallel for schedule(static)
    for (int v = 0; v < CV; ++v) {
      double* o = fout + static_cast<std::size_t>(v) * channels * D;
      std::fill(o, o + static_cast<std::size_t>(channels) * D, 0.0);
      for (const PoolCell& cell : step.cells[v]) {
        const double c = std::cos(cell.transport), s = std::sin(cell.transport);
        for (int ch = 0; ch < channels; ++ch) {
          const double* g = fin + (static_cast<std::size_t>(cell.fine) * channels + ch) * D;
          double* oc = o + static_cast<std::size_t>(ch) * D;
          for (int i = 0; i < type.n0; ++i) oc[i] += cell.weight * g[i];
          for (int k = 0; k < type.n1; ++k) {
            const int off = type.n0 + 2 * k;
            oc[off] += cell.weight * (c * g[off] - s * g[off + 1]);
            oc[off + 1] += cell.weight * (s * g[off] + c * g[off + 1]);
          }
        }
      }
    }
  }
}

void pool_backward(const HierarchyStep& step,
                   const std::vector<std::vector<std::pair<int, int>>>& reverse, int channels,
                   FeatureType type, const double* grad_out, int B, int fine_vertices,
                   double* grad_in) {
  const int D = type.dim();
  const int CV = static_cast<int>(step.cells.size());
  for (int b = 0; b < B; ++b) {
    const double* gout = grad_out + static_cast<std::size_t>(b) * CV * channels * D;
    double* gin = grad_in + static_cast<std::size_t>(b) * fine_vertices * channels * D;
#pragma omp parallel for schedule(static)
    for (int q = 0; q < fine_vertices; ++q) {
      double* g = gin + static_cast<std::size_t>(q) * channels * D;
      for (const auto& [cv, k] : reverse[q]) {
        const PoolCell& cell = step.cells[cv][k];
        const double c = std::cos(cell.transport), s = std::sin(cell.transport);
        for (int ch = 0; ch < channels; ++ch) {
          const double* go = gout + (static_cast<std::size_t>(cv) * channels + ch) * D;
          double* gc = g + static_cast<std::size_t>(ch) * D;
          for (int i = 0; i < type.n0; ++i) gc[i] += cell.weight * go[i];
          for (int kk = 0; kk < type.n1; ++kk) {
            const int off = type.n0 + 2 * kk;
            // transpose of the rotation
            gc[off] += cell.weight * (c * go[off] + s * go[off + 1]);
            gc[off + 1] += cell.weight * (-s * go[off] + c * go[off + 1]);
          }
        }
      }
    }
  }
}

// --- regular nonlinearity -----------------------------------------------------

namespace {

constexpr double kBnEps = 1e-5;

// Closed-form moments of h = relu(s + a cos(phi)): mean a0, first cosine
// coefficient c1 (so the projected vector is c1 * r_hat), and mean square q.
struct ReluMoments {
  double a0, c1, q;
  double da0_ds, da0_da, dc1_ds, dc1_da;  // dq/ds = 2 a0, dq/da = c1
};

ReluMoments relu_moments(double s, double a) {
  ReluMoments m{};
  if (a < 1e-300) {
    const bool pos = s > 0.0;
    m.a0 = pos ? s : 0.0;
    m.q = pos ? s * s : 0.0;
    m.da0_ds = pos ? 1.0 : 0.0;
    return m;
  }
  if (s >= a) {
    m.a0 = s;
    m.c1 = a;
    m.q = s * s + 0.5 * a * a;
    m.da0_ds = 1.0;
    m.dc1_da = 1.0;
    return m;
  }
  if (s <= -a) return m;
  const double delta = std::acos(-s / a);
  const double sd = std::sin(delta), cd = std::cos(delta);
  m.a0 = (s * delta + a * sd) / M_PI;
  m.c1 = (2.0 * s * sd + a * delta + a * sd * cd) / M_PI;
  m.q = (2.0 * delta * s * s + 4.0 * s * a * sd + a * a * (delta + sd * cd)) / (2.0 * M_PI);
  // Boundary terms vanish because h(+-delta) = 0.
  m.da0_ds = delta / M_PI;
  m.da0_da = sd / M_PI;
  m.dc1_ds = 2.0 * sd / M_PI;
  m.dc1_da = (delta + sd * cd) / M_PI;
  return m;
}

}  // namespace

namespace detail {

void nonlin_forward(const LayerSpec& spec, LayerParams& par, const Stage& in, Stage& out, int B,
                    bool train, std::vector<double>& mean_used, std::vector<double>& var_used) {
  const int V = in.vertices, C = in.channels, D = in.type.dim();
  const int n0 = in.type.n0, n1 = in.type.n1;
  const int N = spec.n_samples;
  const std::size_t count = static_cast<std::size_t>(B) * V;

  mean_used.assign(C, 0.0);
  var_used.assign(C, 1.0);

  if (spec.batchnorm && !train) {
    mean_used = par.running_mean;
    var_used = par.running_var;
  } else if (spec.batchnorm) {
    // Batch statistics over batch x vertices x samples.
    for (int c = 0; c < C; ++c) {
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const double* g = in.data.data() + (i * C + c) * D;
        const double s = n0 > 0 ? g[0] : 0.0;
        if (spec.exact) {
          const double a = n1 > 0 ? std::hypot(g[n0], g[n0 + 1]) : 0.0;
          const ReluMoments m = relu_moments(s, a);
          sum += m.a0;
          sum2 += m.q;
        } else {
          for (int k = 0; k < N; ++k) {
            const double th = 2.0 * M_PI * k / N;
            const double h = std::max(
                0.0, s + (n1 > 0 ? g[n0] * std::cos(th) + g[n0 + 1] * std::sin(th) : 0.0));
            sum += h;
            sum2 += h * h;
          }
        }
      }
      const double M = spec.exact ? static_cast<double>(count) : static_cast<double>(count) * N;
      mean_used[c] = sum / M;
      var_used[c] = std::max(0.0, sum2 / M - mean_used[c] * mean_used[c]);
      // Bias-corrected exponential average: the first batch replaces the
      // initialization outright, later batches blend with a ~10 batch window.
      const double m = 0.1;
      const double w = m / (1.0 - std::pow(1.0 - m, static_cast<double>(par.bn_batches + 1)));
      par.running_mean[c] += w * (mean_used[c] - par.running_mean[c]);
      par.running_var[c] += w * (var_used[c] - par.running_var[c]);
    }
    par.bn_batches += 1;
  }

#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    for (int c = 0; c < C; ++c) {
      const double* g = in.data.data() + (static_cast<std::size_t>(i) * C + c) * D;
      double* o = out.data.data() + (static_cast<std::size_t>(i) * C + c) * D;
      const double s = n0 > 0 ? g[0] : 0.0;
      const double gamma = spec.batchnorm ? par.gamma.value[c] : 1.0;
      const double beta = spec.batchnorm ? par.beta.value[c] : 0.0;
      const double mu = spec.batchnorm ? mean_used[c] : 0.0;
      const double inv_sigma = spec.batchnorm ? 1.0 / std::sqrt(var_used[c] + kBnEps) : 1.0;

      if (spec.exact) {
        const double rx = n1 > 0 ? g[n0] : 0.0, ry = n1 > 0 ? g[n0 + 1] : 0.0;
        const double a = std::hypot(rx, ry);
        const ReluMoments m = relu_moments(s, a);
        if (n0 > 0) o[0] = gamma * (m.a0 - mu) * inv_sigma + beta;
        if (n1 > 0) {
          const double scale = a > 1e-300 ? gamma * inv_sigma * m.c1 / a : 0.0;
          o[n0] = scale * rx;
          o[n0 + 1] = scale * ry;
        }
      } else {
        double s_out = 0.0, rx_out = 0.0, ry_out = 0.0;
        for (int k = 0; k < N; ++k) {
          const double th = 2.0 * M_PI * k / N;
          const double ck = std::cos(th), sk = std::sin(th);
          const double h =
              std::max(0.0, s + (n1 > 0 ? g[n0] * ck + g[n0 + 1] * sk : 0.0));
          const double y = gamma * (h - mu) * inv_sigma + beta;
          s_out += y;
          rx_out += y * ck;
          ry_out += y * sk;
        }
        if (n0 > 0) o[0] = s_out / N;
        if (n1 > 0) {
          o[n0] = 2.0 * rx_out / N;
          o[n0 + 1] = 2.0 * ry_out / N;
        }
      }
    }
  }
}

void nonlin_backward(const LayerSpec& spec, LayerParams& par, const Stage& in,
                     const std::vector<double>& mean_used, const std::vector<double>& var_used,
                     const double* grad_out, int B, bool train, double* grad_in) {
  const int V = in.vertices, C = in.channels, D = in.type.dim();
  const int n0 = in.type.n0, n1 = in.type.n1;
  const int N = spec.n_samples;
  const std::size_t count = static_cast<std::size_t>(B) * V;
  const double Mred =
      spec.exact ? static_cast<double>(count) : static_cast<double>(count) * N;

  // Pass 1: the per-channel reductions that train-mode BN needs, plus the
  // affine gradients.
  //   discrete: red_a = sum(dy), red_b = sum(dy * xhat)
  //   exact:    red_a = sum(G_s), red_b = sum(G_s (a0 - mu) + (G_r . u) c1)
  std::vector<double> red_a(C, 0.0), red_b(C, 0.0);
  for (int c = 0; c < C; ++c) {
    const double mu = mean_used[c];
    const double inv_sigma = 1.0 / std::sqrt(var_used[c] + kBnEps);
    double ra = 0.0, rb = 0.0, dgamma = 0.0, dbeta = 0.0;
    if (spec.batchnorm) {
      for (std::size_t i = 0; i < count; ++i) {
        const double* g = in.data.data() + (i * C + c) * D;
        const double* go = grad_out + (i * C + c) * D;
        const double s = n0 > 0 ? g[0] : 0.0;
        const double ds_out = n0 > 0 ? go[0] : 0.0;
        if (spec.exact) {
          const double rx = n1 > 0 ? g[n0] : 0.0, ry = n1 > 0 ? g[n0 + 1] : 0.0;
          const double a = std::hypot(rx, ry);
          const ReluMoments m = relu_moments(s, a);
          ra += ds_out;
          double dt_term = ds_out * (m.a0 - mu);
          if (n1 > 0 && a > 1e-300)
            dt_term += (go[n0] * rx + go[n0 + 1] * ry) / a * m.c1;
          rb += dt_term;
          dbeta += ds_out;
          dgamma += dt_term * inv_sigma;
        } else {
          for (int k = 0; k < N; ++k) {
            const double th = 2.0 * M_PI * k / N;
            const double ck = std::cos(th), sk = std::sin(th);
            const double h =
                std::max(0.0, s + (n1 > 0 ? g[n0] * ck + g[n0 + 1] * sk : 0.0));
            const double xhat = (h - mu) * inv_sigma;
            double dy = ds_out / N;
            if (n1 > 0) dy += 2.0 * (go[n0] * ck + go[n0 + 1] * sk) / N;
            ra += dy;
            rb += dy * xhat;
            dbeta += dy;
            dgamma += dy * xhat;
          }
        }
      }
    }
    red_a[c] = ra;
    red_b[c] = rb;
    if (spec.batchnorm) {
      par.gamma.grad[c] += dgamma;
      par.beta.grad[c] += dbeta;
    }
  }

  // Pass 2: per-element input gradients.
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    for (int c = 0; c < C; ++c) {
      const double* g = in.data.data() + (static_cast<std::size_t>(i) * C + c) * D;
      const double* go = grad_out + (static_cast<std::size_t>(i) * C + c) * D;
      double* gi = grad_in + (static_cast<std::size_t>(i) * C + c) * D;
      const double s = n0 > 0 ? g[0] : 0.0;
      const double gamma = spec.batchnorm ? par.gamma.value[c] : 1.0;
      const double mu = spec.batchnorm ? mean_used[c] : 0.0;
      const double inv_sigma = spec.batchnorm ? 1.0 / std::sqrt(var_used[c] + kBnEps) : 1.0;
      const bool bn_train = spec.batchnorm && train;

      if (spec.exact) {
        const double rx = n1 > 0 ? g[n0] : 0.0, ry = n1 > 0 ? g[n0 + 1] : 0.0;
        const double a = std::hypot(rx, ry);
        const ReluMoments m = relu_moments(s, a);
        const double ds_out = n0 > 0 ? go[0] : 0.0;

        double da0 = ds_out * gamma * inv_sigma;
        double dc1 = 0.0, dq = 0.0;
        if (n1 > 0 && a > 1e-300)
          dc1 = (go[n0] * rx + go[n0 + 1] * ry) / a * gamma * inv_sigma;
        if (bn_train) {
          const double dvar =
              -0.5 * gamma * inv_sigma * inv_sigma * inv_sigma * red_b[c];
          const double dmu = -gamma * inv_sigma * red_a[c] - 2.0 * mu * dvar;
          da0 += dmu / Mred;
          dq = dvar / Mred;
        }
        const double ds = da0 * m.da0_ds + dc1 * m.dc1_ds + dq * 2.0 * m.a0;
        const double da = da0 * m.da0_da + dc1 * m.dc1_da + dq * m.c1;
        if (n0 > 0) gi[0] = ds;
        if (n1 > 0) {
          if (a > 1e-300) {
            const double ux = rx / a, uy = ry / a;
            // r-output is w c1(s,a) u with u = r/a and w = gamma * inv_sigma:
            // radial part via da, tangential part scales grad by w c1 / a.
            const double w = gamma * inv_sigma;
            const double tang = w * m.c1 / a;
            const double gdotu = go[n0] * ux + go[n0 + 1] * uy;
            gi[n0] = da * ux + tang * (go[n0] - gdotu * ux);
            gi[n0 + 1] = da * uy + tang * (go[n0 + 1] - gdotu * uy);
          } else {
            gi[n0] = 0.0;
            gi[n0 + 1] = 0.0;
          }
        }
      } else {
        const double ds_out = n0 > 0 ? go[0] : 0.0;
        double ds = 0.0, drx = 0.0, dry = 0.0;
        for (int k = 0; k < N; ++k) {
          const double th = 2.0 * M_PI * k / N;
          const double ck = std::cos(th), sk = std::sin(th);
          const double pre = s + (n1 > 0 ? g[n0] * ck + g[n0 + 1] * sk : 0.0);
          const double h = std::max(0.0, pre);
          double dy = ds_out / N;
          if (n1 > 0) dy += 2.0 * (go[n0] * ck + go[n0 + 1] * sk) / N;
          double dh;
          if (bn_train) {
            const double xhat = (h - mu) * inv_sigma;
            dh = gamma * inv_sigma * (dy - red_a[c] / Mred - xhat * red_b[c] / Mred);
          } else {
            dh = gamma * inv_sigma * dy;
          }
          if (pre > 0.0) {
            ds += dh;
            drx += dh * ck;
            dry += dh * sk;
          }
        }
        if (n0 > 0) gi[0] = ds;
        if (n1 > 0) {
          gi[n0] = drx;
          gi[n0 + 1] = dry;
        }
      }
    }
  }
}

}  // namespace detail

// --- network orchestration ----------------------------------------------------

Network::Network(Architecture arch, const Resources* res) : arch_(std::move(arch)), res_(res) {
  validate(arch_);
  std::vector<FlowState> trace;
  flow_through(arch_, arch_.layers.size(), &trace);

  bases_.resize(arch_.layers.size());
  params_.layers.resize(arch_.layers.size());
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    LayerParams& lp = params_.layers[i];
    if (l.kind == LayerSpec::Kind::Conv) {
      if (trace[i].level > res_->hierarchy.grids.back().level)
        throw ConfigError("conv layer level exceeds built geometry");
      bases_[i] = make_layer_basis(l.out_type, l.in_type, l.second_order);
      lp.coef1.resize(static_cast<std::size_t>(l.c_out) * l.c_in * bases_[i].first.size());
      if (l.second_order)
        lp.coef2.resize(static_cast<std::size_t>(l.c_out) * l.c_in * l.c_in *
                        bases_[i].second.size());
      if (l.bias) lp.bias.resize(static_cast<std::size_t>(l.c_out) * l.out_type.n0);
    } else if (l.kind == LayerSpec::Kind::Nonlinearity) {
      const int C = trace[i].channels;
      lp.gamma.resize(C);
      lp.beta.resize(C);
      std::fill(lp.gamma.value.begin(), lp.gamma.value.end(), 1.0);
      lp.running_mean.assign(C, 0.0);
      lp.running_var.assign(C, 1.0);
    } else if (l.kind == LayerSpec::Kind::Dense) {
      lp.dense_w.resize(static_cast<std::size_t>(l.dense_out) * l.dense_in);
      lp.dense_b.resize(l.dense_out);
    }
  }
}

void Network::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    LayerParams& lp = params_.layers[i];
    if (l.kind == LayerSpec::Kind::Conv) {
      const double fan_in = static_cast<double>(l.c_in) * l.in_type.dim();
      const double std1 = std::sqrt(1.0 / (fan_in * std::max<std::size_t>(1, bases_[i].first.size())));
      for (double& w : lp.coef1.value) w = std1 * gauss(rng);
      if (l.second_order) {
        const double std2 =
            std::sqrt(1.0 / (fan_in * fan_in * std::max<std::size_t>(1, bases_[i].second.size())));
        for (double& w : lp.coef2.value) w = std2 * gauss(rng);
      }
      // Slightly positive scalar bias so no channel starts with its whole
      // ReLU band below zero (which would never recover a gradient).
      std::fill(lp.bias.value.begin(), lp.bias.value.end(), 0.05);
    } else if (l.kind == LayerSpec::Kind::Dense) {
      const double stdw = std::sqrt(1.0 / std::max(1, l.dense_in));
      for (double& w : lp.dense_w.value) w = stdw * gauss(rng);
      std::fill(lp.dense_b.value.begin(), lp.dense_b.value.end(), 0.0);
    }
  }
}

void Network::run_forward(const std::vector<double>& batch, int B, bool train, ForwardCache& cache,
                          const std::map<int, ConvStencil>* stencil_override) {
  std::vector<FlowState> trace;
  flow_through(arch_, arch_.layers.size(), &trace);

  cache.batch = B;
  cache.train = train;
  cache.acts.assign(arch_.layers.size() + 1, Stage{});
  cache.nl_mean.assign(arch_.layers.size(), {});
  cache.nl_var.assign(arch_.layers.size(), {});

  Stage& s0 = cache.acts[0];
  s0.level = arch_.input_level;
  s0.vertices = static_cast<int>(icosphere_vertex_count(arch_.input_level));
  s0.channels = arch_.input_channels;
  s0.type = arch_.input_type;
  if (batch.size() != static_cast<std::size_t>(B) * s0.vertices * s0.channels * s0.type.dim())
    throw TypeError("forward: batch buffer size mismatch");
  s0.data = batch;

  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const LayerSpec& l = arch_.layers[i];
    const Stage& in = cache.acts[i];
    Stage& out = cache.acts[i + 1];
    const FlowState& post = trace[i + 1];

    out.level = post.pooled ? -1 : post.level;
    out.vertices = post.pooled ? 1 : static_cast<int>(icosphere_vertex_count(post.level));
    out.channels = post.channels;
    out.type = post.pooled ? FeatureType::scalar() : post.type;
    out.data.assign(static_cast<std::size_t>(B) * out.vertices * out.channels * out.type.dim(),
                    0.0);

    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        const auto& stencils = stencil_override ? *stencil_override : res_->stencils;
        conv_forward(l, bases_[i], stencils.at(in.level), params_.layers[i], in.data.data(), B,
                     out.data.data());
        break;
      }
      case LayerSpec::Kind::Nonlinearity:
        detail::nonlin_forward(l, params_.layers[i], in, out, B, train, cache.nl_mean[i],
                               cache.nl_var[i]);
        break;
      case LayerSpec::Kind::Pool: {
        const HierarchyStep& step = res_->hierarchy.steps[in.level - 1];
        pool_forward(step, in.channels, in.type, in.data.data(), B, in.vertices,
                     out.data.data());
        break;
      }
      case LayerSpec::Kind::GlobalPool: {
        const double invV = 1.0 / in.vertices;
        for (int b = 0; b < B; ++b)
          for (int v = 0; v < in.vertices; ++v)
            for (int c = 0; c < in.channels; ++c)
              out.data[static_cast<std::size_t>(b) * in.channels + c] +=
                  invV * in.data[(static_cast<std::size_t>(b) * in.vertices + v) * in.channels + c];
        break;
      }
      case LayerSpec::Kind::Dense: {
        const LayerParams& lp = params_.layers[i];
        for (int b = 0; b < B; ++b) {
          const double* x = in.data.data() + static_cast<std::size_t>(b) * l.dense_in;
          double* y = out.data.data() + static_cast<std::size_t>(b) * l.dense_out;
          for (int o = 0; o < l.dense_out; ++o) {
            double acc = lp.dense_b.value[o];
            const double* w = lp.dense_w.value.data() + static_cast<std::size_t>(o) * l.dense_in;
            for (int k = 0; k < l.dense_in; ++k) acc += w[k] * x[k];
            y[o] = acc;
          }
        }
        break;
      }
    }
  }
}

void Network::forward(const std::vector<double>& batch, int B, bool train, ForwardCache& cache) {
  run_forward(batch, B, train, cache, nullptr);
}

void Network::forward_with_stencils(const std::vector<double>& batch, int B, ForwardCache& cache,
                                    const std::map<int, ConvStencil>& stencils) {
  run_forward(batch, B, /*train=*/false, cache, &stencils);
}

std::vector<double> Network::backward(const ForwardCache& cache,
                                      const std::vector<double>& grad_logits) {
  const int B = cache.batch;
  std::vector<double> grad = grad_logits;
  for (int i = static_cast<int>(arch_.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = arch_.layers[i];
    const Stage& in = cache.acts[i];
    std::vector<double> gin(in.data.size(), 0.0);
    LayerParams& lp = params_.layers[i];

    switch (l.kind) {
      case LayerSpec::Kind::Conv:
        conv_backward(l, bases_[i], res_->stencils.at(in.level), lp, in.data.data(), grad.data(),
                      B, gin.data());
        break;
      case LayerSpec::Kind::Nonlinearity:
        detail::nonlin_backward(l, lp, in, cache.nl_mean[i], cache.nl_var[i], grad.data(), B,
                                cache.train, gin.data());
        break;
      case LayerSpec::Kind::Pool: {
        const HierarchyStep& step = res_->hierarchy.steps[in.level - 1];
        pool_backward(step, res_->pool_reverse[in.level - 1], in.channels, in.type, grad.data(),
                      B, in.vertices, gin.data());
        break;
      }
      case LayerSpec::Kind::GlobalPool: {
        const double invV = 1.0 / in.vertices;
        for (int b = 0; b < B; ++b)
          for (int v = 0; v < in.vertices; ++v)
            for (int c = 0; c < in.channels; ++c)
              gin[(static_cast<std::size_t>(b) * in.vertices + v) * in.channels + c] =
                  invV * grad[static_cast<std::size_t>(b) * in.channels + c];
        break;
      }
      case LayerSpec::Kind::Dense: {
        for (int b = 0; b < B; ++b) {
          const double* x = in.data.data() + static_cast<std::size_t>(b) * l.dense_in;
          const double* gy = grad.data() + static_cast<std::size_t>(b) * l.dense_out;
          double* gx = gin.data() + static_cast<std::size_t>(b) * l.dense_in;
          for (int o = 0; o < l.dense_out; ++o) {
            lp.dense_b.grad[o] += gy[o];
            double* gw = lp.dense_w.grad.data() + static_cast<std::size_t>(o) * l.dense_in;
            for (int k = 0; k < l.dense_in; ++k) {
              gw[k] += gy[o] * x[k];
              gx[k] += lp.dense_w.value[o * l.dense_in + k] * gy[o];
            }
          }
        }
        break;
      }
    }
    grad = std::move(gin);
  }
  return grad;
}

std::vector<double> Network::logits(const FeatureField& sample) {
  ForwardCache cache;
  forward(sample.values, 1, /*train=*/false, cache);
  return cache.acts.back().data;
}

FeatureField Network::forward_fields(const FeatureField& sample) {
  ForwardCache cache;
  forward(sample.values, 1, /*train=*/false, cache);
  // Last field stage: the input of the GlobalPool layer.
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    if (arch_.layers[i].kind == LayerSpec::Kind::GlobalPool) {
      const Stage& st = cache.acts[i];
      FeatureField f = FeatureField::zeros(st.level, st.channels, st.type);
      f.values = st.data;
      return f;
    }
  }
  const Stage& st = cache.acts.back();
  FeatureField f = FeatureField::zeros(st.level, st.channels, st.type);
  f.values = st.data;
  return f;
}

}  // namespace gev
