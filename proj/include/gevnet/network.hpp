#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gevnet/field.hpp"

// Trainable layer stack: first order gauge equivariant convolutions (GEConv),
// second order Volterra convolutions (GEVConv), regular nonlinearity with
// ReLU/BatchNorm in the sample domain, transport-aware grid pooling, global
// invariant pooling and a dense head. Forward passes and hand-written
// adjoints; no autodiff framework.
namespace gev {

struct LayerSpec {
  enum class Kind { Conv, Nonlinearity, Pool, GlobalPool, Dense };
  Kind kind = Kind::Conv;

  // Conv
  int c_in = 0, c_out = 0;
  FeatureType in_type, out_type;
  bool second_order = false;  // GEVConv when true, GEConv otherwise
  bool bias = true;

  // Nonlinearity: N spatial samples, or closed-form integration when exact.
  int n_samples = 0;
  bool exact = false;
  bool batchnorm = true;

  // Dense
  int dense_in = 0, dense_out = 0;
};

LayerSpec geconv(int c_in, FeatureType in, int c_out, FeatureType out, bool bias = true);
LayerSpec gevconv(int c_in, FeatureType in, int c_out, FeatureType out, bool bias = true);
LayerSpec nonlinearity(int n_samples, bool batchnorm = true, bool exact = false);
LayerSpec pool_layer();
LayerSpec global_pool_layer();
LayerSpec dense_layer(int in, int out);

struct Architecture {
  int input_level = 0;
  int input_channels = 1;
  FeatureType input_type = FeatureType::scalar();
  std::vector<LayerSpec> layers;
};

// Throws TypeError / ConfigError if adjacent layers do not compose.
void validate(const Architecture& arch);

// Learnable parameter count: basis coefficients, biases, nonlinearity
// affines and dense weights.
std::size_t count_params(const Architecture& arch);

struct Param {
  std::vector<double> value, grad;
  void resize(std::size_t n) {
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
  }
};

struct LayerParams {
  Param coef1, coef2, bias;  // conv
  Param gamma, beta;         // nonlinearity affine
  Param dense_w, dense_b;
  // BN buffers, not learned. Running statistics are cumulative averages over
  // the training batches seen, so eval mode is usable from the first step.
  std::vector<double> running_mean, running_var;
  long long bn_batches = 0;
};

struct ParamStore {
  std::vector<LayerParams> layers;
  void zero_grad();
  std::vector<Param*> all();  // deterministic traversal order
  std::size_t count() const;
};

// Immutable geometry shared by every network at a given quadrature level.
struct Resources {
  int quadrature = 0;
  GridHierarchy hierarchy;
  std::map<int, GeometryStencil> geometry;  // by grid level
  std::map<int, ConvStencil> stencils;      // by grid level
  // Per hierarchy step, per fine vertex: (coarse vertex, cell index).
  std::vector<std::vector<std::vector<std::pair<int, int>>>> pool_reverse;
};

Resources build_resources(int max_level, int Q);

// Activation buffer: [B][V][channels][dim] for field stages, V = 1 after
// global pooling.
struct Stage {
  int level = -1;  // -1 once pooled to a plain vector
  int vertices = 1;
  int channels = 0;
  FeatureType type = FeatureType::scalar();
  std::vector<double> data;  // B * vertices * channels * type.dim()
};

struct ForwardCache {
  int batch = 0;
  bool train = false;
  std::vector<Stage> acts;  // acts[0] = input, acts[i+1] = output of layer i
  // Per nonlinearity layer: the channel statistics actually used.
  std::vector<std::vector<double>> nl_mean, nl_var;
};

class Network {
 public:
  Network(Architecture arch, const Resources* res);

  // Gaussian coefficients with variance 1/(fan_in * basis count), unit
  // affine, zero bias; deterministic in the seed.
  void init_params(std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const LayerBasis& basis(int layer) const { return bases_[layer]; }

  // batch: [B][V_in][C_in][D_in]. Returns logits [B][classes] in
  // cache.acts.back(). Train mode uses batch statistics in BatchNorm and
  // refreshes the running buffers.
  void forward(const std::vector<double>& batch, int B, bool train, ForwardCache& cache);

  // Accumulates parameter gradients (caller zeroes first) and returns the
  // gradient w.r.t. the input batch.
  std::vector<double> backward(const ForwardCache& cache, const std::vector<double>& grad_logits);

  // Convenience single-sample logits, eval mode.
  std::vector<double> logits(const FeatureField& sample);

  // Runs the field part of the stack (stops before GlobalPool), eval mode.
  FeatureField forward_fields(const FeatureField& sample);

  // Gauge-suite variant: conv layers read the given rebuilt stencils
  // (by level) instead of the shared ones.
  void forward_with_stencils(const std::vector<double>& batch, int B, ForwardCache& cache,
                             const std::map<int, ConvStencil>& stencils);

 private:
  Architecture arch_;
  const Resources* res_;
  std::vector<LayerBasis> bases_;  // per layer; empty for non-conv layers
  ParamStore params_;

  void run_forward(const std::vector<double>& batch, int B, bool train, ForwardCache& cache,
                   const std::map<int, ConvStencil>* stencil_override);
};

// --- single layer kernels (exposed for oracles, gradcheck and benchmarks) ---

// out must be sized B * V * c_out * out_type.dim(). Optimized path: factor
// accumulators, never materializes pair kernels; OpenMP over vertices.
void conv_forward(const LayerSpec& spec, const LayerBasis& basis, const ConvStencil& st,
                  const LayerParams& par, const double* in, int B, double* out);

// grad_in must be sized like `in`; parameter gradients accumulate into par.
void conv_backward(const LayerSpec& spec, const LayerBasis& basis, const ConvStencil& st,
                   LayerParams& par, const double* in, const double* grad_out, int B,
                   double* grad_in);

void pool_forward(const HierarchyStep& step, int channels, FeatureType type, const double* in,
                  int B, int fine_vertices, double* out);
void pool_backward(const HierarchyStep& step,
                   const std::vector<std::vector<std::pair<int, int>>>& reverse, int channels,
                   FeatureType type, const double* grad_out, int B, int fine_vertices,
                   double* grad_in);

}  // namespace gev
