#pragma once

#include <cstdint>
#include <vector>

#include "gevnet/geometry.hpp"

// SO(2)-steerable kernel bases of order 1 and 2 for features built from the
// trivial irrep rho_0 (scalars) and the standard irrep rho_1 (tangent
// vectors), and the baked per-vertex convolution stencils.
//
// Every second order basis element is a tensor product of two first order
// angular profiles, so a stencil only ever stores the evaluated first order
// factors; order-2 kernel matrices are exact Kronecker products of those.
namespace gev {

enum class Irrep : int { Scalar = 0, Vector = 1 };

inline int irrep_dim(Irrep r) { return r == Irrep::Scalar ? 1 : 2; }

// A per-channel feature type rho_0^{n0} + rho_1^{n1}. Slot layout: n0 scalar
// slots followed by n1 vector slots (2 components each).
struct FeatureType {
  int n0 = 0;
  int n1 = 0;

  int dim() const { return n0 + 2 * n1; }
  int slots() const { return n0 + n1; }
  Irrep slot_irrep(int s) const { return s < n0 ? Irrep::Scalar : Irrep::Vector; }
  int slot_offset(int s) const { return s < n0 ? s : n0 + 2 * (s - n0); }
  int slot_dim(int s) const { return irrep_dim(slot_irrep(s)); }
  bool operator==(const FeatureType& o) const { return n0 == o.n0 && n1 == o.n1; }

  static FeatureType scalar() { return {1, 0}; }
  static FeatureType scalar_vector() { return {1, 1}; }
};

// The closed-form angular profiles solving the first order steerability
// constraint for each irrep pair, one enum value per basis element.
// "Center" profiles are the frequency-0 solutions, the only ones admissible
// at v = 0 where the angle is undefined.
enum class FactorKind : int {
  ScalarRing = 0,   // (rho0 <- rho0): 1
  ScalarCenter,     // (rho0 <- rho0) at center: 1
  ProjCos,          // (rho0 <- rho1): [cos t, sin t]
  ProjSin,          // (rho0 <- rho1): [-sin t, cos t]
  GradCos,          // (rho1 <- rho0): [cos t, sin t]^T
  GradSin,          // (rho1 <- rho0): [-sin t, cos t]^T
  MatId,            // (rho1 <- rho1): I            (frequency 0)
  MatRot,           // (rho1 <- rho1): 90deg rotation (frequency 0)
  MatRef0,          // (rho1 <- rho1): reflection about angle t (frequency 2)
  MatRef1,          // (rho1 <- rho1): reflection about t + pi/4 (frequency 2)
  MatIdCenter,      // (rho1 <- rho1) at center: I
  MatRotCenter,     // (rho1 <- rho1) at center: 90deg rotation
};
constexpr int kNumFactorKinds = 12;

struct FactorTraits {
  Irrep in, out;
  bool center;
};
FactorTraits factor_traits(FactorKind k);

// Writes the (dim out x dim in) profile matrix at angle theta, row-major
// into out[4]. Unused entries are left untouched.
void factor_eval(FactorKind k, double theta, double out[4]);

struct KernelBasis1 {
  Irrep in = Irrep::Scalar, out = Irrep::Scalar;
  std::vector<FactorKind> kinds;
};

// Enumerated angular solutions of K(t^-1 v) = rho_out(t^-1) K(v) rho_in(t)
// for one single radial ring plus the center point.
KernelBasis1 basis_first_order(Irrep in, Irrep out);

struct Basis2Element {
  FactorKind a, b;  // kernel (t1, t2) -> kron(eval(a, t1), eval(b, t2))
};

struct KernelBasis2 {
  Irrep in = Irrep::Scalar;  // both pair slots; products never mix frequencies
  Irrep out = Irrep::Scalar;
  std::vector<Basis2Element> elems;
};

// All type-consistent tensor products of first order solutions mapping an
// (in, in) pair to out, numerically deduplicated by Gram-matrix rank.
KernelBasis2 basis_second_order(Irrep in, Irrep out);

// Max steerability residual over `samples` random gauge rotations and ring
// angles; 0 up to roundoff for every generated element.
double verify_steerability(const KernelBasis1& basis, int samples, std::uint64_t seed);
double verify_steerability(const KernelBasis2& basis, int samples, std::uint64_t seed);

// Same residual for a single explicit angular profile (used by the
// corrupted-kernel negative control).
double steerability_residual1(Irrep in, Irrep out, void (*eval)(double, double[4]),
                              int samples, std::uint64_t seed);

// Rank of the Gram matrix of sampled basis elements; equals the element
// count when the list is linearly independent.
int basis2_gram_rank(const KernelBasis2& basis);

// --- layer-level basis ------------------------------------------------------

// Basis elements of a (T_out <- T_in) kernel, enumerated per slot pair. The
// order here fixes the coefficient indexing of every layer and checkpoint.
struct LayerBasis {
  struct E1 {
    int out_slot, in_slot;
    FactorKind k;
  };
  struct E2 {
    int out_slot, in_slot1, in_slot2;
    FactorKind a, b;
  };
  FeatureType out, in;
  std::vector<E1> first;
  std::vector<E2> second;
};

LayerBasis make_layer_basis(FeatureType out, FeatureType in, bool second_order);

// --- baked stencil ----------------------------------------------------------

// Evaluated factor matrices for one stencil entry: Voronoi-cell averaged
// angular profile, scaled by cell fraction, right-composed with
// rho_in(t_{p<-q}). Ring kinds live on entries j >= 1, center kinds on the
// self entry j = 0; everything else is zero.
struct FactorMatrices {
  double k[kNumFactorKinds][4] = {};
};

struct ConvStencil {
  int level = 0;
  int quadrature = 0;
  std::vector<std::vector<int>> neighbor;              // [v][entry], entry 0 = v
  std::vector<std::vector<FactorMatrices>> factors;    // [v][entry]
  std::vector<std::vector<std::pair<int, int>>> reverse_edges;
};

// Bakes geometry and the angular bases into per-entry factor matrices with
// Q quadrature points around the ring, distributed over the angular Voronoi
// cells of the neighbors. Requires Q >= 4 * max valence.
ConvStencil homogenize_stencil(const GeometryStencil& geom, int Q);

// Materialized composed kernel matrices, used by oracles and invariants
// (the optimized path never forms these).
//
// First order: d_out x d_in matrix of element e at stencil entry (v, j).
std::vector<double> materialize_kernel1(const ConvStencil& st, const LayerBasis& basis,
                                        std::size_t elem, int v, int entry);
// Second order: d_out x pair_dim matrix of element e at entries (v, j1, j2),
// where pair_dim = 1 for a scalar pair slot and 4 for a vector pair slot.
std::vector<double> materialize_kernel2(const ConvStencil& st, const LayerBasis& basis,
                                        std::size_t elem, int v, int entry1, int entry2);

}  // namespace gev
