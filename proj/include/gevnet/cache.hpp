#pragma once

#include <string>

#include "gevnet/config.hpp"
#include "gevnet/network.hpp"

namespace gev {

// Geometry cache: grid, frames, stencil geometry, and optionally the baked
// factor stencil, in the shared container format. The loader revalidates the
// grid invariants (unit vertices, counts, frame orthonormality).
void save_geometry_cache(const std::string& path, const IcosphereGrid& grid,
                         const GeometryStencil& geom, const ConvStencil* baked = nullptr);

struct GeometryCache {
  IcosphereGrid grid;
  GeometryStencil geom;
  bool has_baked = false;
  ConvStencil baked;
};

GeometryCache load_geometry_cache(const std::string& path);

// Checkpoint: architecture descriptor plus named parameter arrays.
void save_checkpoint(const std::string& path, const Network& net, int input_level,
                     bool float32 = false);

struct Checkpoint {
  std::string arch_descriptor;
  int input_level = 0;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
};

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint arrays into the network; throws ConfigError on any
// name/shape mismatch with the architecture.
void restore_params(Network& net, const Checkpoint& ckpt);

}  // namespace gev
