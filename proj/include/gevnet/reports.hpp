#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "gevnet/network.hpp"

// Verification suites behind the `verify`, `equivariance` and `gradcheck`
// CLI commands and the acceptance tests. Each returns a schema-versioned
// JSON report with a top-level "pass" flag.
namespace gev {

// Steerability residuals for every generated basis element (orders 1 and 2)
// over seeded random samples, the corrupted-kernel negative control, the
// planar Volterra reduction, and optimized-vs-naive oracle agreement.
// `inject_corruption` flips one basis profile to make the suite fail; it
// exists for testing the failure path.
nlohmann::json verify_report(int samples, std::uint64_t seed, bool inject_corruption = false);

// Gauge suite (single GEConv/GEVConv layers, rebuilt stencils, level 2),
// icosahedral suite (60 rotations through a 3-layer GEVNet, level 3) and the
// generic-rotation convergence study over levels 1..3.
nlohmann::json equivariance_report(int level, std::uint64_t seed);

// Central-difference checks for every layer kind plus cross entropy.
nlohmann::json gradcheck_suite(std::uint64_t seed);

}  // namespace gev
