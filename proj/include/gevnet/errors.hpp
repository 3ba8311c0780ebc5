#pragma once

#include <stdexcept>
#include <string>

namespace gev {

// Resource guard tripped: grid level too deep, quadrature too coarse, etc.
struct BoundedResourceError : std::runtime_error {
  explicit BoundedResourceError(const std::string& what) : std::runtime_error(what) {}
};

// A precondition on the math was violated (non-tangent vector, bad rotation...).
struct ContractViolation : std::invalid_argument {
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Antipodal log map and friends.
struct SingularGeometryError : std::domain_error {
  explicit SingularGeometryError(const std::string& what) : std::domain_error(what) {}
};

// Feature type / shape mismatches between layers, fields and stencils.
struct TypeError : std::invalid_argument {
  explicit TypeError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed input files (IDX, cache containers, checkpoints).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gev
