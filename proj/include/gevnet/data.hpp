#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gevnet/field.hpp"

// MNIST-style IDX ingestion, gnomonic projection onto icosphere grids,
// rotation augmentation and mixup.
namespace gev {

struct RawImages {
  int count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // row-major per image

  const std::uint8_t* image(int i) const {
    return pixels.data() + static_cast<std::size_t>(i) * rows * cols;
  }
};

struct RawLabels {
  int count = 0;
  std::vector<std::uint8_t> labels;
};

// Big-endian IDX readers/writers. Throw FormatError on bad magic numbers,
// truncated payloads, or a count mismatch between the two files.
RawImages load_idx_images(const std::string& path);
RawLabels load_idx_labels(const std::string& path);
void save_idx_images(const std::string& path, const RawImages& imgs);
void save_idx_labels(const std::string& path, const RawLabels& labels);

// Procedural 28x28 digit set rendered from a 5x7 glyph font with random
// affine jitter; a stand-in with the exact MNIST file interface for
// environments without the real corpus.
void synthesize_digits(int count, std::uint64_t seed, RawImages& images, RawLabels& labels);

// Gnomonic projection onto the tangent plane at the north pole covering a
// polar cap of angular radius pi/3. Pixels are scaled to [0,1]; vertices
// outside the cap read 0.
FeatureField project_to_sphere(const std::uint8_t* image, int rows, int cols,
                               const IcosphereGrid& grid);

struct SphericalDataset {
  int grid_level = 0;
  int num_classes = 10;
  bool rotated = false;
  bool mixed = false;
  std::vector<double> fields;  // [n][V], one rho0 channel
  std::vector<double> labels;  // [n][num_classes], soft labels summing to 1

  int count() const {
    return grid_level >= 0 && !labels.empty()
               ? static_cast<int>(labels.size()) / num_classes
               : 0;
  }
  int vertices() const { return static_cast<int>(icosphere_vertex_count(grid_level)); }
  FeatureField field(int i) const;
  int hard_label(int i) const;
};

SphericalDataset project_dataset(const RawImages& images, const RawLabels& labels,
                                 const IcosphereGrid& grid);

// Per-sample independent Haar-uniform rotations, resampled in place.
void random_rotation_augment(SphericalDataset& ds, const IcosphereGrid& grid,
                             std::uint64_t seed);

// x = l*x1 + (1-l)*x2, y likewise. Shapes must match.
void mixup_batch(const double* x1, const double* y1, const double* x2, const double* y2,
                 std::size_t nx, std::size_t ny, double lambda, double* x, double* y);

// Seeded stratified subset with (as close as possible to) equal class counts.
SphericalDataset stratified_subset(const SphericalDataset& ds, int size, std::uint64_t seed);

void save_dataset(const std::string& path, const SphericalDataset& ds);
SphericalDataset load_dataset(const std::string& path);

}  // namespace gev
