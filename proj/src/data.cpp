#include "gevnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "gevnet/container.hpp"
#include "gevnet/errors.hpp"

namespace gev {

namespace {

std::uint32_t read_u32_be(std::istream& in) {
  std::uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("idx: truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8),
                             std::uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

RawImages load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open " + path);
  if (read_u32_be(in) != 0x00000803u) throw FormatError("idx: bad image magic in " + path);
  RawImages imgs;
  imgs.count = static_cast<int>(read_u32_be(in));
  imgs.rows = static_cast<int>(read_u32_be(in));
  imgs.cols = static_cast<int>(read_u32_be(in));
  imgs.pixels.resize(static_cast<std::size_t>(imgs.count) * imgs.rows * imgs.cols);
  in.read(reinterpret_cast<char*>(imgs.pixels.data()), imgs.pixels.size());
  if (!in) throw FormatError("idx: truncated image payload in " + path);
  return imgs;
}

RawLabels load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open " + path);
  if (read_u32_be(in) != 0x00000801u) throw FormatError("idx: bad label magic in " + path);
  RawLabels l;
  l.count = static_cast<int>(read_u32_be(in));
  l.labels.resize(l.count);
  in.read(reinterpret_cast<char*>(l.labels.data()), l.labels.size());
  if (!in) throw FormatError("idx: truncated label payload in " + path);
  return l;
}

void save_idx_images(const std::string& path, const RawImages& imgs) {
  std::ofstream out(path, std::ios::binary);
  write_u32_be(out, 0x00000803u);
  write_u32_be(out, imgs.count);
  write_u32_be(out, imgs.rows);
  write_u32_be(out, imgs.cols);
  out.write(reinterpret_cast<const char*>(imgs.pixels.data()), imgs.pixels.size());
  if (!out) throw FormatError("idx: write failed for " + path);
}

void save_idx_labels(const std::string& path, const RawLabels& labels) {
  std::ofstream out(path, std::ios::binary);
  write_u32_be(out, 0x00000801u);
  write_u32_be(out, labels.count);
  out.write(reinterpret_cast<const char*>(labels.labels.data()), labels.labels.size());
  if (!out) throw FormatError("idx: write failed for " + path);
}

namespace {

// 5x7 digit glyphs, one byte per row, low 5 bits used.
constexpr std::uint8_t kGlyphs[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}};

double glyph_sample(int digit, double gx, double gy) {
  // Bilinear over the 5x7 bitmap, zero outside.
  const int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy));
  const double fx = gx - x0, fy = gy - y0;
  auto bit = [&](int x, int y) -> double {
    if (x < 0 || x >= 5 || y < 0 || y >= 7) return 0.0;
    return (kGlyphs[digit][y] >> (4 - x)) & 1 ? 1.0 : 0.0;
  };
  return (1 - fx) * (1 - fy) * bit(x0, y0) + fx * (1 - fy) * bit(x0 + 1, y0) +
         (1 - fx) * fy * bit(x0, y0 + 1) + fx * fy * bit(x0 + 1, y0 + 1);
}

}  // namespace

void synthesize_digits(int count, std::uint64_t seed, RawImages& images, RawLabels& labels) {
  images.count = count;
  images.rows = 28;
  images.cols = 28;
  images.pixels.assign(static_cast<std::size_t>(count) * 28 * 28, 0);
  labels.count = count;
  labels.labels.resize(count);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> digit_dist(0, 9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < count; ++i) {
    const int digit = digit_dist(rng);
    labels.labels[i] = static_cast<std::uint8_t>(digit);
    const double angle = 0.22 * u(rng);
    const double scale = 3.2 * (1.0 + 0.12 * u(rng));  // glyph cell -> ~16x22 px
    const double shear = 0.15 * u(rng);
    const double dx = 14.0 + 2.5 * u(rng), dy = 14.0 + 2.5 * u(rng);
    const double intensity = 0.8 + 0.2 * u(rng);
    const double ca = std::cos(angle), sa = std::sin(angle);
    double raw[28 * 28];
    for (int py = 0; py < 28; ++py) {
      for (int px = 0; px < 28; ++px) {
        // Inverse affine from pixel to glyph coordinates (glyph center 2.5, 3.5).
        const double rx = px - dx, ry = py - dy;
        const double qx = (ca * rx + sa * ry) / scale;
        const double qy = (-sa * rx + ca * ry) / scale - shear * qx;
        raw[py * 28 + px] = std::clamp(glyph_sample(digit, qx + 2.0, qy + 3.0) * intensity, 0.0, 1.0);
      }
    }
    // Soft stroke edges like scanned digits: one separable binomial blur.
    std::uint8_t* img = images.pixels.data() + static_cast<std::size_t>(i) * 28 * 28;
    double tmp[28 * 28];
    auto at = [](const double* a, int x, int y) {
      return (x < 0 || x >= 28 || y < 0 || y >= 28) ? 0.0 : a[y * 28 + x];
    };
    for (int py = 0; py < 28; ++py)
      for (int px = 0; px < 28; ++px)
        tmp[py * 28 + px] =
            0.25 * at(raw, px - 1, py) + 0.5 * at(raw, px, py) + 0.25 * at(raw, px + 1, py);
    for (int py = 0; py < 28; ++py)
      for (int px = 0; px < 28; ++px) {
        const double v =
            0.25 * at(tmp, px, py - 1) + 0.5 * at(tmp, px, py) + 0.25 * at(tmp, px, py + 1);
        img[py * 28 + px] = static_cast<std::uint8_t>(v * 255.0);
      }
  }
}

FeatureField project_to_sphere(const std::uint8_t* image, int rows, int cols,
                               const IcosphereGrid& grid) {
  FeatureField f = FeatureField::zeros(grid.level, 1, FeatureType::scalar());
  const double cap_cos = 0.5;          // cos(pi/3)
  const double half = std::sqrt(3.0);  // tan(pi/3)
  const int n = grid.num_vertices();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < n; ++v) {
    const Vec3& p = grid.vertices[v];
    if (p.z < cap_cos) continue;
    const double X = p.x / p.z, Y = p.y / p.z;
    // Tangent-plane square [-half, half]^2 mapped onto the image; bilinear
    // with clamp-to-edge inside the square.
    const double ucol = (X + half) / (2.0 * half) * cols - 0.5;
    const double urow = (half - Y) / (2.0 * half) * rows - 0.5;
    auto pixel = [&](int r, int c) -> double {
      r = std::clamp(r, 0, rows - 1);
      c = std::clamp(c, 0, cols - 1);
      return image[r * cols + c] / 255.0;
    };
    const int c0 = static_cast<int>(std::floor(ucol)), r0 = static_cast<int>(std::floor(urow));
    const double fc = ucol - c0, fr = urow - r0;
    f.values[v] = (1 - fc) * (1 - fr) * pixel(r0, c0) + fc * (1 - fr) * pixel(r0, c0 + 1) +
                  (1 - fc) * fr * pixel(r0 + 1, c0) + fc * fr * pixel(r0 + 1, c0 + 1);
  }
  return f;
}

FeatureField SphericalDataset::field(int i) const {
  FeatureField f = FeatureField::zeros(grid_level, 1, FeatureType::scalar());
  std::copy_n(fields.begin() + static_cast<std::size_t>(i) * vertices(), vertices(),
              f.values.begin());
  return f;
}

int SphericalDataset::hard_label(int i) const {
  const double* row = labels.data() + static_cast<std::size_t>(i) * num_classes;
  return static_cast<int>(std::max_element(row, row + num_classes) - row);
}

SphericalDataset project_dataset(const RawImages& images, const RawLabels& labels,
                                 const IcosphereGrid& grid) {
  if (images.count != labels.count)
    throw FormatError("project_dataset: image/label count mismatch");
  SphericalDataset ds;
  ds.grid_level = grid.level;
  const int V = grid.num_vertices();
  ds.fields.assign(static_cast<std::size_t>(images.count) * V, 0.0);
  ds.labels.assign(static_cast<std::size_t>(images.count) * ds.num_classes, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < images.count; ++i) {
    const FeatureField f = project_to_sphere(images.image(i), images.rows, images.cols, grid);
    std::copy(f.values.begin(), f.values.end(),
              ds.fields.begin() + static_cast<std::size_t>(i) * V);
    ds.labels[static_cast<std::size_t>(i) * ds.num_classes + labels.labels[i]] = 1.0;
  }
  return ds;
}

void random_rotation_augment(SphericalDataset& ds, const IcosphereGrid& grid,
                             std::uint64_t seed) {
  if (grid.level != ds.grid_level)
    throw ContractViolation("random_rotation_augment: grid level mismatch");
  const int V = grid.num_vertices();
  std::mt19937_64 rng(seed);
  // Draw all rotations up front so the sequence is independent of scheduling.
  std::vector<Mat3> rots(ds.count());
  for (auto& R : rots) R = random_rotation(rng);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < ds.count(); ++i) {
    const RotationOp op = build_rotation_plan(rots[i], grid);
    FeatureField f = ds.field(i);
    f = rotate_field(op, f);
    std::copy(f.values.begin(), f.values.end(),
              ds.fields.begin() + static_cast<std::size_t>(i) * V);
  }
  ds.rotated = true;
}

void mixup_batch(const double* x1, const double* y1, const double* x2, const double* y2,
                 std::size_t nx, std::size_t ny, double lambda, double* x, double* y) {
  if (lambda < 0.0 || lambda > 1.0) throw ContractViolation("mixup: lambda must be in [0, 1]");
  for (std::size_t i = 0; i < nx; ++i) x[i] = lambda * x1[i] + (1.0 - lambda) * x2[i];
  for (std::size_t i = 0; i < ny; ++i) y[i] = lambda * y1[i] + (1.0 - lambda) * y2[i];
}

SphericalDataset stratified_subset(const SphericalDataset& ds, int size, std::uint64_t seed) {
  std::vector<std::vector<int>> by_class(ds.num_classes);
  for (int i = 0; i < ds.count(); ++i) by_class[ds.hard_label(i)].push_back(i);
  std::mt19937_64 rng(seed);
  for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);

  std::vector<int> picks;
  int c = 0;
  std::vector<std::size_t> cursor(ds.num_classes, 0);
  while (static_cast<int>(picks.size()) < size) {
    if (cursor[c] < by_class[c].size()) picks.push_back(by_class[c][cursor[c]++]);
    c = (c + 1) % ds.num_classes;
    bool any = false;
    for (int k = 0; k < ds.num_classes; ++k) any |= cursor[k] < by_class[k].size();
    if (!any) break;
  }
  std::sort(picks.begin(), picks.end());

  SphericalDataset out;
  out.grid_level = ds.grid_level;
  out.num_classes = ds.num_classes;
  out.rotated = ds.rotated;
  out.mixed = ds.mixed;
  const int V = ds.vertices();
  out.fields.reserve(picks.size() * V);
  out.labels.reserve(picks.size() * ds.num_classes);
  for (int i : picks) {
    out.fields.insert(out.fields.end(), ds.fields.begin() + static_cast<std::size_t>(i) * V,
                      ds.fields.begin() + static_cast<std::size_t>(i + 1) * V);
    out.labels.insert(out.labels.end(),
                      ds.labels.begin() + static_cast<std::size_t>(i) * ds.num_classes,
                      ds.labels.begin() + static_cast<std::size_t>(i + 1) * ds.num_classes);
  }
  return out;
}

void save_dataset(const std::string& path, const SphericalDataset& ds) {
  ContainerWriter w(path);
  w.add_u32("DSETHDR", {static_cast<std::uint32_t>(ds.grid_level),
                        static_cast<std::uint32_t>(ds.count()),
                        static_cast<std::uint32_t>(ds.num_classes),
                        static_cast<std::uint32_t>((ds.rotated ? 1 : 0) | (ds.mixed ? 2 : 0))});
  w.add_f64("FIELDS", ds.fields);
  w.add_f64("LABELS", ds.labels);
  w.finish();
}

SphericalDataset load_dataset(const std::string& path) {
  ContainerReader r(path);
  const auto hdr = r.get_u32("DSETHDR");
  if (hdr.size() != 4) throw FormatError("dataset: bad header");
  SphericalDataset ds;
  ds.grid_level = static_cast<int>(hdr[0]);
  ds.num_classes = static_cast<int>(hdr[2]);
  ds.rotated = hdr[3] & 1;
  ds.mixed = hdr[3] & 2;
  ds.fields = r.get_f64("FIELDS");
  ds.labels = r.get_f64("LABELS");
  if (ds.fields.size() != static_cast<std::size_t>(hdr[1]) * ds.vertices() ||
      ds.labels.size() != static_cast<std::size_t>(hdr[1]) * ds.num_classes)
    throw FormatError("dataset: payload size mismatch");
  return ds;
}

}  // namespace gev
