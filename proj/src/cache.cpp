#include "gevnet/cache.hpp"

#include <cmath>
#include <cstring>

#include "gevnet/container.hpp"
#include "gevnet/errors.hpp"

namespace gev {

namespace {

void check_grid_invariants(const IcosphereGrid& grid) {
  if (grid.vertices.size() != icosphere_vertex_count(grid.level))
    throw FormatError("geometry cache: vertex count does not match level");
  int valence5 = 0;
  for (std::size_t v = 0; v < grid.vertices.size(); ++v) {
    if (std::abs(norm(grid.vertices[v]) - 1.0) > 1e-12)
      throw FormatError("geometry cache: non-unit vertex");
    const GaugeFrame& g = grid.gauge_frames[v];
    const Vec3& p = grid.vertices[v];
    if (std::abs(dot(g.e1, p)) > 1e-10 || std::abs(dot(g.e2, p)) > 1e-10 ||
        std::abs(norm(g.e1) - 1.0) > 1e-10 || std::abs(norm(g.e2) - 1.0) > 1e-10 ||
        std::abs(dot(g.e1, g.e2)) > 1e-10 || dot(cross(g.e1, g.e2), p) <= 0.0)
      throw FormatError("geometry cache: invalid gauge frame");
    const int val = static_cast<int>(grid.adjacency[v].size());
    if (val == 5)
      ++valence5;
    else if (val != 6)
      throw FormatError("geometry cache: vertex valence not in {5, 6}");
  }
  if (valence5 != 12) throw FormatError("geometry cache: expected exactly 12 valence-5 vertices");
}

}  // namespace

void save_geometry_cache(const std::string& path, const IcosphereGrid& grid,
                         const GeometryStencil& geom, const ConvStencil* baked) {
  ContainerWriter w(path);
  w.add_u32("GEOMHDR", {static_cast<std::uint32_t>(grid.level),
                        static_cast<std::uint32_t>(grid.num_vertices()),
                        static_cast<std::uint32_t>(grid.faces.size())});
  w.add_f64("RINGRAD", {grid.ring_radius});

  std::vector<double> verts, frames;
  for (const Vec3& v : grid.vertices) {
    verts.insert(verts.end(), {v.x, v.y, v.z});
  }
  for (const GaugeFrame& g : grid.gauge_frames)
    frames.insert(frames.end(), {g.e1.x, g.e1.y, g.e1.z, g.e2.x, g.e2.y, g.e2.z});
  w.add_f64("VERTICES", verts);
  w.add_f64("FRAMES", frames);

  std::vector<std::int32_t> adj_off{0}, adj_dat, face_dat;
  for (const auto& nbrs : grid.adjacency) {
    for (int q : nbrs) adj_dat.push_back(q);
    adj_off.push_back(static_cast<std::int32_t>(adj_dat.size()));
  }
  for (const auto& f : grid.faces) face_dat.insert(face_dat.end(), {f[0], f[1], f[2]});
  w.add_i32("ADJOFF", adj_off);
  w.add_i32("ADJDAT", adj_dat);
  w.add_i32("FACES", face_dat);

  // Stencil geometry: per vertex, the self entry then the ring, flattened as
  // (neighbor, log_x, log_y, transport) with the neighbor id carried in a
  // parallel i32 array.
  std::vector<std::int32_t> st_nbr;
  std::vector<double> st_dat;
  for (const auto& row : geom.entries)
    for (const StencilEntry& e : row) {
      st_nbr.push_back(e.neighbor);
      st_dat.insert(st_dat.end(), {e.log_coords.x, e.log_coords.y, e.transport});
    }
  w.add_i32("STENNBR", st_nbr);
  w.add_f64("LOGCOORD", st_dat);

  if (baked) {
    w.add_u32("BAKEHDR", {static_cast<std::uint32_t>(baked->quadrature),
                          static_cast<std::uint32_t>(kNumFactorKinds)});
    std::vector<double> fac;
    for (const auto& row : baked->factors)
      for (const FactorMatrices& fm : row)
        for (int k = 0; k < kNumFactorKinds; ++k)
          fac.insert(fac.end(), fm.k[k], fm.k[k] + 4);
    w.add_f64("BAKEFAC", fac);
  }
  w.finish();
}

GeometryCache load_geometry_cache(const std::string& path) {
  ContainerReader r(path);
  const auto hdr = r.get_u32("GEOMHDR");
  if (hdr.size() != 3) throw FormatError("geometry cache: bad header");
  GeometryCache out;
  IcosphereGrid& grid = out.grid;
  grid.level = static_cast<int>(hdr[0]);
  const std::size_t nv = hdr[1], nf = hdr[2];

  const auto verts = r.get_f64("VERTICES");
  const auto frames = r.get_f64("FRAMES");
  if (verts.size() != nv * 3 || frames.size() != nv * 6)
    throw FormatError("geometry cache: vertex/frame payload mismatch");
  grid.vertices.resize(nv);
  grid.gauge_frames.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    grid.vertices[i] = {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]};
    grid.gauge_frames[i].e1 = {frames[6 * i], frames[6 * i + 1], frames[6 * i + 2]};
    grid.gauge_frames[i].e2 = {frames[6 * i + 3], frames[6 * i + 4], frames[6 * i + 5]};
  }
  grid.ring_radius = r.get_f64("RINGRAD").at(0);

  const auto adj_off = r.get_i32("ADJOFF");
  const auto adj_dat = r.get_i32("ADJDAT");
  if (adj_off.size() != nv + 1) throw FormatError("geometry cache: adjacency offsets mismatch");
  grid.adjacency.resize(nv);
  for (std::size_t i = 0; i < nv; ++i)
    grid.adjacency[i].assign(adj_dat.begin() + adj_off[i], adj_dat.begin() + adj_off[i + 1]);

  const auto face_dat = r.get_i32("FACES");
  if (face_dat.size() != nf * 3) throw FormatError("geometry cache: face payload mismatch");
  grid.faces.resize(nf);
  grid.vertex_faces.assign(nv, {});
  for (std::size_t i = 0; i < nf; ++i) {
    grid.faces[i] = {face_dat[3 * i], face_dat[3 * i + 1], face_dat[3 * i + 2]};
    for (int k = 0; k < 3; ++k) grid.vertex_faces[grid.faces[i][k]].push_back(static_cast<int>(i));
  }

  check_grid_invariants(grid);

  const auto st_nbr = r.get_i32("STENNBR");
  const auto st_dat = r.get_f64("LOGCOORD");
  if (st_dat.size() != st_nbr.size() * 3) throw FormatError("geometry cache: stencil mismatch");
  out.geom.level = grid.level;
  out.geom.ring_radius = grid.ring_radius;
  out.geom.entries.resize(nv);
  std::size_t cur = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    const std::size_t n = grid.adjacency[v].size() + 1;
    for (std::size_t j = 0; j < n; ++j, ++cur) {
      StencilEntry e;
      e.neighbor = st_nbr[cur];
      e.log_coords = {st_dat[3 * cur], st_dat[3 * cur + 1]};
      e.transport = st_dat[3 * cur + 2];
      out.geom.entries[v].push_back(e);
    }
  }
  if (cur != st_nbr.size()) throw FormatError("geometry cache: stencil entry count mismatch");
  out.geom.reverse_edges.resize(nv);
  for (std::size_t p = 0; p < nv; ++p)
    for (std::size_t j = 0; j < out.geom.entries[p].size(); ++j)
      out.geom.reverse_edges[out.geom.entries[p][j].neighbor].push_back(
          {static_cast<int>(p), static_cast<int>(j)});

  if (r.has("BAKEHDR")) {
    const auto bh = r.get_u32("BAKEHDR");
    if (bh.size() != 2 || bh[1] != kNumFactorKinds)
      throw FormatError("geometry cache: baked stencil kind-set mismatch");
    out.has_baked = true;
    out.baked.level = grid.level;
    out.baked.quadrature = static_cast<int>(bh[0]);
    const auto fac = r.get_f64("BAKEFAC");
    out.baked.neighbor.resize(nv);
    out.baked.factors.resize(nv);
    std::size_t k = 0;
    for (std::size_t v = 0; v < nv; ++v) {
      const std::size_t n = out.geom.entries[v].size();
      out.baked.neighbor[v].resize(n);
      out.baked.factors[v].resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        out.baked.neighbor[v][j] = out.geom.entries[v][j].neighbor;
        for (int kk = 0; kk < kNumFactorKinds; ++kk)
          for (int u = 0; u < 4; ++u) out.baked.factors[v][j].k[kk][u] = fac.at(k++);
      }
    }
    out.baked.reverse_edges = out.geom.reverse_edges;
  }
  return out;
}

void save_checkpoint(const std::string& path, const Network& net, int input_level, bool float32) {
  ContainerWriter w(path);
  w.add_text("ARCH", architecture_to_string(net.arch()));
  w.add_u32("CKPTHDR",
            {static_cast<std::uint32_t>(input_level), static_cast<std::uint32_t>(float32)});

  std::vector<std::uint8_t> blob;
  auto put_array = [&](const std::string& name, const std::vector<double>& v) {
    const std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
    const std::uint64_t n = v.size();
    const auto* pn = reinterpret_cast<const std::uint8_t*>(&nlen);
    blob.insert(blob.end(), pn, pn + 4);
    blob.insert(blob.end(), name.begin(), name.end());
    const auto* pc = reinterpret_cast<const std::uint8_t*>(&n);
    blob.insert(blob.end(), pc, pc + 8);
    if (float32) {
      for (double d : v) {
        const float f = static_cast<float>(d);
        const auto* pf = reinterpret_cast<const std::uint8_t*>(&f);
        blob.insert(blob.end(), pf, pf + 4);
      }
    } else {
      const auto* pd = reinterpret_cast<const std::uint8_t*>(v.data());
      blob.insert(blob.end(), pd, pd + 8 * v.size());
    }
  };

  const ParamStore& ps = net.params();
  for (std::size_t i = 0; i < ps.layers.size(); ++i) {
    const LayerParams& lp = ps.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    if (!lp.coef1.value.empty()) put_array(pre + "coef1", lp.coef1.value);
    if (!lp.coef2.value.empty()) put_array(pre + "coef2", lp.coef2.value);
    if (!lp.bias.value.empty()) put_array(pre + "bias", lp.bias.value);
    if (!lp.gamma.value.empty()) put_array(pre + "gamma", lp.gamma.value);
    if (!lp.beta.value.empty()) put_array(pre + "beta", lp.beta.value);
    if (!lp.running_mean.empty()) put_array(pre + "running_mean", lp.running_mean);
    if (!lp.running_var.empty()) put_array(pre + "running_var", lp.running_var);
    if (!lp.dense_w.value.empty()) put_array(pre + "dense_w", lp.dense_w.value);
    if (!lp.dense_b.value.empty()) put_array(pre + "dense_b", lp.dense_b.value);
  }
  w.add_bytes("ARRAYS", blob);
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  ContainerReader r(path);
  Checkpoint ck;
  ck.arch_descriptor = r.get_text("ARCH");
  const auto hdr = r.get_u32("CKPTHDR");
  if (hdr.size() != 2) throw FormatError("checkpoint: bad header");
  ck.input_level = static_cast<int>(hdr[0]);
  const bool float32 = hdr[1] != 0;

  const auto blob = r.get_bytes("ARRAYS");
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > blob.size()) throw FormatError("checkpoint: truncated array blob");
  };
  while (pos < blob.size()) {
    need(4);
    std::uint32_t nlen;
    std::memcpy(&nlen, blob.data() + pos, 4);
    pos += 4;
    need(nlen);
    std::string name(blob.begin() + pos, blob.begin() + pos + nlen);
    pos += nlen;
    need(8);
    std::uint64_t count;
    std::memcpy(&count, blob.data() + pos, 8);
    pos += 8;
    std::vector<double> vals(count);
    if (float32) {
      need(4 * count);
      for (std::uint64_t i = 0; i < count; ++i) {
        float f;
        std::memcpy(&f, blob.data() + pos + 4 * i, 4);
        vals[i] = f;
      }
      pos += 4 * count;
    } else {
      need(8 * count);
      std::memcpy(vals.data(), blob.data() + pos, 8 * count);
      pos += 8 * count;
    }
    ck.arrays.emplace_back(std::move(name), std::move(vals));
  }
  return ck;
}

void restore_params(Network& net, const Checkpoint& ckpt) {
  ParamStore& ps = net.params();
  auto find = [&](const std::string& name) -> const std::vector<double>* {
    for (const auto& [n, v] : ckpt.arrays)
      if (n == name) return &v;
    return nullptr;
  };
  for (std::size_t i = 0; i < ps.layers.size(); ++i) {
    LayerParams& lp = ps.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    auto restore = [&](const char* suffix, std::vector<double>& dst) {
      if (dst.empty()) return;
      const auto* src = find(pre + suffix);
      if (!src) throw ConfigError("checkpoint: missing array " + pre + suffix);
      if (src->size() != dst.size())
        throw ConfigError("checkpoint: shape mismatch for " + pre + suffix);
      dst = *src;
    };
    restore("coef1", lp.coef1.value);
    restore("coef2", lp.coef2.value);
    restore("bias", lp.bias.value);
    restore("gamma", lp.gamma.value);
    restore("beta", lp.beta.value);
    restore("running_mean", lp.running_mean);
    restore("running_var", lp.running_var);
    restore("dense_w", lp.dense_w.value);
    restore("dense_b", lp.dense_b.value);
  }
}

}  // namespace gev
