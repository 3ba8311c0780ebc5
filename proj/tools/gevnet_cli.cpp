// Command line surface: geometry/stencil caching, data preparation,
// verification suites, training and evaluation.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "gevnet/cache.hpp"
#include "gevnet/config.hpp"
#include "gevnet/data.hpp"
#include "gevnet/errors.hpp"
#include "gevnet/reports.hpp"
#include "gevnet/train.hpp"

namespace {

std::string cache_dir() {
  const char* env = std::getenv("GEVNET_CACHE_DIR");
  return env ? env : ".";
}

gev::TrainConfig load_config(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!config_path.empty()) kv = gev::parse_config_file(config_path);
  gev::apply_overrides(kv, overrides);
  return gev::config_from_map(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gauge equivariant Volterra networks on the icosphere"};
  app.require_subcommand(1);

  // geometry --level L --out PATH [--quadrature Q]
  auto* geo = app.add_subcommand("geometry", "build and cache grid geometry");
  int geo_level = 3, geo_q = 1000;
  std::string geo_out;
  bool geo_bake = true;
  geo->add_option("--level", geo_level, "subdivision level (0..7)");
  geo->add_option("--out", geo_out, "output cache path (default $GEVNET_CACHE_DIR/geometry_L.gevc)");
  geo->add_option("--quadrature", geo_q, "ring quadrature points for the baked stencil");
  geo->add_flag("!--no-bake", geo_bake, "skip the baked factor stencil");

  // project-data --level L --regime {NR,R} --seed S [--images ... --labels ...]
  auto* proj = app.add_subcommand("project-data", "project digit images onto the sphere");
  int pd_level = 3, pd_count = 6000;
  std::uint64_t pd_seed = 7;
  std::string pd_regime = "NR", pd_images, pd_labels, pd_out = "dataset.gevc";
  proj->add_option("--level", pd_level, "grid level");
  proj->add_option("--regime", pd_regime, "NR (as projected) or R (randomly rotated)");
  proj->add_option("--seed", pd_seed, "rotation / synthesis seed");
  proj->add_option("--images", pd_images, "IDX image file (synthesized when omitted)");
  proj->add_option("--labels", pd_labels, "IDX label file");
  proj->add_option("--count", pd_count, "sample count when synthesizing");
  proj->add_option("--out", pd_out, "output dataset path");

  // verify --order {1,2} --samples N --seed S
  auto* ver = app.add_subcommand("verify", "steerability, oracle and reduction checks");
  int ver_samples = 1000, ver_order = 0;
  std::uint64_t ver_seed = 1;
  bool ver_corrupt = false;
  ver->add_option("--order", ver_order, "restrict to steerability of one order (1 or 2)")
      ->check(CLI::Range(0, 2));
  ver->add_option("--samples", ver_samples, "random samples per residual");
  ver->add_option("--seed", ver_seed, "rng seed");
  ver->add_flag("--inject-corruption", ver_corrupt,
                "testing hook: corrupt one basis profile so the suite fails");

  // equivariance --level L --seed S
  auto* eq = app.add_subcommand("equivariance", "gauge / isometry equivariance report");
  int eq_level = 3;
  std::uint64_t eq_seed = 1;
  eq->add_option("--level", eq_level, "grid level for the isometry suites");
  eq->add_option("--seed", eq_seed, "rng seed");

  // gradcheck --seed S
  auto* gc = app.add_subcommand("gradcheck", "finite difference gradient checks");
  std::uint64_t gc_seed = 1;
  gc->add_option("--seed", gc_seed, "rng seed");

  // train --config FILE [key=value ...]
  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string tr_config;
  std::vector<std::string> tr_overrides;
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("overrides", tr_overrides, "key=value overrides");

  // eval --checkpoint PATH --data PATH
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data;
  int ev_q = 1000, ev_n = 101;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--quadrature", ev_q);
  ev->add_option("--n-samples", ev_n);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*geo) {
      if (geo_out.empty())
        geo_out = cache_dir() + "/geometry_" + std::to_string(geo_level) + ".gevc";
      const gev::IcosphereGrid grid = gev::build_icosphere(geo_level);
      const gev::GeometryStencil geom = gev::build_stencil(grid);
      if (geo_bake) {
        const gev::ConvStencil baked = gev::homogenize_stencil(geom, geo_q);
        gev::save_geometry_cache(geo_out, grid, geom, &baked);
      } else {
        gev::save_geometry_cache(geo_out, grid, geom, nullptr);
      }
      std::cout << "wrote " << geo_out << " (level " << geo_level << ", "
                << grid.num_vertices() << " vertices)\n";
      return 0;
    }

    if (*proj) {
      gev::RawImages images;
      gev::RawLabels labels;
      if (!pd_images.empty() || !pd_labels.empty()) {
        images = gev::load_idx_images(pd_images);
        labels = gev::load_idx_labels(pd_labels);
        if (images.count != labels.count)
          throw gev::FormatError("image/label counts differ between the two files");
      } else {
        gev::synthesize_digits(pd_count, pd_seed, images, labels);
        std::cout << "synthesized " << pd_count << " digit images (no IDX inputs given)\n";
      }
      const gev::IcosphereGrid grid = gev::build_icosphere(pd_level);
      gev::SphericalDataset ds = gev::project_dataset(images, labels, grid);
      if (pd_regime == "R")
        gev::random_rotation_augment(ds, grid, pd_seed + 1);
      else if (pd_regime != "NR")
        throw gev::ConfigError("regime must be NR or R");
      gev::save_dataset(pd_out, ds);
      std::cout << "wrote " << pd_out << " (" << ds.count() << " samples, level " << pd_level
                << ", regime " << pd_regime << ")\n";
      return 0;
    }

    if (*ver) {
      auto rep = gev::verify_report(ver_samples, ver_seed, ver_corrupt);
      if (ver_order != 0) {
        // steerability-only view of the same report
        nlohmann::json sub;
        sub["schema_version"] = rep["schema_version"];
        sub["suite"] = "verify";
        sub["order"] = ver_order;
        sub["steerability"] = rep["steerability"];
        const char* key = ver_order == 1 ? "order1_max_residual" : "order2_max_residual";
        sub["max_residual"] = rep[key];
        sub["pass"] = rep[key].get<double>() <= 1e-12;
        std::cout << sub.dump(2) << "\n";
        return sub["pass"].get<bool>() ? 0 : 1;
      }
      std::cout << rep.dump(2) << "\n";
      return rep["pass"].get<bool>() ? 0 : 1;
    }
    if (*eq) {
      const auto rep = gev::equivariance_report(eq_level, eq_seed);
      std::cout << rep.dump(2) << "\n";
      return rep["pass"].get<bool>() ? 0 : 1;
    }
    if (*gc) {
      const auto rep = gev::gradcheck_suite(gc_seed);
      std::cout << rep.dump(2) << "\n";
      return rep["pass"].get<bool>() ? 0 : 1;
    }

    if (*tr) {
      const gev::TrainConfig cfg = load_config(tr_config, tr_overrides);
      if (cfg.train_data.empty() || cfg.test_data.empty())
        throw gev::ConfigError("train_data and test_data paths are required");
      const gev::SphericalDataset train_set = gev::load_dataset(cfg.train_data);
      const gev::SphericalDataset test_set = gev::load_dataset(cfg.test_data);
      if (train_set.grid_level != cfg.level)
        throw gev::ConfigError("dataset level does not match config level");
      gev::Resources res = gev::build_resources(cfg.level, cfg.quadrature);
      gev::Architecture arch = gev::parse_architecture(cfg.arch, cfg.level, cfg.n_samples);
      gev::Network net(arch, &res);
      net.init_params(cfg.seed);
      const gev::TrainResult result = gev::train(cfg, train_set, test_set, net);
      std::cout << "final test accuracy " << result.final_test_acc << "\n";
      std::cout << "metrics: " << cfg.metrics_csv << ", checkpoint: " << cfg.out_checkpoint
                << "\n";
      return 0;
    }

    if (*ev) {
      const gev::Checkpoint ck = gev::load_checkpoint(ev_ckpt);
      const gev::SphericalDataset ds = gev::load_dataset(ev_data);
      gev::Resources res = gev::build_resources(std::max(1, ck.input_level), ev_q);
      gev::Architecture arch =
          gev::parse_architecture(ck.arch_descriptor, ck.input_level, ev_n);
      gev::Network net(arch, &res);
      gev::restore_params(net, ck);
      const gev::EvalResult r = gev::evaluate(net, ds);
      std::cout << "accuracy " << r.accuracy << "\nconfusion:\n";
      const int K = ds.num_classes;
      for (int t = 0; t < K; ++t) {
        for (int p = 0; p < K; ++p) std::cout << r.confusion[t * K + p] << (p + 1 < K ? " " : "");
        std::cout << "\n";
      }
      return 0;
    }
  } catch (const gev::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
