// Acceptance suite: one test case per criterion, one PASS/FAIL line each.
// Criteria 7 and 8 print their measured numbers so deviations are visible in
// the ctest log, not just a boolean.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "doctest.h"

#include "gevnet/cache.hpp"
#include "gevnet/config.hpp"
#include "gevnet/data.hpp"
#include "gevnet/reports.hpp"
#include "gevnet/train.hpp"

using namespace gev;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void verdict(int criterion, bool pass, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
}

const FeatureType kSV = FeatureType::scalar_vector();
const FeatureType kS = FeatureType::scalar();

// Cached heavyweight reports shared by several criteria.
const nlohmann::json& verify_rep() {
  static const nlohmann::json rep = verify_report(1000, 2026);
  return rep;
}
const nlohmann::json& equiv_rep() {
  static const nlohmann::json rep = equivariance_report(3, 2026);
  return rep;
}

double verify_seconds = 0.0;

}  // namespace

TEST_CASE("criterion 1: steerability residuals") {
  const double t0 = now_s();
  const auto& rep = verify_rep();
  verify_seconds = now_s() - t0;
  const double r1 = rep["order1_max_residual"].get<double>();
  const double r2 = rep["order2_max_residual"].get<double>();
  const double neg = rep["negative_control_residual"].get<double>();
  const bool pass = r1 <= 1e-12 && r2 <= 1e-12 && neg > 0.1 && verify_seconds < 10.0;
  verdict(1, pass,
          "steerability order1 " + sci(r1) + ", order2 " + sci(r2) +
              ", negative control " + sci(neg) + ", " +
              std::to_string(verify_seconds) + " s");
  CHECK(r1 <= 1e-12);
  CHECK(r2 <= 1e-12);
  CHECK(neg > 0.1);
  CHECK(verify_seconds < 10.0);
}

TEST_CASE("criterion 2: gauge equivariance of conv layers") {
  const double t0 = now_s();
  const auto& rep = equiv_rep();
  const double secs = now_s() - t0;
  const double ge = rep["gauge"]["geconv"].get<double>();
  const double gev = rep["gauge"]["gevconv"].get<double>();
  const bool pass = ge <= 1e-10 && gev <= 1e-10 && secs < 60.0;
  verdict(2, pass,
          "gauge discrepancy geconv " + sci(ge) + ", gevconv " + sci(gev) +
              ", " + std::to_string(secs) + " s");
  CHECK(ge <= 1e-10);
  CHECK(gev <= 1e-10);
  CHECK(secs < 60.0);
}

TEST_CASE("criterion 3: isometry equivariance") {
  const auto& rep = equiv_rep();
  const double iso = rep["icosahedral"]["max_logit_discrepancy"].get<double>();
  const bool perms = rep["icosahedral"]["all_permutations"].get<bool>();
  const bool dec = rep["generic_rotation"]["strictly_decreasing"].get<bool>();
  std::string levels;
  for (const auto& l : rep["generic_rotation"]["levels"])
    levels += sci(l["logit_discrepancy"].get<double>()) + " ";
  const bool pass = perms && iso <= 1e-9 && dec;
  verdict(3, pass,
          "icosahedral logit discrepancy " + sci(iso) +
              " (60 exact permutations), generic-rotation discrepancy by level: " + levels +
              (dec ? "(strictly decreasing)" : "(NOT decreasing)"));
  CHECK(perms);
  CHECK(iso <= 1e-9);
  CHECK(dec);
}

TEST_CASE("criterion 4: planar Volterra reduction") {
  const double d = verify_rep()["planar_reduction_max_discrepancy"].get<double>();
  verdict(4, d <= 1e-12, "flat-grid machinery vs nested-loop oracle, max |diff| = " +
                             sci(d) + " over 20 instances");
  CHECK(d <= 1e-12);
}

TEST_CASE("criterion 5: optimized vs naive oracle") {
  const double d = verify_rep()["oracle_max_discrepancy"].get<double>();
  verdict(5, d <= 1e-12,
          "stencil path vs per-pair oracle, max |diff| = " + sci(d) +
              " over 20 instances");
  CHECK(d <= 1e-12);
}

TEST_CASE("criterion 6: gradient correctness") {
  const auto rep = gradcheck_suite(2026);
  double worst = 0.0;
  for (const auto& [name, err] : rep["layers"].items()) worst = std::max(worst, err.get<double>());
  verdict(6, rep["pass"].get<bool>(),
          "max relative central-difference error over all layer kinds = " + sci(worst));
  for (const auto& [name, err] : rep["layers"].items()) {
    INFO(name);
    CHECK(err.get<double>() <= 1e-4);
  }
}

TEST_CASE("criterion 7: desk-scale ablation") {
  const double t0 = now_s();
  const int level = 2;

  RawImages imgs, imgs_test;
  RawLabels labels, labels_test;
  synthesize_digits(6400, 1234, imgs, labels);
  synthesize_digits(1000, 777, imgs_test, labels_test);
  const IcosphereGrid grid = build_icosphere(level);
  const SphericalDataset train_set =
      stratified_subset(project_dataset(imgs, labels, grid), 5000, 1);
  const SphericalDataset test_set = project_dataset(imgs_test, labels_test, grid);
  std::printf("    data: synthetic IDX digits (no MNIST corpus in this environment), "
              "5000 train / 1000 test, NR/NR, level %d\n", level);

  Resources res = build_resources(level, 1000);
  const std::string arch_gev =
      "gevconv:1s:2sv,nonlin,pool,gevconv:2sv:14s,globalpool,dense:14:10";
  const std::string arch_ge =
      "geconv:1s:2sv,nonlin,pool,geconv:2sv:42s,globalpool,dense:42:10";
  const std::size_t p_gev = count_params(parse_architecture(arch_gev, level, 25));
  const std::size_t p_ge = count_params(parse_architecture(arch_ge, level, 25));
  std::printf("    2-layer GEVNet %zu params, 2-layer GENet %zu params (pairing rule: GENet >= GEVNet)\n",
              p_gev, p_ge);
  REQUIRE(p_ge >= p_gev);

  int mono = 0, transitions = 0;
  auto run = [&](const std::string& arch, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.arch = arch;
    cfg.level = level;
    cfg.epochs = 10;
    cfg.batch = 64;
    cfg.lr = 1e-2;
    cfg.lr_decay = 0.9;
    cfg.n_samples = 25;
    cfg.quadrature = 1000;
    cfg.seed = seed;
    cfg.metrics_csv = "/tmp/gev_acceptance_metrics.csv";
    cfg.out_checkpoint = "/tmp/gev_acceptance.ckpt";
    Network net(parse_architecture(arch, level, cfg.n_samples), &res);
    net.init_params(seed);
    const TrainResult r = train(cfg, train_set, test_set, net);
    for (std::size_t e = 1; e < r.history.size(); ++e) {
      ++transitions;
      mono += r.history[e].train_loss <= r.history[e - 1].train_loss;
    }
    return r.final_test_acc;
  };

  double acc_gev = 0.0, acc_ge = 0.0;
  const std::uint64_t seeds[5] = {101, 202, 303, 404, 505};
  std::printf("    GEVNet seeds:");
  for (std::uint64_t s : seeds) {
    const double a = run(arch_gev, s);
    std::printf(" %.3f", a);
    std::fflush(stdout);
    acc_gev += a / 5;
  }
  std::printf("  mean %.3f\n    GENet seeds: ", acc_gev);
  for (std::uint64_t s : seeds) {
    const double a = run(arch_ge, s);
    std::printf(" %.3f", a);
    std::fflush(stdout);
    acc_ge += a / 5;
  }
  const double minutes = (now_s() - t0) / 60.0;
  std::printf("  mean %.3f\n", acc_ge);

  const double frac_mono = static_cast<double>(mono) / transitions;
  const bool pass = acc_gev > acc_ge && acc_gev > 0.60 && minutes < 30.0 && frac_mono >= 0.8;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "mean test error GEVNet %.3f < GENet %.3f; GEVNet accuracy floor %.3f > 0.60; "
                "%.1f min; loss non-increasing in %.0f%% of epoch transitions",
                1.0 - acc_gev, 1.0 - acc_ge, acc_gev, minutes, 100.0 * frac_mono);
  verdict(7, pass, buf);
  CHECK(acc_gev > acc_ge);        // the directional claim at matched parameter budget
  CHECK(acc_gev > 0.60);          // weak floor
  CHECK(minutes < 30.0);
  CHECK(frac_mono >= 0.8);        // smoke property on the training loss
}

TEST_CASE("criterion 8: parameter accounting") {
  // Hand-enumerated unit architectures (exact).
  bool units_ok = true;
  {
    Architecture a;
    a.input_level = 1;
    a.input_channels = 1;
    a.input_type = kS;
    a.layers = {geconv(1, kS, 1, kS, false)};
    units_ok &= count_params(a) == 2;
    a.layers = {gevconv(1, kS, 1, kSV, true)};
    units_ok &= count_params(a) == 4 + 12 + 1;
    a.layers = {gevconv(1, kS, 2, kSV, true)};
    units_ok &= count_params(a) == 2 * 4 + 2 * 12 + 2;
  }
  CHECK(units_ok);

  // Externally reported parameter figures. Two readings for the 2-layer pair: the
  // literal channel listing, and the desk pair constructed to match the
  // stated parameter counts under this basis enumeration.
  const int N = 25;
  struct Entry {
    const char* name;
    std::string arch;
    double target;
  };
  const Entry entries[] = {
      {"2-layer GEVNet (literal channels)",
       "gevconv:1s:2sv,nonlin,pool,gevconv:2sv:2s,globalpool,dense:2:10", 804},
      {"2-layer GENet (literal channels)",
       "geconv:1s:2sv,nonlin,pool,geconv:2sv:4s,globalpool,dense:4:10", 824},
      {"2-layer GEVNet (desk, matched params)",
       "gevconv:1s:2sv,nonlin,pool,gevconv:2sv:14s,globalpool,dense:14:10", 804},
      {"2-layer GENet (desk, matched params)",
       "geconv:1s:2sv,nonlin,pool,geconv:2sv:42s,globalpool,dense:42:10", 824},
      {"7-layer GEVNet (benchmark listing)",
       "gevconv:1s:3sv,nonlin,gevconv:3sv:3sv,nonlin,pool,gevconv:3sv:8sv,nonlin,"
       "gevconv:8sv:8sv,nonlin,pool,gevconv:8sv:12sv,nonlin,gevconv:12sv:12sv,nonlin,pool,"
       "gevconv:12sv:12s,globalpool,dense:12:10",
       31000},
      {"7-layer GENet (benchmark listing)",
       "geconv:1s:10sv,nonlin,geconv:10sv:10sv,nonlin,pool,geconv:10sv:16sv,nonlin,"
       "geconv:16sv:16sv,nonlin,pool,geconv:16sv:32sv,nonlin,geconv:32sv:32sv,nonlin,pool,"
       "geconv:32sv:32s,globalpool,dense:32:10",
       45000},
  };

  bool figures_ok = true;
  std::printf("    reference-figure reconstruction (tolerance +-15%%):\n");
  std::vector<double> deviations;
  for (const Entry& e : entries) {
    const Architecture a = parse_architecture(e.arch, 3, N);
    const double count = static_cast<double>(count_params(a));
    const double dev = (count - e.target) / e.target;
    deviations.push_back(dev);
    const bool ok = std::abs(dev) <= 0.15;
    figures_ok &= ok;
    std::printf("      %-38s %8.0f vs %6.0f (%+.1f%%) %s\n", e.name, count, e.target,
                100.0 * dev, ok ? "within" : "OUTSIDE");
  }
  verdict(8, units_ok && figures_ok,
          units_ok ? "unit architectures exact; reference figures as printed above"
                   : "unit architecture enumeration failed");
  // The literal-channel and benchmark descriptors do not land inside +-15%
  // under this basis enumeration (the published counts are not reconstructible;
  // see the printed deviations). The assertions state the criterion as
  // specified rather than hiding the mismatch.
  CHECK(std::abs(deviations[0]) <= 0.15);
  CHECK(std::abs(deviations[1]) <= 0.15);
  CHECK(std::abs(deviations[2]) <= 0.15);
  CHECK(std::abs(deviations[3]) <= 0.15);
  CHECK(std::abs(deviations[4]) <= 0.15);
  CHECK(std::abs(deviations[5]) <= 0.15);
}

TEST_CASE("criterion 9: quadrature stability at level 3") {
  const IcosphereGrid grid = build_icosphere(3);
  const GeometryStencil geom = build_stencil(grid);
  const ConvStencil a = homogenize_stencil(geom, 1000);
  const ConvStencil b = homogenize_stencil(geom, 5000);
  double worst = 0.0;
  for (int v = 0; v < grid.num_vertices(); ++v)
    for (std::size_t j = 0; j < a.factors[v].size(); ++j)
      for (int ki = 0; ki < kNumFactorKinds; ++ki)
        for (int u = 0; u < 4; ++u)
          worst = std::max(worst, std::abs(a.factors[v][j].k[ki][u] - b.factors[v][j].k[ki][u]));
  verdict(9, worst <= 1e-3,
          "Q=1000 vs Q=5000 stencils, max elementwise |diff| = " + sci(worst));
  CHECK(worst <= 1e-3);
}

TEST_CASE("command line surface") {
#ifdef GEVNET_CLI_PATH
  const std::string cli = GEVNET_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("--definitely-not-a-flag") == 2);
  CHECK(run("verify --samples 50 --seed 3") == 0);
  CHECK(run("verify --samples 50 --seed 3 --inject-corruption") == 1);
  CHECK(run("geometry --level 1 --out /tmp/gev_acc_geom.gevc --quadrature 120") == 0);
  std::remove("/tmp/gev_acc_geom.gevc");
#else
  MESSAGE("CLI path not configured");
#endif
}
