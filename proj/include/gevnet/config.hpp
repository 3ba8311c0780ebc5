#pragma once

#include <map>
#include <string>
#include <vector>

#include "gevnet/network.hpp"

namespace gev {

// Run configuration. File format: `key = value` lines, `#` comments, no
// sections; command-line `key=value` tokens override file entries.
struct TrainConfig {
  std::string arch;  // architecture descriptor, see parse_architecture
  int level = 3;     // input grid level
  int epochs = 10;
  int batch = 128;
  double lr = 3e-4;
  double lr_decay = 0.9;  // per-epoch exponential factor
  double weight_decay = 0.0;
  int n_samples = 101;  // nonlinearity N
  int quadrature = 1000;
  std::uint64_t seed = 7;
  bool float32 = false;  // storage precision for checkpoints (compute is f64)
  bool mixup = false;
  double mixup_alpha = 0.2;
  bool deterministic = true;  // single-thread reductions
  std::string train_data, test_data;
  std::string out_checkpoint = "model.ckpt";
  std::string metrics_csv = "metrics.csv";

  void check() const;  // throws ConfigError on invariant violations
};

std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_overrides(std::map<std::string, std::string>& kv,
                     const std::vector<std::string>& overrides);
TrainConfig config_from_map(const std::map<std::string, std::string>& kv);

// Architecture descriptor, comma separated layers:
//   geconv:<cin><ty>:<cout><ty>   first order convolution
//   gevconv:<cin><ty>:<cout><ty>  with the second order term
//   nonlin                        regular nonlinearity (N, BN from config)
//   pool                          one grid level down
//   globalpool                    mean over vertices (rho0 only)
//   dense:<in>:<out>              affine head
// where <ty> is s (rho0), v (rho1) or sv (rho0 + rho1),
// e.g. "gevconv:1s:2sv,nonlin,pool,gevconv:2sv:14s,globalpool,dense:14:10".
Architecture parse_architecture(const std::string& descriptor, int input_level, int n_samples,
                                bool exact_nonlin = false);
std::string architecture_to_string(const Architecture& arch);

}  // namespace gev
