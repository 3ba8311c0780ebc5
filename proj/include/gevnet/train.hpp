#pragma once

#include <string>
#include <vector>

#include "gevnet/config.hpp"
#include "gevnet/data.hpp"
#include "gevnet/network.hpp"

namespace gev {

// Adam with decoupled weight decay. One slot pair (m, v) per parameter
// array, addressed in ParamStore::all() order.
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long step = 0;
  std::vector<std::vector<double>> m, v;

  void init(ParamStore& params);
};

void adam_step(ParamStore& params, AdamState& state, double lr, double weight_decay);

// Per-sample mean of -sum y log softmax(logits); grad = (softmax - y) / B.
// Labels must be soft distributions (rows summing to 1).
double cross_entropy(const std::vector<double>& logits, const std::vector<double>& labels, int B,
                     int classes, std::vector<double>* grad);

struct EpochRow {
  int epoch;
  double train_loss, train_acc, test_acc, lr, seconds;
};

struct TrainResult {
  std::vector<EpochRow> history;
  double final_test_acc = 0.0;
};

// Full training loop: seeded shuffling, optional mixup, per-epoch metrics
// appended to config.metrics_csv, checkpoint written at the end.
TrainResult train(const TrainConfig& config, const SphericalDataset& train_set,
                  const SphericalDataset& test_set, Network& net);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<int> confusion;  // [true][pred], classes^2
};

EvalResult evaluate(Network& net, const SphericalDataset& ds, int batch = 256);

// Re-estimates the BatchNorm running statistics with one pass over the
// dataset at fixed parameters. Training drifts faster than the running
// average can follow, so the trainer refreshes before every evaluation.
void refresh_batchnorm(Network& net, const SphericalDataset& ds, int batch);

}  // namespace gev
