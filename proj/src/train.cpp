#include "gevnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "gevnet/cache.hpp"
#include "gevnet/errors.hpp"

namespace gev {

void AdamState::init(ParamStore& params) {
  step = 0;
  m.clear();
  v.clear();
  for (Param* p : params.all()) {
    m.emplace_back(p->value.size(), 0.0);
    v.emplace_back(p->value.size(), 0.0);
  }
}

void adam_step(ParamStore& params, AdamState& state, double lr, double weight_decay) {
  const auto ps = params.all();
  if (ps.size() != state.m.size()) throw ContractViolation("adam_step: state shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t a = 0; a < ps.size(); ++a) {
    Param& p = *ps[a];
    if (p.grad.size() != p.value.size()) throw ContractViolation("adam_step: grad shape mismatch");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      state.m[a][i] = state.beta1 * state.m[a][i] + (1.0 - state.beta1) * g;
      state.v[a][i] = state.beta2 * state.v[a][i] + (1.0 - state.beta2) * g * g;
      const double mhat = state.m[a][i] / bc1;
      const double vhat = state.v[a][i] / bc2;
      // Decoupled weight decay.
      p.value[i] -= lr * (mhat / (std::sqrt(vhat) + state.eps) + weight_decay * p.value[i]);
    }
  }
}

double cross_entropy(const std::vector<double>& logits, const std::vector<double>& labels, int B,
                     int classes, std::vector<double>* grad) {
  if (logits.size() != static_cast<std::size_t>(B) * classes || labels.size() != logits.size())
    throw ContractViolation("cross_entropy: shape mismatch");
  if (grad) grad->assign(logits.size(), 0.0);
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const double* z = logits.data() + static_cast<std::size_t>(b) * classes;
    const double* y = labels.data() + static_cast<std::size_t>(b) * classes;
    const double zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) sum += std::exp(z[k] - zmax);
    const double logsum = std::log(sum) + zmax;
    for (int k = 0; k < classes; ++k) {
      loss -= y[k] * (z[k] - logsum);
      if (grad)
        (*grad)[static_cast<std::size_t>(b) * classes + k] =
            (std::exp(z[k] - logsum) - y[k]) / B;
    }
  }
  return loss / B;
}

namespace {

double beta_sample(std::mt19937_64& rng, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng), y = gamma(rng);
  return (x + y) > 0.0 ? x / (x + y) : 0.5;
}

int argmax_row(const double* row, int n) {
  return static_cast<int>(std::max_element(row, row + n) - row);
}

}  // namespace

TrainResult train(const TrainConfig& config, const SphericalDataset& train_set,
                  const SphericalDataset& test_set, Network& net) {
  config.check();
  if (train_set.grid_level != net.arch().input_level)
    throw ConfigError("train: dataset level does not match the architecture input level");
  const int V = train_set.vertices();
  const int classes = train_set.num_classes;
  const int n = train_set.count();

  AdamState adam;
  adam.init(net.params());
  std::mt19937_64 rng(config.seed);

  std::ofstream csv(config.metrics_csv);
  csv << "epoch,train_loss,train_acc,test_acc,lr,seconds\n";

  TrainResult result;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = config.lr * std::pow(config.lr_decay, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    long long correct = 0, seen = 0;
    for (int start = 0; start < n; start += config.batch) {
      const int B = std::min(config.batch, n - start);
      std::vector<double> batch(static_cast<std::size_t>(B) * V);
      std::vector<double> labels(static_cast<std::size_t>(B) * classes);
      for (int b = 0; b < B; ++b) {
        const int idx = order[start + b];
        std::copy_n(train_set.fields.begin() + static_cast<std::size_t>(idx) * V, V,
                    batch.begin() + static_cast<std::size_t>(b) * V);
        std::copy_n(train_set.labels.begin() + static_cast<std::size_t>(idx) * classes, classes,
                    labels.begin() + static_cast<std::size_t>(b) * classes);
      }
      if (config.mixup) {
        // Pair each sample with a shuffled partner inside the batch.
        std::vector<int> partner(B);
        std::iota(partner.begin(), partner.end(), 0);
        std::shuffle(partner.begin(), partner.end(), rng);
        std::vector<double> bx = batch, by = labels;
        for (int b = 0; b < B; ++b) {
          const double lam = beta_sample(rng, config.mixup_alpha);
          mixup_batch(bx.data() + static_cast<std::size_t>(b) * V,
                      by.data() + static_cast<std::size_t>(b) * classes,
                      bx.data() + static_cast<std::size_t>(partner[b]) * V,
                      by.data() + static_cast<std::size_t>(partner[b]) * classes, V, classes, lam,
                      batch.data() + static_cast<std::size_t>(b) * V,
                      labels.data() + static_cast<std::size_t>(b) * classes);
        }
      }

      ForwardCache cache;
      net.forward(batch, B, /*train=*/true, cache);
      std::vector<double> grad;
      const double loss = cross_entropy(cache.acts.back().data, labels, B, classes, &grad);
      loss_sum += loss * B;
      for (int b = 0; b < B; ++b) {
        const int pred = argmax_row(cache.acts.back().data.data() +
                                        static_cast<std::size_t>(b) * classes, classes);
        const int truth = argmax_row(labels.data() + static_cast<std::size_t>(b) * classes,
                                     classes);
        correct += pred == truth;
      }
      seen += B;

      net.params().zero_grad();
      net.backward(cache, grad);
      adam_step(net.params(), adam, lr, config.weight_decay);
    }

    refresh_batchnorm(net, train_set, config.batch);
    const EvalResult ev = evaluate(net, test_set, config.batch);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochRow row{epoch, loss_sum / seen, static_cast<double>(correct) / seen, ev.accuracy, lr,
                 secs};
    result.history.push_back(row);
    result.final_test_acc = ev.accuracy;
    csv << row.epoch << "," << row.train_loss << "," << row.train_acc << "," << row.test_acc
        << "," << row.lr << "," << row.seconds << "\n";
    csv.flush();
  }

  save_checkpoint(config.out_checkpoint, net, net.arch().input_level, config.float32);
  return result;
}

void refresh_batchnorm(Network& net, const SphericalDataset& ds, int batch) {
  bool any = false;
  for (LayerParams& lp : net.params().layers) {
    if (lp.running_mean.empty()) continue;
    any = true;
    lp.bn_batches = 0;
    std::fill(lp.running_mean.begin(), lp.running_mean.end(), 0.0);
    std::fill(lp.running_var.begin(), lp.running_var.end(), 0.0);
  }
  if (!any) return;
  const int V = ds.vertices();
  for (int start = 0; start < ds.count(); start += batch) {
    const int B = std::min(batch, ds.count() - start);
    std::vector<double> in(static_cast<std::size_t>(B) * V);
    std::copy_n(ds.fields.begin() + static_cast<std::size_t>(start) * V, in.size(), in.begin());
    ForwardCache cache;
    net.forward(in, B, /*train=*/true, cache);
  }
}

EvalResult evaluate(Network& net, const SphericalDataset& ds, int batch) {
  const int V = ds.vertices();
  const int classes = ds.num_classes;
  EvalResult res;
  res.confusion.assign(static_cast<std::size_t>(classes) * classes, 0);
  long long correct = 0;
  for (int start = 0; start < ds.count(); start += batch) {
    const int B = std::min(batch, ds.count() - start);
    std::vector<double> in(static_cast<std::size_t>(B) * V);
    std::copy_n(ds.fields.begin() + static_cast<std::size_t>(start) * V,
                static_cast<std::size_t>(B) * V, in.begin());
    ForwardCache cache;
    net.forward(in, B, /*train=*/false, cache);
    for (int b = 0; b < B; ++b) {
      const int pred = argmax_row(
          cache.acts.back().data.data() + static_cast<std::size_t>(b) * classes, classes);
      const int truth = ds.hard_label(start + b);
      res.confusion[static_cast<std::size_t>(truth) * classes + pred] += 1;
      correct += pred == truth;
    }
  }
  res.accuracy = ds.count() > 0 ? static_cast<double>(correct) / ds.count() : 0.0;
  return res;
}

}  // namespace gev
