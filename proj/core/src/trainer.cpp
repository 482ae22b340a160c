#include "face_manifold/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "face_manifold/errors.hpp"
#include "face_manifold/parallel.hpp"
#include "face_manifold/rng.hpp"

namespace face_manifold {
namespace {

void check_dataset(const AutoencoderSpec& spec, const ParamDataset& d, const char* name) {
  if (d.empty()) throw InvalidArgument(fmt::format("{} set is empty", name));
  if (d.param_count != spec.input_length) {
    throw DimensionError(fmt::format("{} set has {} parameters, network expects {}", name,
                                     d.param_count, spec.input_length));
  }
  if (d.group == ParamGroup::identity && d.normalization != kShapeNormalization) {
    throw InvalidArgument(fmt::format(
        "{} set holds unnormalized identity parameters (normalization {}); normalize first",
        name, d.normalization));
  }
}

double sorted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (const double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace

MseReport evaluate_mse(const AutoencoderWeights& weights, const ParamDataset& dataset,
                       unsigned threads) {
  if (dataset.empty()) throw InvalidArgument("evaluate_mse: dataset is empty");
  if (dataset.param_count != weights.spec.input_length) {
    throw DimensionError(fmt::format("evaluate_mse: dataset has {} parameters, network expects {}",
                                     dataset.param_count, weights.spec.input_length));
  }
  std::vector<double> out(dataset.size());
  std::vector<double> in(dataset.size());
  parallel_for(dataset.size(), resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto& pair = dataset.pairs[k];
      out[k] = mse(forward(weights, pair.noisy).output, pair.clean);
      in[k] = mse(pair.noisy, pair.clean);
    }
  });
  return {sorted_mean(std::move(out)), sorted_mean(std::move(in))};
}

TrainResult train(const AutoencoderSpec& spec, const ParamDataset& train_set,
                  const ParamDataset& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (config.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (config.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  check_dataset(spec, train_set, "training");
  check_dataset(spec, test_set, "test");
  if (train_set.group != test_set.group) {
    throw InvalidArgument("training and test sets hold different parameter groups");
  }

  const unsigned threads = resolve_threads(config.threads);
  TrainResult result{init_weights(spec, derive_seed(config.seed, "init")), {}};
  auto& weights = result.weights;
  std::vector<double> params = weights.flatten();
  AdamState adam(params.size(), config.learning_rate);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::vector<double>> sample_grads(config.batch_size);
  std::vector<double> sample_loss(config.batch_size);
  std::vector<double> grad(params.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (config.shuffle) {
      Rng rng = make_stream(config.seed, "shuffle", epoch);
      std::shuffle(order.begin(), order.end(), rng);
    }
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < n; first += config.batch_size, ++batch_index) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, n - first);
      parallel_for(count, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
          const auto& pair = train_set.pairs[order[first + b]];
          auto fwd = forward(weights, pair.noisy);
          auto loss = mse_loss(fwd.output, pair.clean);
          sample_loss[b] = loss.loss;
          sample_grads[b] = backward(weights, fwd.trace, loss.grad);
        }
      });

      double batch_loss = 0.0;
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = 0; b < count; ++b) {
        batch_loss += sample_loss[b];
        const auto& g = sample_grads[b];
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
      }
      const double inv = 1.0 / static_cast<double>(count);
      batch_loss *= inv;
      for (auto& g : grad) g *= inv;
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError(fmt::format("training diverged: non-finite loss at epoch {}, batch {}",
                                          epoch + 1, batch_index + 1));
      }
      adam_step(params, grad, adam);
      weights.assign(params);
    }

    const auto train_report = evaluate_mse(weights, train_set, threads);
    const auto test_report = evaluate_mse(weights, test_set, threads);
    if (!std::isfinite(train_report.output_mse) || !std::isfinite(test_report.output_mse)) {
      throw DivergenceError(fmt::format("training diverged: non-finite epoch loss at epoch {}",
                                        epoch + 1));
    }
    auto& h = result.history;
    h.train_loss.push_back(train_report.output_mse);
    h.test_loss.push_back(test_report.output_mse);
    h.seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (on_epoch) on_epoch(epoch, h);
  }
  return result;
}

}  // namespace face_manifold
