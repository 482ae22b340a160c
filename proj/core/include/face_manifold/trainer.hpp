#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "face_manifold/autoencoder.hpp"
#include "face_manifold/dataset.hpp"

namespace face_manifold {

struct TrainConfig {
  std::uint32_t epochs = 10;
  double learning_rate = 0.001;
  std::uint32_t batch_size = 128;
  std::uint64_t seed = 0;
  bool shuffle = true;
  unsigned threads = 0;  // 0: FACE_MANIFOLD_THREADS or 1
};

struct TrainHistory {
  std::vector<double> train_loss;  // full-set output MSE after each epoch
  std::vector<double> test_loss;
  std::vector<double> seconds;     // wall-clock per epoch
};

struct TrainResult {
  AutoencoderWeights weights;
  TrainHistory history;
};

struct MseReport {
  double output_mse = 0.0;  // mean over pairs of MSE(denoise(noisy), clean)
  double input_mse = 0.0;   // mean over pairs of MSE(noisy, clean)
};

/// Called after every epoch with (epoch index, history so far).
using EpochCallback = std::function<void(std::size_t, const TrainHistory&)>;

/// Mini-batch Adam on the mean squared error between denoise(noisy) and clean.
/// Each epoch reshuffles with stream (seed, "shuffle", epoch); weights start
/// from init_weights(spec, derive_seed(seed, "init")). Per-sample gradients
/// are summed in batch order, so results do not depend on thread count.
TrainResult train(const AutoencoderSpec& spec, const ParamDataset& train_set,
                  const ParamDataset& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Per-pair MSEs are sorted before summation, so the result is bitwise
/// independent of pair order.
MseReport evaluate_mse(const AutoencoderWeights& weights, const ParamDataset& dataset,
                       unsigned threads = 0);

}  // namespace face_manifold
