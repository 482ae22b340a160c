#pragma once

// 1D kernels with exact backward passes: convolution, transposed convolution,
// max-pooling with index capture, max-unpooling, ReLU, MSE and Adam.
// Everything is double precision and single-threaded; callers parallelize
// across samples.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace face_manifold {

/// channels x length grid, row-major by channel.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t l, double fill = 0.0) : channels(c), length(l), data(c * l, fill) {}
  FeatureMap(std::size_t c, std::size_t l, std::vector<double> values);

  double& at(std::size_t c, std::size_t t) { return data[c * length + t]; }
  double at(std::size_t c, std::size_t t) const { return data[c * length + t]; }
  std::span<double> row(std::size_t c) { return {data.data() + c * length, length}; }
  std::span<const double> row(std::size_t c) const { return {data.data() + c * length, length}; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

/// Weights laid out out_channels x in_channels x kernel_size in the
/// convolution orientation. A transposed convolution reuses the same layout
/// (it maps out_channels -> in_channels), so its bias has in_channels entries.
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_size = 3;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t o, std::size_t i, std::size_t k) {
    return weights[(o * in_channels + i) * kernel_size + k];
  }
  double w(std::size_t o, std::size_t i, std::size_t k) const {
    return weights[(o * in_channels + i) * kernel_size + k];
  }

  static ConvKernel conv(std::size_t out_ch, std::size_t in_ch, std::size_t k = 3);
  static ConvKernel transposed(std::size_t out_ch, std::size_t in_ch, std::size_t k = 3);

  friend bool operator==(const ConvKernel&, const ConvKernel&) = default;
};

struct ConvGrads {
  FeatureMap input;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Stride 1, zero padding (K-1)/2, output length equals input length.
FeatureMap conv1d_forward(const FeatureMap& x, const ConvKernel& k);
ConvGrads conv1d_backward(const FeatureMap& x, const ConvKernel& k, const FeatureMap& grad_out);

/// Adjoint of conv1d_forward's linear part plus a per-output-channel bias.
FeatureMap tconv1d_forward(const FeatureMap& x, const ConvKernel& k);
ConvGrads tconv1d_backward(const FeatureMap& x, const ConvKernel& k, const FeatureMap& grad_out);

struct PoolRecord {
  std::size_t pre_length = 0;
  std::size_t channels = 0;
  std::size_t out_length = 0;
  std::vector<std::uint32_t> indices;  // channels x out_length, absolute input positions

  friend bool operator==(const PoolRecord&, const PoolRecord&) = default;
};

/// Pooled length for kernel 2, stride 2: floor((L - 2) / 2) + 1.
constexpr std::size_t pooled_length(std::size_t length) { return (length - 2) / 2 + 1; }

/// Window 2, stride 2. Ties go to the lower index; an odd trailing element is dropped.
std::pair<FeatureMap, PoolRecord> maxpool1d_forward(const FeatureMap& x);
FeatureMap maxpool1d_backward(const PoolRecord& record, const FeatureMap& grad_out);

/// Places x[c][t] at record.indices[c][t] in a zero map of length pre_length.
FeatureMap maxunpool1d_forward(const FeatureMap& x, const PoolRecord& record);
FeatureMap maxunpool1d_backward(const PoolRecord& record, const FeatureMap& grad_out);

FeatureMap relu_forward(const FeatureMap& x);
/// Masks by pre_activation > 0; the gradient at exactly 0 is 0.
FeatureMap relu_backward(const FeatureMap& pre_activation, const FeatureMap& grad_out);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean over all elements of (pred - target)^2, with gradient 2 (pred - target) / M.
LossResult mse_loss(std::span<const double> pred, std::span<const double> target);
/// Loss value only.
double mse(std::span<const double> pred, std::span<const double> target);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t parameter_count, double lr)
      : m(parameter_count, 0.0), v(parameter_count, 0.0), learning_rate(lr) {}
};

/// Bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace face_manifold
