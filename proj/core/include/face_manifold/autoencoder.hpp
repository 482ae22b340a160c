#pragma once

// Eight-layer symmetric convolutional denoising autoencoder.
//
//   encoder layer l (l = 0..3):  conv(ch[l] -> ch[l+1]) -> ReLU -> maxpool
//   decoder layer j (j = 0..3):  maxunpool(record 3 - j) -> tconv(ch[4-j] -> ch[3-j]) -> ReLU
//
// with ch = {1, 8, 16, 32, 64}. The last decoder layer is linear (no ReLU)
// because morphable-model coefficients are signed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "face_manifold/tensor_nn.hpp"

namespace face_manifold {

inline constexpr std::size_t kLayersPerSide = 4;
inline constexpr std::size_t kMinInputLength = 16;

struct AutoencoderSpec {
  std::size_t input_length = 0;
  std::array<std::size_t, kLayersPerSide + 1> channels{1, 8, 16, 32, 64};
  std::size_t kernel_size = 3;
  std::size_t pool_size = 2;
  /// lengths[l] is the feature length entering encoder layer l; lengths[4] is the bottleneck.
  std::array<std::size_t, kLayersPerSide + 1> lengths{};

  static AutoencoderSpec build(std::size_t input_length);

  std::size_t bottleneck_channels() const { return channels.back(); }
  std::size_t bottleneck_length() const { return lengths.back(); }

  friend bool operator==(const AutoencoderSpec&, const AutoencoderSpec&) = default;
};

struct AutoencoderWeights {
  AutoencoderSpec spec;
  std::array<ConvKernel, kLayersPerSide> encoder;  // conv orientation
  std::array<ConvKernel, kLayersPerSide> decoder;  // transposed orientation

  /// Zero-initialized weights for `spec`.
  static AutoencoderWeights zeros(const AutoencoderSpec& spec);

  std::size_t parameter_count() const;
  /// Layer order: encoder 0..3 then decoder 0..3; each layer's weights then biases.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const AutoencoderWeights&, const AutoencoderWeights&) = default;
};

/// Glorot-uniform kernels, b = sqrt(6 / (fan_in + fan_out)); zero biases.
AutoencoderWeights init_weights(const AutoencoderSpec& spec, std::uint64_t seed);

struct ForwardTrace {
  std::array<FeatureMap, kLayersPerSide> encoder_inputs;
  std::array<FeatureMap, kLayersPerSide> encoder_pre_activation;
  std::array<PoolRecord, kLayersPerSide> pools;  // encoder order
  std::array<FeatureMap, kLayersPerSide> decoder_inputs;  // unpooled maps fed to tconv
  std::array<FeatureMap, kLayersPerSide> decoder_pre_activation;
  FeatureMap bottleneck;
};

struct ForwardResult {
  std::vector<double> output;
  ForwardTrace trace;
};

ForwardResult forward(const AutoencoderWeights& weights, std::span<const double> input);

/// Decoder half on its own; `pools` is in encoder order and is consumed in reverse.
/// Fills the decoder fields of `trace` when given.
std::vector<double> decode(const AutoencoderWeights& weights, const FeatureMap& bottleneck,
                           std::span<const PoolRecord, kLayersPerSide> pools,
                           ForwardTrace* trace = nullptr);

/// Gradient of sum(output * grad_output) with respect to every parameter, in
/// flatten() order.
std::vector<double> backward(const AutoencoderWeights& weights, const ForwardTrace& trace,
                             std::span<const double> grad_output);

/// Forward pass per sample (no training). Output order matches input order.
std::vector<std::vector<double>> denoise_batch(const AutoencoderWeights& weights,
                                               const std::vector<std::vector<double>>& inputs,
                                               unsigned threads = 1);

std::string serialize_weights(const AutoencoderWeights& weights);
AutoencoderWeights deserialize_weights(std::string bytes,
                                       std::optional<std::size_t> expected_input_length = {});
void save_weights(const AutoencoderWeights& weights, const std::filesystem::path& path);
AutoencoderWeights load_weights(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_input_length = {});

}  // namespace face_manifold
