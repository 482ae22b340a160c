#include "face_manifold/autoencoder.hpp"

#include <fmt/format.h>

#include <cmath>

#include "binary_io.hpp"
#include "face_manifold/errors.hpp"
#include "face_manifold/parallel.hpp"
#include "face_manifold/rng.hpp"

namespace face_manifold {

AutoencoderSpec AutoencoderSpec::build(std::size_t input_length) {
  if (input_length < kMinInputLength) {
    throw InvalidArgument(fmt::format("autoencoder input length must be >= {}, got {}",
                                      kMinInputLength, input_length));
  }
  AutoencoderSpec spec;
  spec.input_length = input_length;
  spec.lengths[0] = input_length;
  for (std::size_t l = 0; l < kLayersPerSide; ++l) {
    spec.lengths[l + 1] = pooled_length(spec.lengths[l]);
  }
  return spec;
}

AutoencoderWeights AutoencoderWeights::zeros(const AutoencoderSpec& spec) {
  AutoencoderWeights w;
  w.spec = spec;
  const auto& ch = spec.channels;
  for (std::size_t l = 0; l < kLayersPerSide; ++l) {
    w.encoder[l] = ConvKernel::conv(ch[l + 1], ch[l], spec.kernel_size);
  }
  for (std::size_t j = 0; j < kLayersPerSide; ++j) {
    w.decoder[j] = ConvKernel::transposed(ch[kLayersPerSide - j], ch[kLayersPerSide - 1 - j],
                                          spec.kernel_size);
  }
  return w;
}

std::size_t AutoencoderWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto* side : {&encoder, &decoder}) {
    for (const auto& k : *side) n += k.weights.size() + k.bias.size();
  }
  return n;
}

std::vector<double> AutoencoderWeights::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto* side : {&encoder, &decoder}) {
    for (const auto& k : *side) {
      flat.insert(flat.end(), k.weights.begin(), k.weights.end());
      flat.insert(flat.end(), k.bias.begin(), k.bias.end());
    }
  }
  return flat;
}

void AutoencoderWeights::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError(fmt::format("expected {} parameters, got {}", parameter_count(),
                                     flat.size()));
  }
  std::size_t pos = 0;
  for (auto* side : {&encoder, &decoder}) {
    for (auto& k : *side) {
      for (auto* v : {&k.weights, &k.bias}) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), v->size(), v->begin());
        pos += v->size();
      }
    }
  }
}

AutoencoderWeights init_weights(const AutoencoderSpec& spec, std::uint64_t seed) {
  auto w = AutoencoderWeights::zeros(spec);
  std::size_t layer = 0;
  for (auto* side : {&w.encoder, &w.decoder}) {
    for (auto& k : *side) {
      const double fan_sum = static_cast<double>((k.in_channels + k.out_channels) * k.kernel_size);
      const double bound = std::sqrt(6.0 / fan_sum);
      Rng rng = make_stream(seed, "init-weights", layer++);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& x : k.weights) x = dist(rng);
    }
  }
  return w;
}

ForwardResult forward(const AutoencoderWeights& weights, std::span<const double> input) {
  const auto& spec = weights.spec;
  if (input.size() != spec.input_length) {
    throw DimensionError(fmt::format("network expects {} parameters, got {}", spec.input_length,
                                     input.size()));
  }
  ForwardResult result;
  auto& trace = result.trace;
  FeatureMap x(1, input.size(), std::vector<double>(input.begin(), input.end()));
  for (std::size_t l = 0; l < kLayersPerSide; ++l) {
    trace.encoder_inputs[l] = std::move(x);
    trace.encoder_pre_activation[l] = conv1d_forward(trace.encoder_inputs[l], weights.encoder[l]);
    auto [pooled, record] = maxpool1d_forward(relu_forward(trace.encoder_pre_activation[l]));
    trace.pools[l] = std::move(record);
    x = std::move(pooled);
  }
  trace.bottleneck = std::move(x);
  result.output = decode(weights, trace.bottleneck, trace.pools, &trace);
  return result;
}

std::vector<double> decode(const AutoencoderWeights& weights, const FeatureMap& bottleneck,
                           std::span<const PoolRecord, kLayersPerSide> pools,
                           ForwardTrace* trace) {
  FeatureMap y = bottleneck;
  for (std::size_t j = 0; j < kLayersPerSide; ++j) {
    FeatureMap unpooled = maxunpool1d_forward(y, pools[kLayersPerSide - 1 - j]);
    FeatureMap pre = tconv1d_forward(unpooled, weights.decoder[j]);
    y = j + 1 < kLayersPerSide ? relu_forward(pre) : pre;
    if (trace != nullptr) {
      trace->decoder_inputs[j] = std::move(unpooled);
      trace->decoder_pre_activation[j] = std::move(pre);
    }
  }
  return std::move(y.data);
}

std::vector<double> backward(const AutoencoderWeights& weights, const ForwardTrace& trace,
                             std::span<const double> grad_output) {
  const auto& spec = weights.spec;
  if (grad_output.size() != spec.input_length) {
    throw DimensionError(fmt::format("grad_output has {} entries, expected {}",
                                     grad_output.size(), spec.input_length));
  }
  std::array<ConvGrads, kLayersPerSide> enc;
  std::array<ConvGrads, kLayersPerSide> dec;

  FeatureMap g(1, grad_output.size(), std::vector<double>(grad_output.begin(), grad_output.end()));
  for (std::size_t j = kLayersPerSide; j-- > 0;) {
    if (j + 1 < kLayersPerSide) g = relu_backward(trace.decoder_pre_activation[j], g);
    dec[j] = tconv1d_backward(trace.decoder_inputs[j], weights.decoder[j], g);
    g = maxunpool1d_backward(trace.pools[kLayersPerSide - 1 - j], dec[j].input);
  }
  for (std::size_t l = kLayersPerSide; l-- > 0;) {
    g = maxpool1d_backward(trace.pools[l], g);
    g = relu_backward(trace.encoder_pre_activation[l], g);
    enc[l] = conv1d_backward(trace.encoder_inputs[l], weights.encoder[l], g);
    g = std::move(enc[l].input);
  }

  std::vector<double> flat;
  flat.reserve(weights.parameter_count());
  for (const auto* side : {&enc, &dec}) {
    for (const auto& layer : *side) {
      flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
      flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
  }
  return flat;
}

std::vector<std::vector<double>> denoise_batch(const AutoencoderWeights& weights,
                                               const std::vector<std::vector<double>>& inputs,
                                               unsigned threads) {
  for (const auto& in : inputs) {
    if (in.size() != weights.spec.input_length) {
      throw DimensionError(fmt::format("denoise_batch: input of length {}, network expects {}",
                                       in.size(), weights.spec.input_length));
    }
  }
  std::vector<std::vector<double>> outputs(inputs.size());
  parallel_for(inputs.size(), resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) outputs[i] = forward(weights, inputs[i]).output;
  });
  return outputs;
}

// ---------------------------------------------------------------------------
// .fwt: "FWT1", u32 input_length, u32 layer count, then per layer
// u32 out_ch, u32 in_ch, u32 K, u8 type (0 conv, 1 tconv), f64 weights, f64 biases.

namespace {

enum class LayerType : std::uint8_t { conv = 0, tconv = 1 };

}  // namespace

std::string serialize_weights(const AutoencoderWeights& weights) {
  detail::BinaryWriter w;
  w.magic("FWT1");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.spec.input_length));
  w.put<std::uint32_t>(2 * kLayersPerSide);
  auto put_layer = [&](const ConvKernel& k, LayerType type) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k.out_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k.in_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k.kernel_size));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(type));
    w.put_array<double>(k.weights);
    w.put_array<double>(k.bias);
  };
  for (const auto& k : weights.encoder) put_layer(k, LayerType::conv);
  for (const auto& k : weights.decoder) put_layer(k, LayerType::tconv);
  return w.bytes();
}

AutoencoderWeights deserialize_weights(std::string bytes,
                                       std::optional<std::size_t> expected_input_length) {
  detail::BinaryReader r(std::move(bytes), "weights");
  r.expect_magic("FWT1");
  const auto input_length = r.get<std::uint32_t>("header.input_length");
  if (expected_input_length && *expected_input_length != input_length) {
    throw DimensionError(fmt::format(
        "weights file is for input length {}, but {} parameters are required", input_length,
        *expected_input_length));
  }
  const auto layer_count = r.get<std::uint32_t>("header.layer_count");
  if (layer_count != 2 * kLayersPerSide) {
    throw FormatError(fmt::format("weights file: expected {} layers, found {}",
                                  2 * kLayersPerSide, layer_count));
  }
  AutoencoderSpec spec;
  try {
    spec = AutoencoderSpec::build(input_length);
  } catch (const InvalidArgument& e) {
    throw DimensionError(fmt::format("weights file: {}", e.what()));
  }
  auto weights = AutoencoderWeights::zeros(spec);
  std::size_t index = 0;
  auto read_layer = [&](ConvKernel& k, LayerType type) {
    const auto section = fmt::format("layer{}", index++);
    const auto out_ch = r.get<std::uint32_t>(section + ".out_ch");
    const auto in_ch = r.get<std::uint32_t>(section + ".in_ch");
    const auto ksize = r.get<std::uint32_t>(section + ".K");
    const auto t = r.get<std::uint8_t>(section + ".type");
    if (t != static_cast<std::uint8_t>(type)) {
      throw FormatError(fmt::format("weights file: {} has layer type {}, expected {}", section, t,
                                    static_cast<int>(type)));
    }
    if (out_ch != k.out_channels || in_ch != k.in_channels || ksize != k.kernel_size) {
      throw DimensionError(fmt::format("weights file: {} is {}x{}x{}, expected {}x{}x{}", section,
                                       out_ch, in_ch, ksize, k.out_channels, k.in_channels,
                                       k.kernel_size));
    }
    k.weights = r.get_array<double>(k.weights.size(), section + ".weights");
    k.bias = r.get_array<double>(k.bias.size(), section + ".bias");
  };
  for (auto& k : weights.encoder) read_layer(k, LayerType::conv);
  for (auto& k : weights.decoder) read_layer(k, LayerType::tconv);
  r.expect_end();
  for (const double v : weights.flatten()) {
    if (!std::isfinite(v)) throw FormatError("weights file contains non-finite values");
  }
  return weights;
}

void save_weights(const AutoencoderWeights& weights, const std::filesystem::path& path) {
  detail::write_file(path, serialize_weights(weights));
}

AutoencoderWeights load_weights(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_input_length) {
  return deserialize_weights(detail::read_file(path, "weights"), expected_input_length);
}

}  // namespace face_manifold
