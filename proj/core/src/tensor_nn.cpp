#include "face_manifold/tensor_nn.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "face_manifold/errors.hpp"

namespace face_manifold {

FeatureMap::FeatureMap(std::size_t c, std::size_t l, std::vector<double> values)
    : channels(c), length(l), data(std::move(values)) {
  if (data.size() != c * l) {
    throw DimensionError(fmt::format("feature map {}x{} given {} values", c, l, data.size()));
  }
}

ConvKernel ConvKernel::conv(std::size_t out_ch, std::size_t in_ch, std::size_t k) {
  return {out_ch, in_ch, k, std::vector<double>(out_ch * in_ch * k, 0.0),
          std::vector<double>(out_ch, 0.0)};
}

ConvKernel ConvKernel::transposed(std::size_t out_ch, std::size_t in_ch, std::size_t k) {
  return {out_ch, in_ch, k, std::vector<double>(out_ch * in_ch * k, 0.0),
          std::vector<double>(in_ch, 0.0)};
}

namespace {

void check_kernel(const ConvKernel& k, std::size_t bias_size) {
  if (k.kernel_size % 2 == 0) {
    throw DimensionError(fmt::format("kernel size must be odd, got {}", k.kernel_size));
  }
  if (k.weights.size() != k.out_channels * k.in_channels * k.kernel_size) {
    throw DimensionError(fmt::format("kernel {}x{}x{} has {} weights", k.out_channels,
                                     k.in_channels, k.kernel_size, k.weights.size()));
  }
  if (k.bias.size() != bias_size) {
    throw DimensionError(fmt::format("kernel bias has {} entries, expected {}", k.bias.size(),
                                     bias_size));
  }
}

void check_same_shape(const FeatureMap& a, std::size_t channels, std::size_t length,
                      const char* what) {
  if (a.channels != channels || a.length != length || a.data.size() != channels * length) {
    throw DimensionError(fmt::format("{}: got {}x{}, expected {}x{}", what, a.channels, a.length,
                                     channels, length));
  }
}

// dst[t] += w * src[t + shift] over every t where both sides are in range.
inline void axpy_shifted(std::span<double> dst, std::span<const double> src, double w,
                         std::ptrdiff_t shift) {
  const auto len = static_cast<std::ptrdiff_t>(dst.size());
  const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, -shift);
  const std::ptrdiff_t end = std::min<std::ptrdiff_t>(len, len - shift);
  for (std::ptrdiff_t t = begin; t < end; ++t) dst[t] += w * src[t + shift];
}

// sum_t a[t] * b[t + shift]
inline double dot_shifted(std::span<const double> a, std::span<const double> b,
                          std::ptrdiff_t shift) {
  const auto len = static_cast<std::ptrdiff_t>(a.size());
  const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, -shift);
  const std::ptrdiff_t end = std::min<std::ptrdiff_t>(len, len - shift);
  double s = 0.0;
  for (std::ptrdiff_t t = begin; t < end; ++t) s += a[t] * b[t + shift];
  return s;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s;
}

}  // namespace

// out[o][t] = b[o] + sum_{i,k} w[o][i][k] x[i][t + k - pad]
FeatureMap conv1d_forward(const FeatureMap& x, const ConvKernel& k) {
  check_kernel(k, k.out_channels);
  if (x.channels != k.in_channels) {
    throw DimensionError(fmt::format("conv1d: input has {} channels, kernel expects {}",
                                     x.channels, k.in_channels));
  }
  const auto pad = static_cast<std::ptrdiff_t>(k.kernel_size / 2);
  FeatureMap out(k.out_channels, x.length);
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    auto dst = out.row(o);
    std::fill(dst.begin(), dst.end(), k.bias[o]);
    for (std::size_t i = 0; i < k.in_channels; ++i) {
      for (std::size_t kk = 0; kk < k.kernel_size; ++kk) {
        axpy_shifted(dst, x.row(i), k.w(o, i, kk), static_cast<std::ptrdiff_t>(kk) - pad);
      }
    }
  }
  return out;
}

ConvGrads conv1d_backward(const FeatureMap& x, const ConvKernel& k, const FeatureMap& grad_out) {
  check_kernel(k, k.out_channels);
  check_same_shape(x, k.in_channels, x.length, "conv1d_backward input");
  check_same_shape(grad_out, k.out_channels, x.length, "conv1d_backward grad_out");
  const auto pad = static_cast<std::ptrdiff_t>(k.kernel_size / 2);
  ConvGrads g{FeatureMap(x.channels, x.length), std::vector<double>(k.weights.size(), 0.0),
              std::vector<double>(k.out_channels, 0.0)};
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    const auto go = grad_out.row(o);
    g.bias[o] = sum(go);
    for (std::size_t i = 0; i < k.in_channels; ++i) {
      for (std::size_t kk = 0; kk < k.kernel_size; ++kk) {
        const auto shift = static_cast<std::ptrdiff_t>(kk) - pad;
        g.weights[(o * k.in_channels + i) * k.kernel_size + kk] = dot_shifted(go, x.row(i), shift);
        axpy_shifted(g.input.row(i), go, k.w(o, i, kk), -shift);
      }
    }
  }
  return g;
}

// y[i][s] = b[i] + sum_{o,k} w[o][i][k] x[o][s - k + pad]
FeatureMap tconv1d_forward(const FeatureMap& x, const ConvKernel& k) {
  check_kernel(k, k.in_channels);
  if (x.channels != k.out_channels) {
    throw DimensionError(fmt::format("tconv1d: input has {} channels, kernel expects {}",
                                     x.channels, k.out_channels));
  }
  const auto pad = static_cast<std::ptrdiff_t>(k.kernel_size / 2);
  FeatureMap out(k.in_channels, x.length);
  for (std::size_t i = 0; i < k.in_channels; ++i) {
    auto dst = out.row(i);
    std::fill(dst.begin(), dst.end(), k.bias[i]);
    for (std::size_t o = 0; o < k.out_channels; ++o) {
      for (std::size_t kk = 0; kk < k.kernel_size; ++kk) {
        axpy_shifted(dst, x.row(o), k.w(o, i, kk), pad - static_cast<std::ptrdiff_t>(kk));
      }
    }
  }
  return out;
}

ConvGrads tconv1d_backward(const FeatureMap& x, const ConvKernel& k, const FeatureMap& grad_out) {
  check_kernel(k, k.in_channels);
  check_same_shape(x, k.out_channels, x.length, "tconv1d_backward input");
  check_same_shape(grad_out, k.in_channels, x.length, "tconv1d_backward grad_out");
  const auto pad = static_cast<std::ptrdiff_t>(k.kernel_size / 2);
  ConvGrads g{FeatureMap(x.channels, x.length), std::vector<double>(k.weights.size(), 0.0),
              std::vector<double>(k.in_channels, 0.0)};
  for (std::size_t i = 0; i < k.in_channels; ++i) g.bias[i] = sum(grad_out.row(i));
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    for (std::size_t i = 0; i < k.in_channels; ++i) {
      const auto gi = grad_out.row(i);
      for (std::size_t kk = 0; kk < k.kernel_size; ++kk) {
        const auto shift = pad - static_cast<std::ptrdiff_t>(kk);
        g.weights[(o * k.in_channels + i) * k.kernel_size + kk] = dot_shifted(gi, x.row(o), shift);
        axpy_shifted(g.input.row(o), gi, k.w(o, i, kk), -shift);
      }
    }
  }
  return g;
}

std::pair<FeatureMap, PoolRecord> maxpool1d_forward(const FeatureMap& x) {
  if (x.length < 2) {
    throw DimensionError(fmt::format("maxpool1d needs length >= 2, got {}", x.length));
  }
  const std::size_t out_len = pooled_length(x.length);
  FeatureMap out(x.channels, out_len);
  PoolRecord rec{x.length, x.channels, out_len, std::vector<std::uint32_t>(x.channels * out_len)};
  for (std::size_t c = 0; c < x.channels; ++c) {
    const auto src = x.row(c);
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t a = 2 * t;
      const std::size_t arg = src[a + 1] > src[a] ? a + 1 : a;
      out.at(c, t) = src[arg];
      rec.indices[c * out_len + t] = static_cast<std::uint32_t>(arg);
    }
  }
  return {std::move(out), std::move(rec)};
}

FeatureMap maxpool1d_backward(const PoolRecord& record, const FeatureMap& grad_out) {
  check_same_shape(grad_out, record.channels, record.out_length, "maxpool1d_backward grad_out");
  FeatureMap grad(record.channels, record.pre_length);
  for (std::size_t c = 0; c < record.channels; ++c) {
    for (std::size_t t = 0; t < record.out_length; ++t) {
      grad.at(c, record.indices[c * record.out_length + t]) += grad_out.at(c, t);
    }
  }
  return grad;
}

FeatureMap maxunpool1d_forward(const FeatureMap& x, const PoolRecord& record) {
  check_same_shape(x, record.channels, record.out_length, "maxunpool1d input");
  if (record.indices.size() != record.channels * record.out_length) {
    throw DimensionError("maxunpool1d: pool record has inconsistent index count");
  }
  FeatureMap out(record.channels, record.pre_length);
  for (std::size_t c = 0; c < record.channels; ++c) {
    for (std::size_t t = 0; t < record.out_length; ++t) {
      const auto index = record.indices[c * record.out_length + t];
      if (index >= record.pre_length) {
        throw DimensionError(fmt::format("maxunpool1d: index {} out of range [0, {})", index,
                                         record.pre_length));
      }
      out.at(c, index) = x.at(c, t);
    }
  }
  return out;
}

FeatureMap maxunpool1d_backward(const PoolRecord& record, const FeatureMap& grad_out) {
  check_same_shape(grad_out, record.channels, record.pre_length, "maxunpool1d_backward grad_out");
  FeatureMap grad(record.channels, record.out_length);
  for (std::size_t c = 0; c < record.channels; ++c) {
    for (std::size_t t = 0; t < record.out_length; ++t) {
      grad.at(c, t) = grad_out.at(c, record.indices[c * record.out_length + t]);
    }
  }
  return grad;
}

FeatureMap relu_forward(const FeatureMap& x) {
  FeatureMap out = x;
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

FeatureMap relu_backward(const FeatureMap& pre_activation, const FeatureMap& grad_out) {
  check_same_shape(grad_out, pre_activation.channels, pre_activation.length,
                   "relu_backward grad_out");
  FeatureMap grad = grad_out;
  for (std::size_t j = 0; j < grad.data.size(); ++j) {
    if (!(pre_activation.data[j] > 0.0)) grad.data[j] = 0.0;
  }
  return grad;
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw DimensionError(fmt::format("mse_loss: sizes {} and {}", pred.size(), target.size()));
  }
  const double m = static_cast<double>(pred.size());
  LossResult r{0.0, std::vector<double>(pred.size())};
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    r.loss += d * d;
    r.grad[j] = 2.0 * d / m;
  }
  r.loss /= m;
  return r;
}

double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw DimensionError(fmt::format("mse: sizes {} and {}", pred.size(), target.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - target[j];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError(fmt::format("adam_step: params {}, grads {}, moments {}/{}",
                                     params.size(), grads.size(), state.m.size(),
                                     state.v.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double g = grads[j];
    state.m[j] = state.beta1 * state.m[j] + (1.0 - state.beta1) * g;
    state.v[j] = state.beta2 * state.v[j] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[j] / correction1;
    const double v_hat = state.v[j] / correction2;
    params[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace face_manifold
