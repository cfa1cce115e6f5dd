#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "armguard/verify/tensor.hpp"

namespace armguard::verify {

/// Weights laid out [out][in][kt][kh][kw], one bias per output channel. Stride is 1.
struct Conv3dParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::array<std::size_t, 3> kernel{3, 3, 3};  // time, height, width
  std::size_t padding = 0;
  std::vector<float> weights;
  std::vector<float> bias;

  std::size_t weight_count() const noexcept { return out_channels * in_channels * kernel[0] * kernel[1] * kernel[2]; }

  float weight(std::size_t oc, std::size_t ic, std::size_t dt, std::size_t dy, std::size_t dx) const noexcept {
    return weights[(((oc * in_channels + ic) * kernel[0] + dt) * kernel[1] + dy) * kernel[2] + dx];
  }
};

struct DenseParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weights;  // [out][in]
  std::vector<float> bias;
};

namespace detail {

inline Tensor4::Dims conv_output_dims(const Tensor4::Dims& in, const Conv3dParams& p) {
  if (in.channels != p.in_channels) throw Error(ErrorCode::ShapeMismatch, "conv3d input channels mismatch");
  if (p.weights.size() != p.weight_count() || p.bias.size() != p.out_channels) {
    throw Error(ErrorCode::ShapeMismatch, "conv3d parameter count mismatch");
  }
  for (std::size_t k : p.kernel) {
    if (k == 0 || k % 2 == 0) throw Error(ErrorCode::ShapeMismatch, "conv3d kernel must be odd-sized");
  }
  auto out_len = [&](std::size_t n, std::size_t k) -> std::size_t {
    std::size_t padded = n + 2 * p.padding;
    if (padded < k) throw Error(ErrorCode::ShapeMismatch, "conv3d kernel larger than padded input");
    return padded - k + 1;
  };
  return {p.out_channels, out_len(in.time, p.kernel[0]), out_len(in.height, p.kernel[1]), out_len(in.width, p.kernel[2])};
}

/// Accumulates one output channel into `acc` (double, sized to the output plane).
inline void conv3d_channel(const Tensor4& input, const Conv3dParams& p, const Tensor4::Dims& od, std::size_t oc,
                           std::vector<double>& acc) {
  const auto& id = input.dims();
  const auto pad = static_cast<std::ptrdiff_t>(p.padding);
  acc.assign(od.plane(), static_cast<double>(p.bias[oc]));
  for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
    const float* src = input.channel(ic);
    for (std::size_t dt = 0; dt < p.kernel[0]; ++dt) {
      for (std::size_t dy = 0; dy < p.kernel[1]; ++dy) {
        for (std::size_t dx = 0; dx < p.kernel[2]; ++dx) {
          const double w = p.weight(oc, ic, dt, dy, dx);
          if (w == 0.0) continue;
          // Output x range whose input column x + dx - pad lies inside the image.
          const std::ptrdiff_t shift_x = static_cast<std::ptrdiff_t>(dx) - pad;
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -shift_x));
          const std::size_t x1 = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
              static_cast<std::ptrdiff_t>(id.width) - shift_x, 0, static_cast<std::ptrdiff_t>(od.width)));
          if (x0 >= x1) continue;
          for (std::size_t ot = 0; ot < od.time; ++ot) {
            const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot + dt) - pad;
            if (it < 0 || it >= static_cast<std::ptrdiff_t>(id.time)) continue;
            for (std::size_t oy = 0; oy < od.height; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + dy) - pad;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(id.height)) continue;
              const float* in_row = src + (static_cast<std::size_t>(it) * id.height + static_cast<std::size_t>(iy)) * id.width;
              double* out_row = acc.data() + (ot * od.height + oy) * od.width;
              for (std::size_t ox = x0; ox < x1; ++ox) {
                out_row[ox] += w * in_row[static_cast<std::ptrdiff_t>(ox) + shift_x];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Cross-correlation with zero padding and stride 1.
inline Tensor4 conv3d(const Tensor4& input, const Conv3dParams& params) {
  const auto od = detail::conv_output_dims(input.dims(), params);
  Tensor4 out(od);
  std::vector<double> acc;
  for (std::size_t oc = 0; oc < od.channels; ++oc) {
    detail::conv3d_channel(input, params, od, oc, acc);
    std::transform(acc.begin(), acc.end(), out.channel(oc), [](double v) { return static_cast<float>(v); });
  }
  return out;
}

inline Tensor4 relu(Tensor4 t) {
  for (auto& v : t.data()) v = std::max(v, 0.0f);
  return t;
}

inline std::vector<double> relu(std::vector<double> v) {
  for (auto& x : v) x = std::max(x, 0.0);
  return v;
}

/// Per-channel mean over time, height and width.
inline std::vector<double> global_avg_pool(const Tensor4& t) {
  const auto& d = t.dims();
  std::vector<double> out(d.channels, 0.0);
  const std::size_t plane = d.plane();
  if (plane == 0) return out;
  for (std::size_t c = 0; c < d.channels; ++c) {
    const float* p = t.channel(c);
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    out[c] = s / static_cast<double>(plane);
  }
  return out;
}

/// conv3d followed by ReLU and global average pooling without materializing the
/// conv output; the tail of the verification network is evaluated this way.
inline std::vector<double> conv3d_relu_gap(const Tensor4& input, const Conv3dParams& params) {
  const auto od = detail::conv_output_dims(input.dims(), params);
  std::vector<double> out(od.channels, 0.0);
  std::vector<double> acc;
  for (std::size_t oc = 0; oc < od.channels; ++oc) {
    detail::conv3d_channel(input, params, od, oc, acc);
    double s = 0.0;
    for (double v : acc) s += std::max(static_cast<double>(static_cast<float>(v)), 0.0);
    out[oc] = s / static_cast<double>(acc.size());
  }
  return out;
}

inline std::vector<double> dense(std::span<const double> v, const DenseParams& p) {
  if (v.size() != p.in || p.weights.size() != p.in * p.out || p.bias.size() != p.out) {
    throw Error(ErrorCode::ShapeMismatch, "dense dimensions incompatible");
  }
  std::vector<double> out(p.out);
  for (std::size_t o = 0; o < p.out; ++o) {
    double s = p.bias[o];
    const float* row = p.weights.data() + o * p.in;
    for (std::size_t i = 0; i < p.in; ++i) s += static_cast<double>(row[i]) * v[i];
    out[o] = s;
  }
  return out;
}

/// Logistic function; never overflows since exp() is only taken of non-positive arguments.
inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// Mean binary cross-entropy of sigmoid(logits) against labels, in log space:
/// -log f(s) = softplus(-s) and -log(1 - f(s)) = softplus(s).
inline double bce(std::span<const double> labels, std::span<const double> logits) {
  if (labels.size() != logits.size()) throw Error(ErrorCode::LengthMismatch, "bce labels and logits differ in length");
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "bce needs at least one point");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = labels[i];
    if (!(y >= 0.0 && y <= 1.0)) throw Error(ErrorCode::InvalidArgument, "bce label outside [0,1]");
    total += y * softplus(-logits[i]) + (1.0 - y) * softplus(logits[i]);
  }
  return total / static_cast<double>(labels.size());
}

/// d bce / d logit for a single point: sigmoid(s) - y.
inline double bce_sigmoid_gradient(double label, double logit) { return sigmoid(logit) - label; }

}  // namespace armguard::verify
