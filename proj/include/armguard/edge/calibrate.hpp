#pragma once

#include <algorithm>
#include <cmath>

#include "armguard/core/types.hpp"

namespace armguard::edge {

/// Brightness/contrast correction g = alpha*f + beta, rounded half-up and clamped to [0,255].
inline Frame calibrate(const Frame& frame, double alpha, double beta) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be > 0");
  Frame out = frame;
  if (alpha == 1.0 && beta == 0.0) return out;
  std::array<std::uint8_t, 256> lut{};
  for (int p = 0; p < 256; ++p) {
    double g = std::floor(alpha * p + beta + 0.5);
    lut[p] = static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0));
  }
  for (auto& px : out.pixels) px = lut[px];
  return out;
}

}  // namespace armguard::edge
