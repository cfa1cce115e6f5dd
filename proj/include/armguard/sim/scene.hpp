#pragma once

#include <algorithm>

#include "armguard/core/types.hpp"

namespace armguard::sim {

/// What the simulated camera sees. Pixels only matter to the motion gate and to
/// the clip the verifier receives; detector scores come from the backend.
enum class SceneKind { Moving, Static };

inline SceneKind scene_kind_from_string(std::string_view s) {
  if (s == "moving") return SceneKind::Moving;
  if (s == "static") return SceneKind::Static;
  throw Error(ErrorCode::InvalidArgument, "scene must be 'moving' or 'static'");
}

inline std::string_view to_string(SceneKind k) { return k == SceneKind::Moving ? "moving" : "static"; }

/// Textured background. Moving scenes add a bright square that walks across the
/// image; its side is a quarter of the shorter dimension (at least 4 px).
inline Frame render_scene(SceneKind kind, std::uint32_t w, std::uint32_t h, FrameSeq seq, TimeMs ts) {
  Frame f = Frame::filled(w, h, 0, ts, seq);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) f.pixels[y * w + x] = static_cast<std::uint8_t>(40 + ((x / 4 + y / 4) % 2) * 20);
  }
  if (kind == SceneKind::Static) return f;
  const std::uint32_t side = std::max<std::uint32_t>(4, std::min(w, h) / 4);
  const std::uint32_t span_x = w > side ? w - side : 1;
  const std::uint32_t span_y = h > side ? h - side : 1;
  // bounce so the square never jumps across the frame
  auto bounce = [](std::uint64_t p, std::uint32_t span) {
    const std::uint64_t period = 2ULL * span;
    const std::uint64_t r = p % period;
    return static_cast<std::uint32_t>(r < span ? r : period - r);
  };
  const std::uint32_t x0 = bounce(seq * 3, span_x);
  const std::uint32_t y0 = bounce(seq * 2, span_y);
  for (std::uint32_t y = y0; y < std::min(h, y0 + side); ++y) {
    for (std::uint32_t x = x0; x < std::min(w, x0 + side); ++x) f.pixels[y * w + x] = 230;
  }
  return f;
}

}  // namespace armguard::sim
