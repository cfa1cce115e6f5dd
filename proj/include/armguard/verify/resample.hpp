#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::verify {

/// Sampling rate and window length of the frames fed to the verifier.
struct ResampleConfig {
  double fps = 15.0;
  double seconds = 2.0;

  bool valid() const noexcept {
    return fps > 0.0 && seconds > 0.0 && std::lround(fps * seconds) == static_cast<long>(Clip::kFrames);
  }

  friend bool operator==(const ResampleConfig&, const ResampleConfig&) = default;
};

/// The six (fps, seconds) rows evaluated for the verifier.
inline constexpr std::array<ResampleConfig, 6> kEvaluatedConfigs{
    ResampleConfig{15.0, 2.0}, ResampleConfig{6.0, 5.0},   ResampleConfig{5.0, 6.0},
    ResampleConfig{1.0, 30.0}, ResampleConfig{0.5, 60.0}, ResampleConfig{0.25, 120.0}};

/// Indices round(j * native_fps / cfg.fps), j = 0..29. Throws InsufficientFrames when
/// the source does not cover cfg.seconds at native_fps.
inline std::vector<std::size_t> resample_indices(std::size_t source_frames, double native_fps, const ResampleConfig& cfg) {
  if (!cfg.valid()) throw Error(ErrorCode::InvalidArgument, "resample config must satisfy round(fps*seconds) == 30");
  if (!(native_fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "native fps must be > 0");
  const double needed = std::ceil(cfg.seconds * native_fps - 1e-9);
  std::vector<std::size_t> idx;
  idx.reserve(Clip::kFrames);
  for (std::size_t j = 0; j < Clip::kFrames; ++j) {
    idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(j) * native_fps / cfg.fps)));
  }
  if (static_cast<double>(source_frames) < needed || idx.back() >= source_frames) {
    throw Error(ErrorCode::InsufficientFrames, std::to_string(source_frames) + " frames at " +
                                                   std::to_string(native_fps) + " fps do not span " +
                                                   std::to_string(cfg.seconds) + " s");
  }
  return idx;
}

inline std::vector<Frame> resample_clip(std::span<const Frame> frames, double native_fps, const ResampleConfig& cfg) {
  std::vector<Frame> out;
  out.reserve(Clip::kFrames);
  for (std::size_t i : resample_indices(frames.size(), native_fps, cfg)) out.push_back(frames[i]);
  return out;
}

}  // namespace armguard::verify
